"""Mode lattice and detector geometry.

A resonator with free spectral range nu_b supports N signal/idler mode pairs
around the degenerate point nu_s0 = nu_p/2. Pair n puts its signal at
nu_s0 + n*nu_b and its idler at nu_s0 - n*nu_b, so every pair sums to the pump
frequency exactly. All internal arithmetic works with the integer-indexed
detunings n*nu_b; absolute optical frequencies (~1e14 Hz) are only materialized
on request, because a 20 kHz spacing is below the double-precision ulp of the
carrier and would be destroyed by absolute-frequency bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s, exact

_PROFILES = ("rectangular",)


@dataclass(frozen=True)
class ModeLattice:
    """Frequency lattice of N signal/idler mode pairs.

    n_modes   -- number of pairs N (>= 1)
    nu_b      -- mode spacing in Hz; angular spacing is 2*pi*nu_b
    nu_s0     -- signal central frequency in Hz (> 0)
    delta_nu  -- per-mode spectral linewidth in Hz (0 = monochromatic modes)
    nu_p      -- pump frequency; must equal 2*nu_s0 exactly (degenerate pairing)
    profile   -- per-mode spectral profile tag ("rectangular" is the only one)
    """

    n_modes: int
    nu_b: float
    nu_s0: float
    delta_nu: float = 0.0
    nu_p: float | None = None
    profile: str = "rectangular"

    def __post_init__(self) -> None:
        if not isinstance(self.n_modes, (int, np.integer)) or isinstance(self.n_modes, bool):
            raise ValueError(f"n_modes must be an integer, got {self.n_modes!r}")
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if not self.nu_b > 0.0:
            raise ValueError(f"nu_b must be > 0, got {self.nu_b}")
        if not self.nu_s0 > 0.0:
            raise ValueError(f"nu_s0 must be > 0, got {self.nu_s0}")
        if self.delta_nu < 0.0:
            raise ValueError(f"delta_nu must be >= 0, got {self.delta_nu}")
        if self.delta_nu >= self.nu_b:
            raise ValueError(
                f"delta_nu ({self.delta_nu}) must stay below the mode spacing "
                f"nu_b ({self.nu_b}); modes would overlap"
            )
        if self.nu_p is None:
            object.__setattr__(self, "nu_p", 2.0 * self.nu_s0)
        elif self.nu_p != 2.0 * self.nu_s0:
            raise ValueError(
                f"nu_p must equal 2*nu_s0 exactly (degenerate pairing): "
                f"got nu_p={self.nu_p}, 2*nu_s0={2.0 * self.nu_s0}"
            )
        if self.profile not in _PROFILES:
            raise ValueError(
                f"unknown profile {self.profile!r}; supported: {_PROFILES}"
            )

    @property
    def omega_b(self) -> float:
        """Angular mode spacing 2*pi*nu_b in rad/s."""
        return 2.0 * np.pi * self.nu_b

    def detunings(self) -> np.ndarray:
        """Signal detunings n*nu_b from nu_s0, n = 0..N-1, in Hz."""
        return np.arange(self.n_modes, dtype=float) * self.nu_b


@dataclass(frozen=True)
class DetectorGeometry:
    """Optical path lengths from the source to the two detectors.

    r1, r2 -- path lengths in meters (>= 0)
    c      -- propagation speed in m/s
    """

    r1: float
    r2: float
    c: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if self.r1 < 0.0 or self.r2 < 0.0:
            raise ValueError(f"path lengths must be >= 0, got r1={self.r1}, r2={self.r2}")
        if not self.c > 0.0:
            raise ValueError(f"c must be > 0, got {self.c}")

    @property
    def retarded_offset(self) -> float:
        """Path-delay offset (r1 - r2)/c in seconds."""
        return (self.r1 - self.r2) / self.c


def retarded_tau(geom: DetectorGeometry, t1: float, t2: float) -> float:
    """Retarded delay tau = (t1 - t2) - (r1 - r2)/c.

    This is the only delay variable the correlation depends on: the comb is
    stationary in absolute time and shifts rigidly with the path imbalance.
    """
    return (t1 - t2) - geom.retarded_offset


def mode_frequencies(lattice: ModeLattice) -> np.ndarray:
    """Absolute (signal, idler) frequency pairs, shape (N, 2), in Hz.

    The idler is computed as nu_p minus the signal rather than as
    nu_s0 - n*nu_b: the complement's rounding error is below a quarter
    ulp of nu_p, so signal + idler == nu_p holds exactly in doubles for
    every pair. Prefer detunings for any further arithmetic.
    """
    signal = lattice.nu_s0 + lattice.detunings()
    return np.column_stack((signal, lattice.nu_p - signal))
