"""Run configuration: flat key=value files plus CLI overrides.

A config file is a plain text file of `key = value` lines; blank lines
and `#` comments are ignored. Every key has a typed default below, and
unknown keys are rejected by name so typos fail loudly. Values given on
the command line (via dedicated flags or repeated `--set key=value`)
override file values; the effective configuration is echoed into each
run's manifest so a run is reproducible from the manifest alone.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

from .lattice import SPEED_OF_LIGHT, DetectorGeometry, ModeLattice

_METHODS = ("closed", "direct", "mc", "fock", "all")


@dataclass
class RunConfig:
    """Typed view of every tunable parameter, with defaults.

    Field names double as config-file keys. Units are spelled out in
    the suffix (hz, s, m, mps) wherever a quantity is dimensional.
    """

    # Mode lattice and detector geometry.
    n_modes: int = 1000
    nu_b_hz: float = 20e3
    nu_s0_hz: float = 2.82e14
    delta_nu_hz: float = 0.0
    profile: str = "rectangular"
    r1_m: float = 0.0
    r2_m: float = 0.0
    c_mps: float = SPEED_OF_LIGHT

    # Correlation curve grid.
    tau_min_s: float = -1.25e-4
    tau_max_s: float = 1.25e-4
    n_points: int = 100001
    method: str = "closed"
    mc_realizations: int = 2000

    # Detection experiment.
    pair_rate_hz: float = 4.0
    duration_s: float = 2.5e5
    jitter_sigma_s: float = 0.0
    window_periods: float = 5.0
    accidental_rate_hz: float = 0.0
    bin_width_s: float = 5e-9
    min_prominence: float = 0.25
    contrast_floor: int = 1000

    # Fock oracle and fidelity diagnostics.
    oracle_pairs: int = 3
    oracle_alpha: float = 0.01
    oracle_cutoff: int = 6
    oracle_n_points: int = 401
    fidelity_n: int = 50
    fidelity_cutoff: int = 120

    # Run control.
    seed: int = 12345
    threads: int = 1
    out_dir: str = "runs"

    def lattice(self) -> ModeLattice:
        return ModeLattice(
            n_modes=self.n_modes,
            nu_b=self.nu_b_hz,
            nu_s0=self.nu_s0_hz,
            delta_nu=self.delta_nu_hz,
            profile=self.profile,
        )

    def geometry(self) -> DetectorGeometry:
        return DetectorGeometry(r1=self.r1_m, r2=self.r2_m, c=self.c_mps)

    def oracle_lattice(self) -> ModeLattice:
        return ModeLattice(
            n_modes=self.oracle_pairs,
            nu_b=self.nu_b_hz,
            nu_s0=self.nu_s0_hz,
            delta_nu=0.0,
        )

    def validate(self) -> "RunConfig":
        """Cross-field checks beyond what the dataclass types enforce."""
        self.lattice()
        self.geometry()
        if self.method not in _METHODS:
            raise ValueError(
                f"method must be one of {', '.join(_METHODS)}; got {self.method!r}"
            )
        if not self.tau_max_s > self.tau_min_s:
            raise ValueError("tau_max_s must exceed tau_min_s")
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")
        if self.mc_realizations < 2:
            raise ValueError("mc_realizations must be at least 2")
        if self.pair_rate_hz <= 0:
            raise ValueError("pair_rate_hz must be positive")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.jitter_sigma_s < 0:
            raise ValueError("jitter_sigma_s must be non-negative")
        if self.window_periods <= 0:
            raise ValueError("window_periods must be positive")
        if self.accidental_rate_hz < 0:
            raise ValueError("accidental_rate_hz must be non-negative")
        if self.bin_width_s <= 0:
            raise ValueError("bin_width_s must be positive")
        if not 0 < self.min_prominence < 1:
            raise ValueError("min_prominence must lie in (0, 1)")
        if self.contrast_floor < 1:
            raise ValueError("contrast_floor must be positive")
        if not 1 <= self.oracle_pairs <= 4:
            raise ValueError("oracle_pairs must lie in [1, 4]")
        if self.oracle_alpha <= 0:
            raise ValueError("oracle_alpha must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.threads < 0:
            raise ValueError("threads must be non-negative (0 = auto)")
        return self

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclass_fields(self)}


_FIELD_TYPES = {f.name: f.type for f in dataclass_fields(RunConfig)}


def _coerce(key: str, text: str):
    """Parse a raw string into the declared type of the config key."""
    kind = _FIELD_TYPES[key]
    text = text.strip()
    if kind == "int":
        value = float(text)
        if value != int(value):
            raise ValueError(f"config key {key!r} expects an integer, got {text!r}")
        return int(value)
    if kind == "float":
        return float(text)
    return text


def parse_overrides(pairs) -> dict:
    """Turn `key=value` strings (from --set flags) into typed values."""
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, _, text = item.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key: {key!r}")
        out[key] = _coerce(key, text)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from an optional file plus overrides."""
    values = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"{path}:{lineno}: expected 'key = value', got {line!r}"
                )
            key, _, text = line.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config key: {key!r}")
            values[key] = _coerce(key, text)
    if overrides:
        for key, value in overrides.items():
            if key not in _FIELD_TYPES:
                raise ValueError(f"unknown config key: {key!r}")
            values[key] = value if not isinstance(value, str) else _coerce(key, value)
    return RunConfig(**values).validate()
