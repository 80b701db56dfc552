"""Monte Carlo photodetection: event streams and coincidence counting.

The simulated experiment records independent timestamp streams at two
detectors. Viewed alone each stream is a flat Poisson process carrying
no trace of the comb; the comb appears only in the histogram of pair
delays t1 - t2. Correlated pairs are generated by drawing the pair
delay from the normalized correlation density and placing the pair
uniformly in time, so the marginal of each stream stays exactly flat.

Histogramming uses a sorted two-pointer sweep, linear in the number of
events plus tallied pairs, so million-event streams are processed in
seconds without forming the quadratic pair set.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .correlation import comb_peak_positions, comb_peak_width, g2_closed
from .lattice import SPEED_OF_LIGHT, DetectorGeometry, ModeLattice
from .seeding import (
    LABEL_JITTER_DET1,
    LABEL_JITTER_DET2,
    LABEL_PAIR_COUNT,
    LABEL_PAIR_DELAY,
    LABEL_PAIR_PLACEMENT,
    LABEL_SINGLES_DET1,
    LABEL_SINGLES_DET2,
    derive_rng,
)

# Inverse-CDF sampling grid: this many points per comb peak width.
_GRID_PER_WIDTH = 50
# Guard against runaway grids when the window spans many peak widths.
_MAX_GRID_POINTS = 5_000_000

_HISTOGRAM_CHUNK = 65536


@dataclass(frozen=True)
class EventStream:
    """Timestamps recorded at one detector over [0, duration)."""

    detector_id: int
    timestamps: np.ndarray
    duration: float
    rate: float
    seed: int | None = None

    def __post_init__(self):
        if self.detector_id not in (1, 2):
            raise ValueError("detector_id must be 1 or 2")
        ts = np.asarray(self.timestamps, dtype=float)
        if ts.ndim != 1:
            raise ValueError("timestamps must be a 1-d array")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        if ts.size:
            if not np.all(np.diff(ts) > 0):
                raise ValueError("timestamps must be strictly increasing")
            if ts[0] < 0 or ts[-1] >= self.duration:
                raise ValueError("timestamps must lie within [0, duration)")
        if self.rate < 0:
            raise ValueError("rate must be non-negative")
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return int(self.timestamps.size)


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Binned counts of pair delays t1 - t2 over [tau_min, tau_max).

    Bin i covers [tau_min + i * bin_width, tau_min + (i+1) * bin_width).
    total_pairs is the number of tallied pairs, equal to counts.sum().
    metadata carries generator context (lattice, geometry, rates, seed)
    used by downstream peak detection.
    """

    bin_width: float
    tau_min: float
    tau_max: float
    counts: np.ndarray
    total_pairs: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise ValueError("counts must be a 1-d array")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if not self.tau_max > self.tau_min:
            raise ValueError("tau_max must exceed tau_min")
        if int(counts.sum()) != int(self.total_pairs):
            raise ValueError("total_pairs must equal the sum of counts")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def bin_centers(self) -> np.ndarray:
        n = self.counts.size
        return self.tau_min + (np.arange(n) + 0.5) * self.bin_width

    def merge(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        """Add counts of an identically binned histogram."""
        same = (
            self.counts.size == other.counts.size
            and math.isclose(self.bin_width, other.bin_width, rel_tol=1e-12)
            and math.isclose(self.tau_min, other.tau_min, rel_tol=0, abs_tol=1e-15)
            and math.isclose(self.tau_max, other.tau_max, rel_tol=0, abs_tol=1e-15)
        )
        if not same:
            raise ValueError("histograms must share binning to merge")
        meta = dict(self.metadata)
        meta.update(other.metadata)
        return CoincidenceHistogram(
            self.bin_width,
            self.tau_min,
            self.tau_max,
            self.counts + other.counts,
            self.total_pairs + other.total_pairs,
            meta,
        )


def sample_singles(
    rate: float,
    duration: float,
    seed: int,
    detector_id: int = 1,
    label: int | None = None,
) -> EventStream:
    """Homogeneous Poisson stream of uncorrelated detection times.

    The optional label overrides the RNG stream label, letting callers
    generate auxiliary uncorrelated streams (accidental background) that
    do not collide with the primary singles streams under one seed.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if label is None:
        label = LABEL_SINGLES_DET1 if detector_id == 1 else LABEL_SINGLES_DET2
    rng = derive_rng(seed, label)
    if duration == 0:
        return EventStream(detector_id, np.empty(0), 0.0, rate, seed)
    count = int(rng.poisson(rate * duration))
    times = np.sort(rng.uniform(0.0, duration, size=count))
    return EventStream(detector_id, times, duration, rate, seed)


def _delay_density_grid(
    lattice: ModeLattice,
    geom: DetectorGeometry,
    tau_window: tuple[float, float],
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized delay CDF on a fine grid over the lab-delay window."""
    lo, hi = float(tau_window[0]), float(tau_window[1])
    if not hi > lo:
        raise ValueError("tau window must have positive extent")
    step = comb_peak_width(lattice) / _GRID_PER_WIDTH
    n_points = int(math.ceil((hi - lo) / step)) + 1
    if n_points > _MAX_GRID_POINTS:
        raise ValueError(
            "delay window spans too many peak widths for the sampling "
            f"grid ({n_points} points); narrow the window"
        )
    grid = np.linspace(lo, hi, n_points)
    density = np.asarray(g2_closed(lattice, grid - geom.retarded_offset))
    cdf = np.concatenate(
        ([0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid)))
    )
    total = cdf[-1]
    if not (np.isfinite(total) and total > 0):
        raise ValueError("delay window contains no correlation density")
    return grid, cdf / total


def sample_pairs(
    lattice: ModeLattice,
    geom: DetectorGeometry,
    pair_rate: float,
    duration: float,
    jitter_sigma: float,
    seed: int,
    *,
    window_periods: float = 5.0,
    tau_window: tuple[float, float] | None = None,
) -> tuple[EventStream, EventStream]:
    """Correlated pair streams whose delay histogram traces the comb.

    The number of pairs is Poisson with mean pair_rate * duration. Each
    pair's delay t1 - t2 is drawn by inverse-CDF sampling from the
    normalized correlation density over a lab-delay window (default:
    window_periods comb periods centered on the geometric offset); t2
    is uniform over the duration and t1 wraps modulo the duration, so
    both marginal streams are exactly flat. Optional Gaussian jitter of
    width jitter_sigma is added to every timestamp (also wrapped).
    Detector 1 receives the signal-side times.
    """
    if pair_rate <= 0:
        raise ValueError("pair_rate must be positive")
    if duration <= 0:
        raise ValueError("duration must be positive")
    if jitter_sigma < 0:
        raise ValueError("jitter_sigma must be non-negative")
    if tau_window is None:
        half = 0.5 * window_periods / lattice.nu_b
        center = geom.retarded_offset
        tau_window = (center - half, center + half)
    grid, cdf = _delay_density_grid(lattice, geom, tau_window)

    count = int(derive_rng(seed, LABEL_PAIR_COUNT).poisson(pair_rate * duration))
    u = derive_rng(seed, LABEL_PAIR_DELAY).uniform(0.0, 1.0, size=count)
    delays = np.interp(u, cdf, grid)
    t2 = derive_rng(seed, LABEL_PAIR_PLACEMENT).uniform(0.0, duration, size=count)
    t1 = np.mod(t2 + delays, duration)
    if jitter_sigma > 0:
        t1 = np.mod(t1 + derive_rng(seed, LABEL_JITTER_DET1).normal(0.0, jitter_sigma, count), duration)
        t2 = np.mod(t2 + derive_rng(seed, LABEL_JITTER_DET2).normal(0.0, jitter_sigma, count), duration)
    s1 = EventStream(1, np.sort(t1), duration, pair_rate, seed)
    s2 = EventStream(2, np.sort(t2), duration, pair_rate, seed)
    return s1, s2


def merge_streams(a: EventStream, b: EventStream) -> EventStream:
    """Interleave two streams recorded at the same detector."""
    if a.detector_id != b.detector_id:
        raise ValueError("streams must come from the same detector")
    if a.duration != b.duration:
        raise ValueError("streams must cover the same duration")
    times = np.sort(np.concatenate([a.timestamps, b.timestamps]))
    return EventStream(a.detector_id, times, a.duration, a.rate + b.rate, None)


def build_histogram(
    s1: EventStream,
    s2: EventStream,
    bin_width: float,
    tau_min: float,
    tau_max: float,
    metadata: dict | None = None,
) -> CoincidenceHistogram:
    """Histogram of all pair delays t1 - t2 within [tau_min, tau_max).

    Runs a vectorized two-pointer sweep over the sorted streams, linear
    in the number of events plus tallied pairs. If bin_width does not
    divide the range to within one part in 1e6, the range is expanded
    upward to a whole number of bins and the expansion is recorded in
    the metadata (and warned about).
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if not tau_max > tau_min:
        raise ValueError("tau_max must exceed tau_min")
    span = tau_max - tau_min
    ratio = span / bin_width
    n_bins = int(round(ratio))
    meta = dict(metadata) if metadata else {}
    if n_bins < 1 or abs(ratio - n_bins) > 1e-6 * ratio:
        n_bins = int(math.ceil(ratio))
        new_max = tau_min + n_bins * bin_width
        warnings.warn(
            f"bin_width does not divide the range; expanding tau_max "
            f"from {tau_max!r} to {new_max!r}",
            stacklevel=2,
        )
        meta["range_expanded_from"] = tau_max
        tau_max = new_max

    t1 = s1.timestamps
    t2 = s2.timestamps
    counts = np.zeros(n_bins, dtype=np.int64)
    for start in range(0, t1.size, _HISTOGRAM_CHUNK):
        c1 = t1[start : start + _HISTOGRAM_CHUNK]
        # Pairs with tau_min <= t1 - t2 < tau_max, i.e. t2 in
        # (t1 - tau_max, t1 - tau_min], located by binary search.
        lo = np.searchsorted(t2, c1 - tau_max, side="right")
        hi = np.searchsorted(t2, c1 - tau_min, side="right")
        m = hi - lo
        total = int(m.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(c1.size), m)
        within = np.arange(total) - np.repeat(np.cumsum(m) - m, m)
        d = c1[rep] - t2[np.repeat(lo, m) + within]
        b = ((d - tau_min) / bin_width).astype(np.int64)
        counts += np.bincount(np.clip(b, 0, n_bins - 1), minlength=n_bins)

    return CoincidenceHistogram(
        bin_width, tau_min, tau_max, counts, int(counts.sum()), meta
    )


def _predicted_centers(hist: CoincidenceHistogram) -> tuple[np.ndarray, float]:
    """Comb peak centers and width implied by the histogram metadata."""
    meta = hist.metadata
    try:
        lattice = ModeLattice(
            n_modes=int(meta["n_modes"]),
            nu_b=float(meta["nu_b"]),
            nu_s0=float(meta.get("nu_s0", 1.0)),
            delta_nu=float(meta.get("delta_nu", 0.0)),
        )
        geom = DetectorGeometry(
            r1=float(meta.get("r1", 0.0)),
            r2=float(meta.get("r2", 0.0)),
            c=float(meta.get("c", SPEED_OF_LIGHT)),
        )
    except KeyError as missing:
        raise ValueError(
            f"histogram metadata lacks {missing} needed to predict peaks"
        ) from None
    width = comb_peak_width(lattice)
    period = 1.0 / lattice.nu_b
    n_lo = math.floor((hist.tau_min - geom.retarded_offset) / period) - 1
    n_hi = math.ceil((hist.tau_max - geom.retarded_offset) / period) + 1
    centers = comb_peak_positions(lattice, geom, range(n_lo, n_hi + 1))
    return centers, width


def contrast(hist: CoincidenceHistogram, min_counts: int = 1000) -> float:
    """Peak-to-valley contrast (peak - valley) / (peak + valley).

    Peak bins lie within one peak width of a predicted comb center,
    valley bins at least three widths away from every center; the
    in-between skirt is excluded from both means. Predicted centers
    come from the histogram metadata. Fails when total counts fall
    below min_counts or when either region is empty within the range.
    """
    if hist.total_pairs < min_counts:
        raise ValueError(
            f"histogram has {hist.total_pairs} counts; "
            f"at least {min_counts} required for a contrast estimate"
        )
    centers, width = _predicted_centers(hist)
    taus = hist.bin_centers
    dist = np.min(np.abs(taus[:, None] - centers[None, :]), axis=1)
    peak_bins = dist <= width
    valley_bins = dist >= 3.0 * width
    if not peak_bins.any() or not valley_bins.any():
        raise ValueError("histogram range lacks peak or valley bins")
    peak_mean = float(hist.counts[peak_bins].mean())
    valley_mean = float(hist.counts[valley_bins].mean())
    if peak_mean + valley_mean == 0:
        return 0.0
    return (peak_mean - valley_mean) / (peak_mean + valley_mean)
