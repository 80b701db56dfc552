"""Comb parameter recovery from coincidence histograms.

The histogram peaks sit at (t1 - t2)_n = n / nu_b + (r1 - r2) / c, so a
weighted straight-line fit of fitted peak centers against their integer
order n recovers both the mode spacing and the detector path offset.
Because every integer relabeling n -> n + k fits equally well, the
offset is physically defined only modulo one comb period; fits report
it wrapped to the principal interval (-period/2, period/2] along with
the period itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .correlation import comb_peak_width
from .detection import CoincidenceHistogram
from .lattice import ModeLattice

_COM_ITERATIONS = 2


@dataclass(frozen=True)
class DetectedPeak:
    """One histogram peak: refined center, its standard error, counts."""

    center: float
    stderr: float
    counts: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if self.counts < 0:
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class CombFit:
    """Result of the peak-position regression.

    offset_est lies in the principal interval (-offset_period / 2,
    offset_period / 2]; any integer multiple of offset_period added to
    it fits the same data, which is the comb's inherent ambiguity.
    peak_positions holds (assigned index, center, stderr) per peak.
    """

    nu_b_est: float
    offset_est: float
    offset_stderr: float
    peak_positions: tuple
    residual_rms: float
    n_peaks_used: int
    offset_period: float


def _support_radius(
    hist: CoincidenceHistogram, peak_width: float | None
) -> float | None:
    """Resolve the peak support radius from argument or metadata."""
    if peak_width is not None:
        if peak_width <= 0:
            raise ValueError("peak_width must be positive")
        return float(peak_width)
    meta = hist.metadata
    if "n_modes" in meta and "nu_b" in meta:
        lattice = ModeLattice(
            n_modes=int(meta["n_modes"]),
            nu_b=float(meta["nu_b"]),
            nu_s0=float(meta.get("nu_s0", 1.0)),
            delta_nu=float(meta.get("delta_nu", 0.0)),
        )
        return comb_peak_width(lattice)
    return None


def detect_peaks(
    hist: CoincidenceHistogram,
    min_prominence: float = 0.25,
    peak_width: float | None = None,
) -> list[DetectedPeak]:
    """Locate comb peaks and refine each center by center of mass.

    Candidate maxima must rise above min_prominence times the count
    span. Each center is then refined iteratively as the center of mass
    of the bins within one peak width of the current estimate; the
    width comes from the argument, or from lattice metadata, or as a
    fallback from the measured half-height width of the peak itself.
    The center standard error follows from counting statistics. The
    expected width must span at least 10 bins, else the binning is too
    coarse to refine and an error is raised.
    """
    counts = hist.counts.astype(float)
    span = counts.max() - counts.min()
    if span <= 0:
        raise ValueError("histogram is flat; no peaks found")
    radius = _support_radius(hist, peak_width)
    if radius is not None and radius < 10 * hist.bin_width:
        raise ValueError(
            "binning too coarse: need at least 10 bins per peak width "
            f"({radius / hist.bin_width:.1f} found)"
        )
    idx, _ = find_peaks(counts, prominence=min_prominence * span)
    if idx.size == 0:
        raise ValueError("no peaks exceed the prominence threshold")
    taus = hist.bin_centers
    half_widths = peak_widths(counts, idx, rel_height=0.5)[0] * hist.bin_width / 2.0

    peaks = []
    supports = []
    for j, i in enumerate(idx):
        r = radius if radius is not None else max(half_widths[j], hist.bin_width * 5)
        center = taus[i]
        for _ in range(_COM_ITERATIONS):
            sel = np.abs(taus - center) <= r
            c_sel = counts[sel]
            total = c_sel.sum()
            if total <= 0:
                break
            center = float(np.sum(c_sel * taus[sel]) / total)
        if total <= 0:
            continue
        var = float(np.sum(c_sel * (taus[sel] - center) ** 2) / total)
        stderr = math.sqrt(var / total) if total > 0 else math.inf
        peaks.append(DetectedPeak(center, stderr, int(total)))
        supports.append(r)
    if not peaks:
        raise ValueError("no peaks with nonzero support found")
    order = sorted(range(len(peaks)), key=lambda j: peaks[j].center)
    # Noisy tops can yield several candidates inside one physical peak;
    # after refinement those converge to overlapping centers. Keep one
    # peak per support radius so the fit is not double-weighted.
    merged = [order[0]]
    for j in order[1:]:
        prev = merged[-1]
        gap = peaks[j].center - peaks[prev].center
        if gap <= max(supports[j], supports[prev]):
            if peaks[j].counts > peaks[prev].counts:
                merged[-1] = j
        else:
            merged.append(j)
    return [peaks[j] for j in merged]


def _assign_indices(centers: np.ndarray, nu_b_hint: float | None) -> np.ndarray:
    """Map peak centers to integer comb orders relative to the first."""
    base = centers[0]
    if nu_b_hint is not None:
        if nu_b_hint <= 0:
            raise ValueError("nu_b_hint must be positive")
        raw = (centers - base) * nu_b_hint
    else:
        gaps = np.diff(np.sort(centers))
        gaps = gaps[gaps > 0]
        if gaps.size == 0:
            raise ValueError("degenerate peak set: all centers coincide")
        raw = (centers - base) / np.median(gaps)
    ns = np.round(raw)
    drift = np.max(np.abs(raw - ns))
    if drift > 0.25:
        raise ValueError(
            f"index assignment ambiguous: rounding residual {drift:.3f} "
            "exceeds 0.25 of a period"
        )
    return ns.astype(int)


def fit_comb(peaks, nu_b_hint: float | None = None) -> CombFit:
    """Weighted least-squares line through (order n, peak center).

    peaks is a sequence of DetectedPeak or (center, stderr) pairs, at
    least two of them. Weights are inverse variances when every stderr
    is positive; otherwise the fit is unweighted and parameter errors
    are scaled from the residuals. The slope gives the comb period
    (nu_b_est is its inverse) and the intercept gives the path offset,
    reported in the principal interval.
    """
    centers = []
    stderrs = []
    for p in peaks:
        if isinstance(p, DetectedPeak):
            centers.append(p.center)
            stderrs.append(p.stderr)
        else:
            c, s = p
            centers.append(float(c))
            stderrs.append(float(s))
    centers = np.asarray(centers)
    stderrs = np.asarray(stderrs)
    if centers.size < 2:
        raise ValueError("need at least 2 peaks to fit the comb")

    ns = _assign_indices(centers, nu_b_hint)
    if np.all(ns == ns[0]):
        raise ValueError("degenerate peak set: all peaks share one index")

    weighted = bool(np.all(stderrs > 0))
    w = 1.0 / stderrs**2 if weighted else np.ones_like(centers)
    x = ns.astype(float)
    y = centers
    s_w = w.sum()
    s_x = (w * x).sum()
    s_xx = (w * x * x).sum()
    s_y = (w * y).sum()
    s_xy = (w * x * y).sum()
    det = s_w * s_xx - s_x**2
    if det <= 0:
        raise ValueError("degenerate peak set: singular regression")
    slope = (s_w * s_xy - s_x * s_y) / det
    intercept = (s_xx * s_y - s_x * s_xy) / det
    if slope <= 0:
        raise ValueError("fitted comb period is not positive")

    resid = y - (intercept + slope * x)
    residual_rms = float(np.sqrt(np.mean(resid**2)))
    var_intercept = s_xx / det
    if not weighted:
        dof = centers.size - 2
        scale = float((w * resid**2).sum() / dof) if dof > 0 else 0.0
        var_intercept *= scale
    offset_stderr = math.sqrt(var_intercept)

    period = slope
    k = math.ceil(intercept / period - 0.5)
    offset = intercept - k * period

    positions = tuple(
        (int(n), float(c), float(s)) for n, c, s in zip(ns, centers, stderrs)
    )
    return CombFit(
        nu_b_est=1.0 / slope,
        offset_est=float(offset),
        offset_stderr=float(offset_stderr),
        peak_positions=positions,
        residual_rms=residual_rms,
        n_peaks_used=int(centers.size),
        offset_period=float(period),
    )


def resolution_estimate(lattice: ModeLattice, pairs_per_peak: int) -> float:
    """Predicted 1-sigma peak-center uncertainty from counting statistics.

    One detected pair localizes a peak to about its width 1/(N nu_b);
    averaging k pairs shrinks that by sqrt(k). This is a statistics
    extension layered on the comb geometry, not an analytic result of
    the correlation function itself.
    """
    if pairs_per_peak < 1:
        raise ValueError("pairs_per_peak must be at least 1")
    return comb_peak_width(lattice) / math.sqrt(pairs_per_peak)
