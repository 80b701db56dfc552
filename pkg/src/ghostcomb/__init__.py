"""Correlation-comb simulator for pairwise frequency-matched multimode beams.

The package models N longitudinal mode pairs on a frequency lattice whose
signal/idler members sum to a fixed pump frequency. The second-order
correlation of the two beams forms a periodic comb in the retarded delay
tau = (t1 - t2) - (r1 - r2)/c; the comb is evaluated analytically, by direct
mode summation, by truncated-Fock-space operator algebra, and by Monte-Carlo
photodetection, and is used to recover time offsets between the detectors.
"""

from .lattice import DetectorGeometry, ModeLattice, mode_frequencies, retarded_tau
from .correlation import (
    CorrelationCurve,
    beat_phase,
    comb_peak_positions,
    comb_peak_width,
    curve,
    dirichlet_kernel,
    envelope_fwhm,
    envelope_first_zero,
    g2_closed,
    g2_mc_envelope,
    psi_direct,
)
from .fock import (
    MultiPairState,
    TruncatedPairState,
    build_coherent_product,
    build_perturbation_state,
    entangled_coherent_pairs,
    g2_fock_oracle,
    FockOracle,
    phase_scrambled_curve,
    state_fidelity,
)
from .detection import (
    CoincidenceHistogram,
    EventStream,
    build_histogram,
    contrast,
    merge_streams,
    sample_pairs,
    sample_singles,
)
from .timing import CombFit, DetectedPeak, detect_peaks, fit_comb, resolution_estimate
from .config import RunConfig, load_config
from .seeding import derive_rng

__version__ = "0.1.0"

__all__ = [
    "CoincidenceHistogram",
    "CombFit",
    "CorrelationCurve",
    "DetectedPeak",
    "DetectorGeometry",
    "EventStream",
    "FockOracle",
    "ModeLattice",
    "MultiPairState",
    "RunConfig",
    "TruncatedPairState",
    "beat_phase",
    "build_coherent_product",
    "build_histogram",
    "build_perturbation_state",
    "comb_peak_positions",
    "comb_peak_width",
    "contrast",
    "curve",
    "derive_rng",
    "detect_peaks",
    "dirichlet_kernel",
    "entangled_coherent_pairs",
    "envelope_first_zero",
    "envelope_fwhm",
    "fit_comb",
    "g2_closed",
    "g2_fock_oracle",
    "g2_mc_envelope",
    "load_config",
    "merge_streams",
    "mode_frequencies",
    "phase_scrambled_curve",
    "psi_direct",
    "resolution_estimate",
    "retarded_tau",
    "sample_pairs",
    "sample_singles",
    "state_fidelity",
]
