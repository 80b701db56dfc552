"""Tests for event-stream generation and coincidence counting."""

import math
import warnings

import numpy as np
import pytest
from scipy import stats

from ghostcomb import (
    CoincidenceHistogram,
    DetectorGeometry,
    EventStream,
    ModeLattice,
    build_histogram,
    comb_peak_width,
    contrast,
    g2_closed,
    merge_streams,
    sample_pairs,
    sample_singles,
)

CARRIER = 2.82e14
LAT10 = ModeLattice(n_modes=10, nu_b=20e3, nu_s0=CARRIER)
GEOM0 = DetectorGeometry(r1=0.0, r2=0.0)


def meta_for(lattice, geom):
    return {
        "n_modes": lattice.n_modes,
        "nu_b": lattice.nu_b,
        "nu_s0": lattice.nu_s0,
        "delta_nu": lattice.delta_nu,
        "r1": geom.r1,
        "r2": geom.r2,
        "c": geom.c,
    }


class TestEventStream:
    def test_accepts_valid_stream(self):
        s = EventStream(1, np.array([0.1, 0.5, 0.9]), 1.0, 3.0)
        assert len(s) == 3

    def test_validation(self):
        good = np.array([0.1, 0.5])
        with pytest.raises(ValueError):
            EventStream(3, good, 1.0, 2.0)
        with pytest.raises(ValueError):
            EventStream(1, good.reshape(2, 1), 1.0, 2.0)
        with pytest.raises(ValueError):
            EventStream(1, np.array([0.5, 0.1]), 1.0, 2.0)
        with pytest.raises(ValueError):
            EventStream(1, np.array([0.5, 0.5]), 1.0, 2.0)
        with pytest.raises(ValueError):
            EventStream(1, np.array([-0.1, 0.5]), 1.0, 2.0)
        with pytest.raises(ValueError):
            EventStream(1, np.array([0.1, 1.0]), 1.0, 2.0)
        with pytest.raises(ValueError):
            EventStream(1, good, -1.0, 2.0)
        with pytest.raises(ValueError):
            EventStream(1, good, 1.0, -2.0)


class TestSampleSingles:
    def test_count_near_expectation(self):
        s = sample_singles(1000.0, 100.0, seed=11)
        mean = 1000.0 * 100.0
        assert abs(len(s) - mean) < 5 * math.sqrt(mean)

    def test_zero_duration(self):
        s = sample_singles(5.0, 0.0, seed=11)
        assert len(s) == 0

    def test_uniform_timestamps(self):
        s = sample_singles(2000.0, 50.0, seed=42)
        p = stats.kstest(s.timestamps / s.duration, "uniform").pvalue
        assert p > 0.01

    def test_deterministic(self):
        a = sample_singles(100.0, 10.0, seed=3)
        b = sample_singles(100.0, 10.0, seed=3)
        assert np.array_equal(a.timestamps, b.timestamps)

    def test_detectors_and_labels_decorrelate(self):
        a = sample_singles(100.0, 10.0, seed=3, detector_id=1)
        b = sample_singles(100.0, 10.0, seed=3, detector_id=2)
        c = sample_singles(100.0, 10.0, seed=3, detector_id=1, label=10)
        assert not np.array_equal(a.timestamps[: len(b)], b.timestamps[: len(a)])
        assert not np.array_equal(a.timestamps[: len(c)], c.timestamps[: len(a)])

    def test_requires_positive_rate(self):
        with pytest.raises(ValueError):
            sample_singles(0.0, 1.0, seed=1)


class TestSamplePairs:
    RATE = 0.05
    DURATION = 1.0e6  # low rate over a long span keeps accidentals rare

    def pair_histogram(self, seed=21, jitter=0.0, bins_per_width=10):
        s1, s2 = sample_pairs(LAT10, GEOM0, self.RATE, self.DURATION, jitter, seed)
        width = comb_peak_width(LAT10)
        h = width / bins_per_width
        return s1, s2, build_histogram(s1, s2, h, -1.25e-4, 1.25e-4, meta_for(LAT10, GEOM0))

    def test_marginals_are_flat(self):
        s1, s2 = sample_pairs(LAT10, GEOM0, self.RATE, self.DURATION, 0.0, seed=21)
        for s in (s1, s2):
            counts, _ = np.histogram(s.timestamps, bins=100, range=(0, self.DURATION))
            assert stats.chisquare(counts).pvalue > 0.01

    def test_delay_distribution_matches_density(self):
        # Chi-square closure of the whole pipeline: sampled delays,
        # histogrammed, against the normalized correlation density.
        s1, s2, hist = self.pair_histogram(bins_per_width=5)
        grid = np.linspace(-1.25e-4, 1.25e-4, 20001)
        dens = np.asarray(g2_closed(LAT10, grid))
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))))
        cdf /= cdf[-1]
        edges = hist.tau_min + np.arange(hist.counts.size + 1) * hist.bin_width
        probs = np.diff(np.interp(edges, grid, cdf))
        expected = hist.total_pairs * probs
        mask = expected >= 10
        chi2 = np.sum((hist.counts[mask] - expected[mask]) ** 2 / expected[mask])
        assert chi2 / mask.sum() < 2.0

    def test_peaks_carry_equal_weight(self):
        _, _, hist = self.pair_histogram()
        width = comb_peak_width(LAT10)
        taus = hist.bin_centers
        per_peak = []
        for n in range(-2, 3):
            center = n / LAT10.nu_b
            per_peak.append(int(hist.counts[np.abs(taus - center) <= width].sum()))
        assert stats.chisquare(per_peak).pvalue > 0.001

    def test_main_lobe_fraction(self):
        _, _, hist = self.pair_histogram()
        width = comb_peak_width(LAT10)
        grid = np.linspace(-1.25e-4, 1.25e-4, 20001)
        dens = np.asarray(g2_closed(LAT10, grid))
        centers = np.arange(-2, 3) / LAT10.nu_b
        lobe = np.min(np.abs(grid[:, None] - centers[None, :]), axis=1) <= width
        frac_expected = np.trapezoid(dens * lobe, grid) / np.trapezoid(dens, grid)
        taus = hist.bin_centers
        in_lobe = np.min(np.abs(taus[:, None] - centers[None, :]), axis=1) <= width
        frac = hist.counts[in_lobe].sum() / hist.total_pairs
        sigma = math.sqrt(frac_expected * (1 - frac_expected) / hist.total_pairs)
        assert abs(frac - frac_expected) < 5 * sigma + 0.002

    def test_no_samples_at_interior_zeros(self):
        # The density vanishes quadratically at k / (N nu_b); sampled
        # delays should stay clear of a narrow window around each zero.
        s1, s2, hist = self.pair_histogram(bins_per_width=500)
        width = comb_peak_width(LAT10)
        taus = hist.bin_centers
        zeros = np.array(
            [k / (10 * LAT10.nu_b) for k in range(-24, 25) if k % 10 != 0]
        )
        near = np.min(np.abs(taus[:, None] - zeros[None, :]), axis=1) <= 1e-3 * width
        assert hist.counts[near].sum() == 0

    def test_jitter_broadens_peaks(self):
        _, _, sharp = self.pair_histogram(seed=22)
        _, _, fuzzy = self.pair_histogram(seed=22, jitter=5e-6)
        width = comb_peak_width(LAT10)
        taus = sharp.bin_centers
        lobe = np.abs(taus) <= width
        frac_sharp = sharp.counts[lobe].sum() / sharp.total_pairs
        frac_fuzzy = fuzzy.counts[lobe].sum() / fuzzy.total_pairs
        assert frac_fuzzy < 0.7 * frac_sharp

    def test_deterministic(self):
        a1, a2 = sample_pairs(LAT10, GEOM0, 1.0, 100.0, 1e-7, seed=5)
        b1, b2 = sample_pairs(LAT10, GEOM0, 1.0, 100.0, 1e-7, seed=5)
        assert np.array_equal(a1.timestamps, b1.timestamps)
        assert np.array_equal(a2.timestamps, b2.timestamps)

    def test_degenerate_window_is_an_error(self):
        with pytest.raises(ValueError, match="extent"):
            sample_pairs(
                LAT10, GEOM0, 1.0, 10.0, 0.0, seed=1, tau_window=(1e-5, 1e-5)
            )

    def test_oversized_window_is_an_error(self):
        with pytest.raises(ValueError, match="narrow"):
            sample_pairs(
                LAT10, GEOM0, 1.0, 10.0, 0.0, seed=1, tau_window=(-0.3, 0.3)
            )

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_pairs(LAT10, GEOM0, 0.0, 1.0, 0.0, seed=1)
        with pytest.raises(ValueError):
            sample_pairs(LAT10, GEOM0, 1.0, 0.0, 0.0, seed=1)
        with pytest.raises(ValueError):
            sample_pairs(LAT10, GEOM0, 1.0, 1.0, -1e-9, seed=1)


class TestMergeStreams:
    def test_interleaves(self):
        a = EventStream(1, np.array([0.1, 0.4]), 1.0, 2.0)
        b = EventStream(1, np.array([0.2, 0.8]), 1.0, 3.0)
        m = merge_streams(a, b)
        assert np.array_equal(m.timestamps, [0.1, 0.2, 0.4, 0.8])
        assert m.rate == 5.0

    def test_rejects_mismatches(self):
        a = EventStream(1, np.array([0.1]), 1.0, 1.0)
        with pytest.raises(ValueError):
            merge_streams(a, EventStream(2, np.array([0.1]), 1.0, 1.0))
        with pytest.raises(ValueError):
            merge_streams(a, EventStream(1, np.array([0.1]), 2.0, 1.0))


class TestBuildHistogram:
    def test_empty_streams(self):
        empty = EventStream(1, np.empty(0), 1.0, 0.0)
        h = build_histogram(empty, EventStream(2, np.empty(0), 1.0, 0.0), 0.1, -0.5, 0.5)
        assert h.counts.sum() == 0
        assert h.counts.size == 10

    def test_single_pair_lands_in_expected_bin(self):
        s1 = EventStream(1, np.array([1.0]), 2.0, 1.0)
        s2 = EventStream(2, np.array([0.9995]), 2.0, 1.0)
        h = build_histogram(s1, s2, 1e-3, -5e-3, 5e-3)
        assert h.total_pairs == 1
        assert h.counts[5] == 1  # delay 5e-4 falls in [5e-4, 1.5e-3)

    def test_boundary_delays(self):
        tau_min, tau_max = -1e-3, 1e-3
        s1 = EventStream(1, np.array([2.0]), 4.0, 1.0)
        at_min = EventStream(2, np.array([2.0 - tau_min]), 4.0, 1.0)
        at_max = EventStream(2, np.array([2.0 - tau_max]), 4.0, 1.0)
        h_min = build_histogram(s1, at_min, 1e-4, tau_min, tau_max)
        h_max = build_histogram(s1, at_max, 1e-4, tau_min, tau_max)
        assert h_min.counts[0] == 1  # tau == tau_min is included
        assert h_max.total_pairs == 0  # tau == tau_max is excluded

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        t1 = np.sort(rng.uniform(0, 50, 400))
        t2 = np.sort(rng.uniform(0, 50, 300))
        s1 = EventStream(1, t1, 50.0, 8.0)
        s2 = EventStream(2, t2, 50.0, 6.0)
        bin_width, tau_min, tau_max = 0.05, -1.0, 1.0
        h = build_histogram(s1, s2, bin_width, tau_min, tau_max)
        n_bins = h.counts.size
        brute = np.zeros(n_bins, dtype=int)
        for a in t1:
            for b in t2:
                d = a - b
                if tau_min <= d < tau_max:
                    brute[int((d - tau_min) / bin_width)] += 1
        assert np.array_equal(h.counts, brute)

    def test_bin_count_rule(self):
        s = EventStream(1, np.array([1.0]), 2.0, 1.0)
        h = build_histogram(s, s, 1e-3, -5e-3, 5e-3)
        assert h.counts.size == 10
        # A ratio off by less than one part in 1e6 is not expanded.
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            h = build_histogram(s, s, 1e-3, -5e-3, 5e-3 * (1 + 1e-9))
        assert h.counts.size == 10

    def test_range_expansion(self):
        s = EventStream(1, np.array([1.0]), 2.0, 1.0)
        with pytest.warns(UserWarning, match="expanding"):
            h = build_histogram(s, s, 3e-3, -5e-3, 5e-3)
        assert h.counts.size == 4
        assert h.tau_max == pytest.approx(-5e-3 + 4 * 3e-3)
        assert h.metadata["range_expanded_from"] == 5e-3

    def test_validation(self):
        s = EventStream(1, np.array([1.0]), 2.0, 1.0)
        with pytest.raises(ValueError):
            build_histogram(s, s, 0.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            build_histogram(s, s, 0.1, 1.0, -1.0)

    def test_merge(self):
        s1 = EventStream(1, np.array([1.0]), 2.0, 1.0)
        s2 = EventStream(2, np.array([0.9995]), 2.0, 1.0)
        h = build_histogram(s1, s2, 1e-3, -5e-3, 5e-3)
        both = h.merge(h)
        assert both.total_pairs == 2
        assert np.array_equal(both.counts, 2 * h.counts)
        other = build_histogram(s1, s2, 2e-3, -5e-3, 5e-3)
        with pytest.raises(ValueError, match="binning"):
            h.merge(other)


class TestContrast:
    def synthetic_histogram(self, peak, valley, skirt):
        width = comb_peak_width(LAT10)
        h = width
        tau_min, tau_max = -1.25e-4, 1.25e-4
        n_bins = int(round((tau_max - tau_min) / h))
        taus = tau_min + (np.arange(n_bins) + 0.5) * h
        centers = np.arange(-3, 4) / LAT10.nu_b
        dist = np.min(np.abs(taus[:, None] - centers[None, :]), axis=1)
        counts = np.full(n_bins, skirt)
        counts[dist <= width] = peak
        counts[dist >= 3 * width] = valley
        return CoincidenceHistogram(
            h, tau_min, tau_max, counts, int(counts.sum()), meta_for(LAT10, GEOM0)
        )

    def test_mixture_arithmetic(self):
        hist = self.synthetic_histogram(90, 10, 50)
        assert contrast(hist, min_counts=100) == pytest.approx(0.8, rel=1e-12)

    def test_flat_histogram_has_zero_contrast(self):
        hist = self.synthetic_histogram(25, 25, 25)
        assert contrast(hist, min_counts=100) == 0.0

    def test_simulated_pairs_are_high_contrast(self):
        # Many modes keep the between-peak side lobes small relative to
        # the main lobes, so an ideal run shows near-unit contrast.
        lat = ModeLattice(n_modes=100, nu_b=20e3, nu_s0=CARRIER)
        s1, s2 = sample_pairs(lat, GEOM0, 0.05, 1e6, 0.0, seed=33)
        width = comb_peak_width(lat)
        hist = build_histogram(
            s1, s2, width / 10, -1.25e-4, 1.25e-4, meta_for(lat, GEOM0)
        )
        assert contrast(hist) > 0.99

    def test_count_floor(self):
        hist = self.synthetic_histogram(1, 0, 0)
        with pytest.raises(ValueError, match="at least"):
            contrast(hist, min_counts=10_000)

    def test_missing_metadata(self):
        h = CoincidenceHistogram(1e-6, -1e-5, 1e-5, np.full(20, 100), 2000, {})
        with pytest.raises(ValueError, match="metadata"):
            contrast(h, min_counts=10)

    def test_range_without_valleys(self):
        # Two modes: every delay is within one width of some peak center.
        lat2 = ModeLattice(n_modes=2, nu_b=20e3, nu_s0=CARRIER)
        h = CoincidenceHistogram(
            5e-6, -2.5e-5, 2.5e-5, np.full(10, 100), 1000, meta_for(lat2, GEOM0)
        )
        with pytest.raises(ValueError, match="lacks"):
            contrast(h, min_counts=10)
