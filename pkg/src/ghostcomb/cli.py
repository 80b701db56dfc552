"""Command-line entry point for reproducible simulation runs.

Four subcommands cover the workflow: `curve` evaluates correlation
curves (analytic, direct, Monte Carlo, Fock oracle, or all applicable
and cross-compared), `simulate` runs the two-detector coincidence
experiment end to end, `oracle` emits the Fock-space cross-check and
state-construction diagnostics, and `fit` recovers comb parameters from
a previously written histogram. Every run echoes its effective
configuration, seed, and library versions into a manifest so it can be
reproduced exactly from that file alone; the thread count never affects
output bytes.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import io as gio
from .config import RunConfig, load_config, parse_overrides
from .correlation import (
    comb_peak_positions,
    comb_peak_width,
    curve,
    envelope_first_zero,
    envelope_fwhm,
    g2_closed,
)
from .detection import build_histogram, contrast, merge_streams, sample_pairs, sample_singles
from .fock import (
    FockOracle,
    build_coherent_product,
    build_perturbation_state,
    entangled_coherent_pairs,
    state_fidelity,
)
from .seeding import LABEL_ACCIDENTAL_DET1, LABEL_ACCIDENTAL_DET2
from .timing import detect_peaks, fit_comb, resolution_estimate

# Largest n_points * n_modes product accepted for direct summation;
# beyond this the quadratic cost stops being desk-scale.
_DIRECT_WORK_CAP = 2 * 10**8


def _threads(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)


def _lattice_dict(cfg: RunConfig) -> dict:
    return {
        "n_modes": cfg.n_modes,
        "nu_b_hz": cfg.nu_b_hz,
        "nu_s0_hz": cfg.nu_s0_hz,
        "delta_nu_hz": cfg.delta_nu_hz,
        "profile": cfg.profile,
    }


def _write_manifest(out: Path, cfg: RunConfig, command: str, outputs: list[str]) -> None:
    gio.write_json(
        out / "manifest.json",
        {
            "command": command,
            "config": cfg.as_dict(),
            "seed": cfg.seed,
            "versions": {
                "python": ".".join(map(str, sys.version_info[:3])),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "ghostcomb": __version__,
            },
            "wall_clock_utc": datetime.now(timezone.utc).isoformat(),
            "outputs": sorted(outputs),
        },
    )


def _peak_list(cfg: RunConfig) -> tuple[list[float], bool]:
    """Comb peak centers inside the configured delay range, capped."""
    lattice = cfg.lattice()
    geom = cfg.geometry()
    period = 1.0 / lattice.nu_b
    n_lo = math.ceil((cfg.tau_min_s - geom.retarded_offset) / period)
    n_hi = math.floor((cfg.tau_max_s - geom.retarded_offset) / period)
    orders = range(n_lo, n_hi + 1)
    truncated = len(orders) > 1001
    if truncated:
        orders = list(orders)[:1001]
    return [float(p) for p in comb_peak_positions(lattice, geom, orders)], truncated


def _applicable_methods(cfg: RunConfig) -> list[str]:
    methods = ["closed"]
    if cfg.delta_nu_hz == 0.0 and cfg.n_points * cfg.n_modes <= _DIRECT_WORK_CAP:
        methods.append("direct")
    if cfg.delta_nu_hz > 0.0:
        methods.append("mc")
    if cfg.n_modes <= 4:
        methods.append("fock")
    return methods


def cmd_curve(cfg: RunConfig, out: Path) -> int:
    lattice = cfg.lattice()
    geom = cfg.geometry()
    if cfg.method == "all":
        methods = _applicable_methods(cfg)
    else:
        methods = [cfg.method]
        if cfg.method == "direct" and cfg.n_points * cfg.n_modes > _DIRECT_WORK_CAP:
            raise ValueError(
                "direct summation over this grid would take "
                f"{cfg.n_points * cfg.n_modes:.2e} terms; reduce n_points or n_modes"
            )
    curves = {}
    for m in methods:
        curves[m] = curve(
            lattice,
            geom,
            cfg.tau_min_s,
            cfg.tau_max_s,
            cfg.n_points,
            m,
            n_realizations=cfg.mc_realizations,
            seed=cfg.seed,
            threads=_threads(cfg),
            alpha=cfg.oracle_alpha,
            cutoff=cfg.oracle_cutoff,
        )
    primary_name = "closed" if cfg.method == "all" else cfg.method
    primary = curves[primary_name]

    outputs = ["curve.csv", "curve_summary.json"]
    gio.write_curve_csv(out / "curve.csv", primary.taus, primary.values)
    if "mc" in curves and curves["mc"].stderrs is not None:
        gio.write_columns_csv(
            out / "curve_mc_stderr.csv",
            ["tau_s", "stderr"],
            [curves["mc"].taus, curves["mc"].stderrs],
        )
        outputs.append("curve_mc_stderr.csv")
    if cfg.method == "all":
        header = ["tau_s"] + [f"g2_{m}" for m in methods]
        columns = [primary.taus] + [curves[m].values for m in methods]
        base = curves["closed"].values
        # Curves are peak-normalized, so this deviation is relative to
        # the unit peak; a pointwise ratio would blow up at the comb's
        # exact zeros.
        for m in methods:
            if m == "closed":
                continue
            header.append(f"rel_err_{m}")
            columns.append(np.abs(curves[m].values - base))
        gio.write_columns_csv(out / "curve_comparison.csv", header, columns)
        outputs.append("curve_comparison.csv")

    peaks, truncated = _peak_list(cfg)
    summary = {
        "lattice": _lattice_dict(cfg),
        "geometry": {"r1_m": cfg.r1_m, "r2_m": cfg.r2_m, "c_mps": cfg.c_mps},
        "method": cfg.method,
        "normalization": "peak",
        "n_points": cfg.n_points,
        "tau_min_s": cfg.tau_min_s,
        "tau_max_s": cfg.tau_max_s,
        "comb_peak_positions_s": peaks,
        "peak_list_truncated": truncated,
        "comb_peak_width_s": comb_peak_width(lattice) if cfg.n_modes >= 2 else None,
        "envelope_first_zero_s": envelope_first_zero(lattice)
        if cfg.delta_nu_hz > 0
        else None,
        "envelope_fwhm_s": envelope_fwhm(lattice) if cfg.delta_nu_hz > 0 else None,
    }
    if "mc" in curves:
        summary["mc"] = {"seed": cfg.seed, "n_realizations": cfg.mc_realizations}
    gio.write_json(out / "curve_summary.json", summary)
    _write_manifest(out, cfg, "curve", outputs)
    print(
        f"curve method={cfg.method} points={cfg.n_points} "
        f"peak_width={comb_peak_width(lattice) if cfg.n_modes >= 2 else float('nan'):.3e} s"
    )
    return 0


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    lattice = cfg.lattice()
    geom = cfg.geometry()
    s1, s2 = sample_pairs(
        lattice,
        geom,
        cfg.pair_rate_hz,
        cfg.duration_s,
        cfg.jitter_sigma_s,
        cfg.seed,
        window_periods=cfg.window_periods,
    )
    if cfg.accidental_rate_hz > 0:
        a1 = sample_singles(
            cfg.accidental_rate_hz, cfg.duration_s, cfg.seed, 1, LABEL_ACCIDENTAL_DET1
        )
        a2 = sample_singles(
            cfg.accidental_rate_hz, cfg.duration_s, cfg.seed, 2, LABEL_ACCIDENTAL_DET2
        )
        s1 = merge_streams(s1, a1)
        s2 = merge_streams(s2, a2)

    metadata = {
        "n_modes": cfg.n_modes,
        "nu_b": cfg.nu_b_hz,
        "nu_s0": cfg.nu_s0_hz,
        "delta_nu": cfg.delta_nu_hz,
        "r1": cfg.r1_m,
        "r2": cfg.r2_m,
        "c": cfg.c_mps,
        "pair_rate_hz": cfg.pair_rate_hz,
        "duration_s": cfg.duration_s,
        "jitter_sigma_s": cfg.jitter_sigma_s,
        "accidental_rate_hz": cfg.accidental_rate_hz,
        "seed": cfg.seed,
    }
    hist = build_histogram(
        s1, s2, cfg.bin_width_s, cfg.tau_min_s, cfg.tau_max_s, metadata
    )
    contrast_value = contrast(hist, cfg.contrast_floor)
    peaks = detect_peaks(hist, cfg.min_prominence)
    fit = fit_comb(peaks, nu_b_hint=cfg.nu_b_hz)
    pairs_per_peak = max(1, int(round(float(np.mean([p.counts for p in peaks])))))

    gio.write_event_stream(out / "stream_d1.bin", s1)
    gio.write_event_stream(out / "stream_d2.bin", s2)
    gio.write_histogram(out / "histogram.csv", out / "histogram_meta.json", hist)
    results = {
        "contrast": contrast_value,
        "n_events_d1": len(s1),
        "n_events_d2": len(s2),
        "total_pairs_in_range": int(hist.total_pairs),
        "geometry_offset_s": geom.retarded_offset,
        "fit": {
            "nu_b_est_hz": fit.nu_b_est,
            "offset_est_s": fit.offset_est,
            "offset_stderr_s": fit.offset_stderr,
            "offset_period_s": fit.offset_period,
            "residual_rms_s": fit.residual_rms,
            "n_peaks_used": fit.n_peaks_used,
            "peak_positions": [
                {"n": n, "center_s": c, "stderr_s": s}
                for n, c, s in fit.peak_positions
            ],
        },
        "resolution_estimate_s": resolution_estimate(lattice, pairs_per_peak),
        "pairs_per_peak": pairs_per_peak,
    }
    gio.write_json(out / "results.json", results)
    _write_manifest(
        out,
        cfg,
        "simulate",
        [
            "stream_d1.bin",
            "stream_d2.bin",
            "histogram.csv",
            "histogram_meta.json",
            "results.json",
        ],
    )
    print(
        f"simulate contrast={contrast_value:.4f} "
        f"nu_b_est={fit.nu_b_est:.6f} Hz "
        f"offset_est={fit.offset_est:.6e} s +/- {fit.offset_stderr:.2e} s"
    )
    return 0


def cmd_oracle(cfg: RunConfig, out: Path) -> int:
    lattice = cfg.oracle_lattice()
    state = entangled_coherent_pairs(
        [cfg.oracle_alpha] * cfg.oracle_pairs, cfg.oracle_cutoff
    )
    oracle = FockOracle(lattice, state)
    period = 1.0 / cfg.nu_b_hz
    taus = np.linspace(-0.5 * period, 0.5 * period, cfg.oracle_n_points)
    raw = np.array([oracle.g2(t, 0.0) for t in taus])
    g2_oracle = raw / raw.max()
    closed = np.asarray(g2_closed(lattice, taus))
    closed = closed / closed.max()
    # Deviation relative to the unit peak of the normalized curves.
    rel_err = np.abs(g2_oracle - closed)
    gio.write_columns_csv(
        out / "oracle_comparison.csv",
        ["tau_s", "g2_oracle", "g2_closed", "rel_err"],
        [taus, g2_oracle, closed, rel_err],
    )

    pert, raw_coeff = build_perturbation_state(cfg.fidelity_n, cfg.fidelity_cutoff)
    alpha = math.sqrt(pert.mean_pair_number())
    coh = build_coherent_product(alpha, cfg.fidelity_cutoff)
    report = {
        "interaction_count_n": cfg.fidelity_n,
        "cutoff": cfg.fidelity_cutoff,
        "mean_pair_number": pert.mean_pair_number(),
        "alpha_matched": alpha,
        "fidelity": state_fidelity(pert, coh),
        "coherent_offdiag_norm_sq": coh.offdiag_norm_sq,
        "coherent_truncation_deficit": max(
            0.0, 1.0 - (coh.diag_norm_sq + coh.offdiag_norm_sq)
        ),
        "max_raw_coefficient": float(raw_coeff.max()),
        "alpha_matching_rule": "mean pair number",
    }
    gio.write_json(out / "fidelity_report.json", report)
    _write_manifest(
        out, cfg, "oracle", ["oracle_comparison.csv", "fidelity_report.json"]
    )
    print(
        f"oracle pairs={cfg.oracle_pairs} max_rel_err={rel_err.max():.3e} "
        f"fidelity(n={cfg.fidelity_n})={report['fidelity']:.6f}"
    )
    return 0


def cmd_fit(cfg: RunConfig, out: Path, hist_path: str, meta_path: str | None) -> int:
    csv_path = Path(hist_path)
    if meta_path is None:
        stem = csv_path.name
        if stem.endswith(".csv"):
            stem = stem[: -len(".csv")]
        meta = csv_path.with_name(stem + "_meta.json")
    else:
        meta = Path(meta_path)
    hist = gio.read_histogram(csv_path, meta)
    peaks = detect_peaks(hist, cfg.min_prominence)
    hint = float(hist.metadata["nu_b"]) if "nu_b" in hist.metadata else None
    fit = fit_comb(peaks, nu_b_hint=hint)
    gio.write_json(
        out / "fit.json",
        {
            "nu_b_est_hz": fit.nu_b_est,
            "offset_est_s": fit.offset_est,
            "offset_stderr_s": fit.offset_stderr,
            "offset_period_s": fit.offset_period,
            "residual_rms_s": fit.residual_rms,
            "n_peaks_used": fit.n_peaks_used,
            "peak_positions": [
                {"n": n, "center_s": c, "stderr_s": s}
                for n, c, s in fit.peak_positions
            ],
        },
    )
    _write_manifest(out, cfg, "fit", ["fit.json"])
    print(
        f"fit n_peaks={fit.n_peaks_used} nu_b_est={fit.nu_b_est:.6f} Hz "
        f"offset_est={fit.offset_est:.6e} s +/- {fit.offset_stderr:.2e} s"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghostcomb",
        description="Simulate and analyze two-beam correlation combs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a key=value config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--threads", type=int, help="worker threads, 0 = auto")
        p.add_argument(
            "--set",
            dest="sets",
            action="append",
            metavar="KEY=VALUE",
            help="override any config key; repeatable",
        )

    p_curve = sub.add_parser("curve", help="evaluate a correlation curve")
    common(p_curve)
    p_curve.add_argument(
        "--method",
        choices=["closed", "direct", "mc", "fock", "all"],
        help="evaluation method (overrides config)",
    )

    p_sim = sub.add_parser("simulate", help="run the coincidence experiment")
    common(p_sim)

    p_orc = sub.add_parser("oracle", help="Fock-space cross-checks")
    common(p_orc)

    p_fit = sub.add_parser("fit", help="fit comb parameters to a histogram")
    common(p_fit)
    p_fit.add_argument("histogram", help="path to a histogram CSV")
    p_fit.add_argument(
        "--meta", help="metadata JSON (default: <histogram>_meta.json)"
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides = parse_overrides(args.sets)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out_dir"] = args.out
        if args.threads is not None:
            overrides["threads"] = args.threads
        if getattr(args, "method", None) is not None:
            overrides["method"] = args.method
        cfg = load_config(args.config, overrides)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "curve":
            return cmd_curve(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "oracle":
            return cmd_oracle(cfg, out)
        if args.command == "fit":
            return cmd_fit(cfg, out, args.histogram, args.meta)
        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:  # surface a clean one-line failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
