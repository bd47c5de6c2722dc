"""Command-line front end: ``sparsesound {scheme,simulate,extract,benchmark,stats}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import toml

from . import analysis, benchmark
from .channel import SoundingModel, read_measurement, synthesize, write_measurement
from .config import ConfigError, RunConfig, apply_override, save_resolved
from .estimator import EstimateSet, SageEstimator
from .likelihood import (default_delta, empirical_udr, first_null_offset, mainlobe_width,
                         predict_sidelobe_bands, profile, rectified_profile, sidelobe_metrics,
                         write_metrics_json)
from .sampling import make_grid, predicted_udr, save_scheme

log = logging.getLogger("sparsesound")

#: Delay RMSE above which an extraction is flagged as failed.
RMSE_FLAG_S = 0.01e-9


def _ns(x: float | None) -> str:
    if x is None:
        return "n/a"
    if math.isinf(x):
        return "unbounded"
    return f"{x * 1e9:.6g} ns"


def _resolve_config(args) -> RunConfig:
    data = toml.load(args.config) if getattr(args, "config", None) else {}
    for assignment in getattr(args, "set", None) or []:
        apply_override(data, assignment)
    return RunConfig.from_dict(data)


def _out_dir(args, config: RunConfig) -> Path:
    out = Path(args.out if getattr(args, "out", None) else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------


def audit_scheme(grid, horizon: float = 500e-9, threshold_db: float = -1.0) -> dict:
    """Predicted vs. measured ambiguity and sidelobe figures of a grid."""
    udr_pred = predicted_udr(grid)
    if udr_pred is not None and math.isfinite(udr_pred):
        horizon = max(horizon, 2.2 * udr_pred)
    udr_emp = empirical_udr(grid, horizon, threshold_db)
    model = SoundingModel(grid)
    p = profile(model.steering(0.0), model, (0.0, horizon))
    excl = first_null_offset(p)
    window = udr_emp if udr_emp is not None else horizon
    inside = p.delay_grid <= window - excl
    p_in = type(p)(p.delay_grid[inside], p.values[inside], p.normalization)
    metrics = sidelobe_metrics(p_in, excl) if inside.sum() > 1 and excl < window - excl else None
    bands, non_overlapping = predict_sidelobe_bands(grid, 3)
    return {
        "scheme": grid.scheme, "k": grid.k_count, "f_start_hz": grid.f_start,
        "bandwidth_hz": grid.bandwidth,
        "predicted_udr_s": udr_pred if udr_pred is None or math.isfinite(udr_pred) else "inf",
        "empirical_udr_s": udr_emp, "search_horizon_s": horizon, "threshold_db": threshold_db,
        "mainlobe_null_to_null_s": mainlobe_width(p, "null_to_null"),
        "mainlobe_minus3db_s": mainlobe_width(p, "minus3db"),
        "max_sidelobe_db": metrics.max_sidelobe_db if metrics else None,
        "sidelobe_floor_db": metrics.floor_db if metrics else None,
        "sidelobe_bands_s": [{"m": b.order, "lo": b.delay_band[0], "hi": b.delay_band[1]}
                             for b in bands],
        "bands_non_overlapping": non_overlapping,
    }


def cmd_scheme(args) -> int:
    extra = {k: getattr(args, k) for k in ("m", "n", "n1", "n2") if getattr(args, k) is not None}
    grid = make_grid(args.type, args.fc - args.bw / 2.0, args.bw, args.k, **extra)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scheme(grid, out)
    report = audit_scheme(grid, args.horizon, args.threshold_db)
    write_metrics_json(out.with_name(out.stem + ".audit.json"), **report)
    pred = predicted_udr(grid)
    print(f"scheme: {grid.scheme}  K={grid.k_count}  f_start={grid.f_start:.6g} Hz  "
          f"B={grid.bandwidth:.6g} Hz -> {out}")
    print(f"predicted UDR: {_ns(pred)}")
    emp = report["empirical_udr_s"]
    print(f"empirical UDR: {'none found' if emp is None else _ns(emp)}")
    print(f"mainlobe null-to-null: {_ns(report['mainlobe_null_to_null_s'])}, "
          f"-3 dB: {_ns(report['mainlobe_minus3db_s'])}")
    if report["max_sidelobe_db"] is not None:
        print(f"max sidelobe: {report['max_sidelobe_db']:.2f} dB, "
              f"median floor: {report['sidelobe_floor_db']:.2f} dB")
    bands = ", ".join(f"m={b['m']}: [{b['lo'] * 1e9:.4g}, {b['hi'] * 1e9:.4g}] ns"
                      for b in report["sidelobe_bands_s"])
    print(f"predicted sidelobe bands: {bands}; non-overlapping: "
          f"{'yes' if report['bands_non_overlapping'] else 'no'}")
    return 0


def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    if args.snr is not None:
        config.channel.snr_db = None if args.snr.lower() == "none" else float(args.snr)
    if args.seed is not None:
        config.seed = args.seed
    paths = config.channel.build()
    model = config.sounding_model()
    out = _out_dir(args, config)
    ms = synthesize(model, paths, config.channel.snr_db, seed=config.seed)
    save_scheme(model.grid, out / "scheme.json")
    ms.metadata["scheme_file"] = "scheme.json"
    write_measurement(ms, out / "measurement.csv", truth=paths)
    save_resolved(config, out)
    print(f"wrote {out / 'measurement.csv'}: {len(paths)} paths, K={ms.k}, M={ms.m}, "
          f"{ms.k * ms.m} rows, noise variance {ms.noise_variance:.6g}")
    return 0


def _measurement_grid_path(meas_path: Path, ms, explicit):
    if explicit:
        return explicit
    name = ms.metadata.get("scheme_file") if isinstance(ms.metadata, dict) else None
    if name and (meas_path.parent / name).exists():
        return meas_path.parent / name
    return None


def _load_measurement(path, scheme=None):
    path = Path(path)
    ms, truth = read_measurement(path)
    scheme_path = _measurement_grid_path(path, ms, scheme)
    if scheme_path is not None:
        ms, truth = read_measurement(path, scheme_path)
    return ms, truth


def cmd_extract(args) -> int:
    config = _resolve_config(args)
    if args.no_rectify:
        config.sage.rectified = False
    if args.n_paths is not None:
        config.sage.n_paths = args.n_paths
    ms, truth = _load_measurement(args.measurement, args.scheme)
    model = SoundingModel(ms.grid, ms.pointings, config.antenna.build_pattern(),
                          config.absorption.build())
    est = SageEstimator(model, config.sage_config()).run(ms)
    out = _out_dir(args, config)
    est.save(out / "estimates.json")
    lo, hi = config.sage.delay_lo_s, config.sage.delay_hi_s
    strongest = est.paths[0]
    profile(ms, model, (lo, hi), config.sage.delta_s, strongest.azimuth,
            strongest.elevation).write_csv(out / "profile_plain.csv")
    if config.sage.rectified:
        rectified_profile(ms, model, (lo, hi), strongest.delay, config.sage.delta_s,
                          strongest.azimuth, strongest.elevation
                          ).write_csv(out / "profile_rectified.csv")
    save_resolved(config, out)
    algo = "LR-SAGE" if config.sage.rectified else "SAGE"
    print(f"{algo}: {len(est.paths)} paths, {est.iterations_used} iterations")
    for p in est.paths:
        print(f"  |alpha|={abs(p.amplitude):.6g}  tau={p.delay * 1e9:.6f} ns  "
              f"az={math.degrees(p.azimuth):.2f} deg  el={math.degrees(p.elevation):.2f} deg")
    for w in est.warnings:
        print(f"warning: {w}")
    report = {"algorithm": algo, "iterations": est.iterations_used}
    if truth:
        n = min(len(truth), len(est.paths))
        rmse = analysis.delay_rmse(est, truth, n)
        report["delay_rmse_s"] = rmse
        flag = "OK" if rmse < RMSE_FLAG_S else "LARGE (extraction failed)"
        print(f"delay RMSE vs truth ({n} strongest paths): {rmse * 1e9:.6g} ns  [{flag}]")
    (out / "report.json").write_text(json.dumps(report, indent=2))
    return 0


def cmd_benchmark(args) -> int:
    config = _resolve_config(args)
    b = config.benchmark
    if args.k:
        b.k_values = [int(x) for x in args.k.split(",")]
    if args.trials is not None:
        b.n_trials = args.trials
    if args.schemes:
        b.schemes = args.schemes.split(",")
    if args.seed is not None:
        config.seed = args.seed
    if config.channel.preset is None and not config.channel.paths:
        config.channel.preset = "table1"
    absorption = config.absorption
    if absorption.kind == "none" and any(b.ma):
        absorption.kind = "synthetic"
    grid_template = config.scheme
    scenario = benchmark.Scenario(
        paths=tuple(config.channel.build()),
        f_start=grid_template.fc - grid_template.bandwidth / 2.0,
        bandwidth=grid_template.bandwidth, snr_db=config.channel.snr_db,
        absorption=absorption.build(), sage=config.sage_config(),
        n_trials=b.n_trials, base_seed=config.seed)
    cells = benchmark.cell_grid(b.schemes, b.rectified, b.ma, b.k_values)
    rows = benchmark.run_sweep(cells, scenario, args.workers)
    out = _out_dir(args, config)
    benchmark.write_rows(rows, out / "benchmark.csv")
    summary = benchmark.aggregate(rows)
    benchmark.write_summary(summary, out / "summary.csv")
    save_resolved(config, out)
    print(f"wrote {len(rows)} rows to {out / 'benchmark.csv'}")
    for (scheme, rect, ma, k), v in summary.items():
        print(f"  {scheme:4s} {'lr-sage' if rect else 'sage':7s} ma={'on ' if ma else 'off'} "
              f"K={k:4d}  rmse={v * 1e9:.4g} ns")
    return 0


def _is_uniform(grid) -> bool:
    d = np.diff(grid.frequencies)
    return bool(np.allclose(d, d[0], rtol=1e-6, atol=0))


def cmd_stats(args) -> int:
    config = _resolve_config(args)
    st = config.stats
    rows = []
    for name in args.inputs:
        path = Path(name)
        if path.suffix == ".json":
            paths = EstimateSet.load(path).paths
            source = "estimates"
        else:
            ms, _ = _load_measurement(path, args.scheme)
            if ms.grid.scheme == "ufs" or _is_uniform(ms.grid):
                taus = np.arange(config.sage.delay_lo_s, config.sage.delay_hi_s,
                                 default_delta(ms.grid))
                cirs = analysis.pdap(ms, taus, st.window)
                gain = analysis.window_gain(st.window, ms.k)
                paths = [p for c in cirs
                         for p in analysis.pick_cir_peaks(c, st.threshold_db, st.dynamic_range_db,
                                                          gain)]
                source = "cir-peaks"
            else:
                model = SoundingModel(ms.grid, ms.pointings, config.antenna.build_pattern(),
                                      config.absorption.build())
                paths = SageEstimator(model, config.sage_config()).run(ms).paths
                source = "lr-sage" if config.sage.rectified else "sage"
        s = analysis.channel_stats(paths)
        rows.append((str(path), source, s))
        print(f"{path}: path loss {s.path_loss_db:.4f} dB, RMS delay spread "
              f"{s.rms_delay_spread_s * 1e9:.4f} ns ({source}, {len(paths)} MPCs)")
    out = _out_dir(args, config)
    with (out / "stats.csv").open("w") as fh:
        fh.write("source,method,path_loss_db,rms_delay_spread_s\n")
        for src, method, s in rows:
            fh.write(f"{src},{method},{s.path_loss_db:.12g},{s.rms_delay_spread_s:.12g}\n")
    analysis.write_cdf_csv(analysis.cdf(r[2].path_loss_db for r in rows),
                           out / "cdf_path_loss.csv", "path_loss_db")
    analysis.write_cdf_csv(analysis.cdf(r[2].rms_delay_spread_s for r in rows),
                           out / "cdf_delay_spread.csv", "rms_delay_spread_s")
    save_resolved(config, out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsesound",
                                     description="Sparse frequency-domain channel sounding toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--out", help="output directory (overrides output_dir)")

    p = sub.add_parser("scheme", help="generate and audit a frequency sampling scheme")
    p.add_argument("--type", required=True, choices=["ufs", "cfs", "nfs", "pfs"])
    p.add_argument("--fc", type=float, default=380e9, help="center frequency in Hz")
    p.add_argument("--bw", type=float, default=10e9, help="bandwidth in Hz")
    p.add_argument("--k", type=int, help="number of frequency samples")
    p.add_argument("--m", type=int, help="CFS coprime factor M (with --n)")
    p.add_argument("--n", type=int, help="CFS coprime factor N (with --m)")
    p.add_argument("--n1", type=int, help="NFS dense-level count (with --n2)")
    p.add_argument("--n2", type=int, help="NFS sparse-level count (with --n1)")
    p.add_argument("--horizon", type=float, default=500e-9, help="UDR search horizon in s")
    p.add_argument("--threshold-db", type=float, default=-1.0, help="ambiguity threshold in dB")
    p.add_argument("--out", default="scheme.json", help="scheme JSON path")
    p.set_defaults(func=cmd_scheme)

    p = sub.add_parser("simulate", help="synthesize a measurement file")
    config_args(p)
    p.add_argument("--snr", help="SNR in dB relative to the strongest path, or 'none'")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="run SAGE / LR-SAGE on a measurement file")
    config_args(p)
    p.add_argument("measurement")
    p.add_argument("--scheme", help="scheme JSON to validate the measurement grid against")
    p.add_argument("--no-rectify", action="store_true", help="classical SAGE")
    p.add_argument("--n-paths", type=int)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("benchmark", help="delay-RMSE sweep versus K")
    config_args(p)
    p.add_argument("--k", help="comma-separated K values")
    p.add_argument("--trials", type=int)
    p.add_argument("--schemes", help="comma-separated scheme list")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int,
                   help=f"worker processes (default: ${benchmark.WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("stats", help="path loss / delay spread CDFs")
    config_args(p)
    p.add_argument("inputs", nargs="+", help="measurement CSVs or estimate JSONs")
    p.add_argument("--scheme", help="scheme JSON for measurement files")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, KeyError, toml.TomlDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
