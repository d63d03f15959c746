"""Command-line front end: simulate | oracle | compare | figures.

Every run writes a CSV of the observable series and a JSON run record with
the resolved config echo, a parameter digest, per-time diagnostics, the
output manifest, and wall-clock timing.  There is no randomness anywhere in
the pipeline, so identical resolved configs produce byte-identical outputs
for any worker count (GRAVOJCM_THREADS).

Exit codes: 0 success (series warnings allowed), 1 compare thresholds
exceeded, 2 configuration/usage error, 3 I/O failure, 4 oracle cost budget
exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, NumericsParams, PhysicalParams,
                     build_momentum_grid, config_digest, load_config,
                     resolved_config)
from .evolve import worker_count
from .observables import ObservableSeries, build_series, compute_series
from .oracle import (OracleStiffnessError, compare_observables, estimated_cost,
                     oracle_elements, regime_tag)
from .svgplot import line_plot_svg

CSV_HEADER = ["lambda_t", "W", "F1", "F2", "delta_p", "Q", "S1", "S2", "trace", "k_max_used"]
DEFAULT_ORACLE_BUDGET = 2.0e9

SWEEP_QG = (0.0, 0.5e7, 1.5e7)

# Gravity-sweep defaults.  The coupling is scaled to lambda = 3e3 rad/s so
# the qg knob values {0, 0.5e7, 1.5e7} rad/s^2 ramp the detuning by O(lambda)
# inside the plotted window, and the remaining knobs sit where the model
# actually exhibits the advertised phenomenology: dipole and quadrature
# squeezing at qg = 0 (alpha = 0.5, delta = 0.5 lambda, weak recoil
# omega_rec = 0.02 lambda so Doppler broadening does not bury the squeezing),
# both progressively removed by gravity, with the phase damping rate set
# high enough to visibly shrink the squeezing dips but not erase them.
DEFAULT_SWEEP_CONFIG = {
    "physical": {
        "q": 1.0e7, "M": 8.3333333333333334e-23, "lambda": 3.0e3,
        "delta": 1.5e3, "gamma": 3.0e-10, "alpha": 0.5, "sigma0": 1.0,
        "omega_c": 3.0e5, "qg": 0.0,
    },
    "numerics": {"n_max": 16, "p_nodes": 21, "t_start": 0.0, "t_end": 50.0,
                 "t_steps": 801},
}

_FIG_FAMILIES = (
    ("fig1", "W", "population inversion W"),
    ("fig2", "F1", "dipole squeezing F1"),
    ("fig3", "delta_p", "momentum spread"),
    ("fig4", "Q", "Mandel Q"),
    ("fig5", "S1", "quadrature squeezing S1"),
)
_QG_LETTER = {0: "a", 1: "b", 2: "c"}


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def write_csv(path: Path, series: ObservableSeries) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for i, lt in enumerate(series.times_lt):
            w.writerow([
                _fmt(lt), _fmt(series.W[i]), _fmt(series.F1[i]), _fmt(series.F2[i]),
                _fmt(series.delta_p[i]), _fmt(series.Q[i]), _fmt(series.S1[i]),
                _fmt(series.S2[i]), _fmt(series.trace[i]), str(int(series.k_used[i])),
            ])


def run_record(resolved: dict, series: ObservableSeries, outputs: list[str],
               wall_s: float, origin: str) -> dict:
    per_time = [
        {
            "lambda_t": float(series.times_lt[i]),
            "trace": float(series.trace[i]),
            "k_used": int(series.k_used[i]),
            "series_converged": bool(series.series_converged[i]),
        }
        for i in range(series.times_lt.size)
    ]
    return {
        "package": "gravojcm",
        "version": __version__,
        "origin": origin,
        "param_hash": config_digest(resolved),
        "mode": series.mode,
        "trace_mode": series.trace_mode,
        "resolved_config": resolved,
        "series_warning": bool(not np.all(series.series_converged)),
        "overflow_capped": bool(series.overflow_capped),
        "negative_variance": bool(series.negative_variance),
        "workers": worker_count(),
        "per_time": per_time,
        "outputs": outputs,
        "wall_s": wall_s,
    }


def _write_record(path: Path, record: dict) -> None:
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")


def _apply_overrides(doc: dict, args) -> dict:
    doc = json.loads(json.dumps(doc))
    phys = doc.setdefault("physical", {})
    num = doc.setdefault("numerics", {})
    if args.qg is not None:
        phys["qg"] = args.qg
        phys.pop("beam_angle_rad", None)
    if getattr(args, "gamma", None) is not None:
        phys["gamma"] = args.gamma
    if getattr(args, "mode", None):
        num["mode"] = {"paper": "paper_faithful", "block-exact": "block_exact"}[args.mode]
    if getattr(args, "trace_mode", None):
        num["trace_mode"] = {"paper": "paper_faithful", "consistent": "trace_consistent"}[args.trace_mode]
    return doc


def _load(args) -> tuple[PhysicalParams, NumericsParams, dict]:
    if args.config is None:
        raise ConfigError("--config PATH is required")
    doc = json.loads(Path(args.config).read_text())
    doc = _apply_overrides(doc, args)
    phys, num = load_config(doc)
    return phys, num, resolved_config(phys, num)


def _pn_snapshot_rows(series: ObservableSeries, num: NumericsParams):
    for lt in num.pn_snapshot_times:
        pn = series.pn_at(lt)
        for n, p in enumerate(pn):
            yield [_fmt(lt), str(n), _fmt(p)]


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    try:
        phys, num, resolved = _load(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    grid = build_momentum_grid(phys.sigma0, num.p_nodes)
    series = compute_series(phys, num, grid)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "series.csv"
        write_csv(csv_path, series)
        outputs = [csv_path.name]
        if num.pn_snapshot_times:
            snap_path = out / "pn_snapshots.csv"
            with snap_path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["lambda_t", "n", "P"])
                w.writerows(_pn_snapshot_rows(series, num))
            outputs.append(snap_path.name)
        record = run_record(resolved, series, outputs + ["run_record.json"],
                            time.perf_counter() - t0, origin="analytic")
        _write_record(out / "run_record.json", record)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3
    if record["series_warning"]:
        print("warning: k-series depth beyond k_max at some time points; "
              "values come from the closed-form summation (see run record)")
    print(f"wrote {out / 'series.csv'}")
    return 0


def cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    try:
        phys, num, resolved = _load(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    cost = estimated_cost(phys, num)
    if cost > args.budget:
        print(f"estimated oracle cost {cost:.3e} exceeds budget {args.budget:.3e}; "
              "reduce omega_c, gamma, n_max or p_nodes", file=sys.stderr)
        return 4
    grid = build_momentum_grid(phys.sigma0, num.p_nodes)
    times = num.scaled_times() / phys.lambda_
    try:
        elem = oracle_elements(phys, num, grid, times, rtol=args.rtol, atol=args.atol)
    except OracleStiffnessError as exc:
        print(f"oracle integration failed: {exc}", file=sys.stderr)
        return 4
    series = build_series(elem, phys, num.trace_mode)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "series.csv", series)
        record = run_record(resolved, series, ["series.csv", "run_record.json"],
                            time.perf_counter() - t0, origin="oracle")
        record["regime"] = regime_tag(phys, grid)
        record["rtol"] = args.rtol
        _write_record(out / "run_record.json", record)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {out / 'series.csv'}")
    return 0


def _read_run(path: Path):
    record = json.loads((path / "run_record.json").read_text())
    rows = list(csv.DictReader((path / "series.csv").open()))
    data = {name: np.array([float(r[name]) for r in rows]) for name in CSV_HEADER}
    return record, data


def cmd_compare(args) -> int:
    try:
        rec_a, dat_a = _read_run(Path(args.run_a))
        rec_b, dat_b = _read_run(Path(args.run_b))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"cannot read runs: {exc}", file=sys.stderr)
        return 2
    if rec_a["param_hash"] != rec_b["param_hash"]:
        print("parameter hash mismatch: runs are not comparable", file=sys.stderr)
        return 2
    if dat_a["lambda_t"].shape != dat_b["lambda_t"].shape or np.any(dat_a["lambda_t"] != dat_b["lambda_t"]):
        print("time grid mismatch: runs are not comparable", file=sys.stderr)
        return 2
    names = ["W", "F1", "F2", "delta_p", "Q", "S1", "S2"]
    rows = []
    worst = 0.0
    for name in names:
        diff = dat_a[name] - dat_b[name]
        with np.errstate(invalid="ignore"):
            mx = float(np.max(np.abs(diff)))
            rms = float(np.sqrt(np.mean(diff * diff)))
        rows.append((name, mx, rms))
        if np.isfinite(mx):
            worst = max(worst, mx)
        else:
            worst = float("inf")
    print(f"{'observable':<10} {'max_abs':>14} {'rms':>14}")
    for name, mx, rms in rows:
        print(f"{name:<10} {mx:>14.6e} {rms:>14.6e}")
    if args.out:
        out = Path(args.out)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            with out.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["observable", "max_abs", "rms"])
                for name, mx, rms in rows:
                    w.writerow([name, _fmt(mx), _fmt(rms)])
        except OSError as exc:
            print(f"i/o failure: {exc}", file=sys.stderr)
            return 3
    if args.threshold is not None and not (worst <= args.threshold):
        print(f"worst max-abs {worst:.3e} exceeds threshold {args.threshold:.3e}")
        return 1
    return 0


def cmd_figures(args) -> int:
    t0 = time.perf_counter()
    try:
        if args.config is not None:
            doc = json.loads(Path(args.config).read_text())
        else:
            doc = DEFAULT_SWEEP_CONFIG
        doc = _apply_overrides(doc, args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3
    runs = []
    for idx, qg in enumerate(SWEEP_QG):
        sub = json.loads(json.dumps(doc))
        sub.setdefault("physical", {})["qg"] = qg
        sub["physical"].pop("beam_angle_rad", None)
        try:
            phys, num = load_config(sub)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        grid = build_momentum_grid(phys.sigma0, num.p_nodes)
        series = compute_series(phys, num, grid)
        runs.append((idx, qg, phys, num, series))
    outputs = []
    try:
        for idx, qg, phys, num, series in runs:
            letter = _QG_LETTER[idx]
            csv_path = out / f"sweep_{letter}_qg{qg:g}.csv"
            write_csv(csv_path, series)
            outputs.append(csv_path.name)
            for prefix, field, label in _FIG_FAMILIES:
                name = f"{prefix}{letter}_{field}.svg"
                title = f"{label}, qg = {qg:g}"
                if field == "delta_p":
                    lines = [("inversion-weighted", series.delta_p_paper),
                             ("trace-weighted", series.delta_p_consistent)]
                else:
                    lines = [(field, getattr(series, field))]
                (out / name).write_text(line_plot_svg(series.times_lt, lines, title,
                                                      "scaled time lambda*t", label))
                outputs.append(name)
        for idx, qg, phys, num, series in runs:
            record = run_record(resolved_config(phys, num), series, outputs,
                                time.perf_counter() - t0, origin="analytic")
            _write_record(out / f"run_record_{_QG_LETTER[idx]}_qg{qg:g}.json", record)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(outputs)} files to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gravojcm",
        description="Phase-damped Jaynes-Cummings dynamics of an atom falling "
                    "through a traveling wave: analytic solution, brute-force "
                    "oracle, comparisons, figures.",
    )
    ap.add_argument("--seedless", action="store_true",
                    help="reserved; the pipeline contains no RNG, so this flag is rejected")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, include_modes=True):
        p.add_argument("--config", type=Path, default=None, help="JSON config path")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--qg", type=float, default=None, help="override q.g (rad/s^2)")
        p.add_argument("--gamma", type=float, default=None, help="override phase-damping rate")
        if include_modes:
            p.add_argument("--mode", choices=["paper", "block-exact"], default=None)
            p.add_argument("--trace-mode", dest="trace_mode",
                           choices=["paper", "consistent"], default=None)

    p_sim = sub.add_parser("simulate", help="run the analytic solution")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_or = sub.add_parser("oracle", help="integrate the master equation directly")
    common(p_or)
    p_or.add_argument("--budget", type=float, default=DEFAULT_ORACLE_BUDGET,
                      help="cost gate: nodes x dim^2 x estimated steps")
    p_or.add_argument("--rtol", type=float, default=1e-10)
    p_or.add_argument("--atol", type=float, default=1e-13)
    p_or.set_defaults(func=cmd_oracle)

    p_cmp = sub.add_parser("compare", help="per-observable discrepancy table of two runs")
    p_cmp.add_argument("run_a", type=Path)
    p_cmp.add_argument("run_b", type=Path)
    p_cmp.add_argument("--out", type=Path, default=None, help="CSV table path")
    p_cmp.add_argument("--threshold", type=float, default=None,
                       help="exit 1 if any max-abs difference exceeds this")
    p_cmp.set_defaults(func=cmd_compare)

    p_fig = sub.add_parser("figures", help="qg sweep figure set (SVG + CSV)")
    common(p_fig)
    p_fig.set_defaults(func=cmd_figures)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.seedless:
        print("--seedless is reserved: the pipeline is deterministic by construction "
              "and contains no RNG to seed", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
