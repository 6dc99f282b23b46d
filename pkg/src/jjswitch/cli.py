"""Command-line entry points: simulate, ensemble, sweep, lz.

Each command loads a config file (all keys optional, lab units), applies
--set overrides, runs the requested simulation, and writes deterministic
CSV/JSON outputs into the output directory.  Fixed seed implies
byte-identical outputs, for any --workers count.

Exit codes: 0 success, 2 configuration error, 3 physics-domain error,
4 numerical-tolerance error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import analysis, engine, oracle, output, rng
from .config import (
    RunConfig,
    apply_overrides,
    build_physics,
    load_config,
    with_seed,
)
from .errors import (
    ConfigError,
    JJSwitchError,
    PhysicsDomainError,
    ToleranceError,
    UnimodalSequenceError,
)
from .constants import HBAR
from .hamiltonian import (
    crossing_survival_numeric,
    landau_zener_probability,
    sweep_rate,
)
from .physics import resonance_current

logger = logging.getLogger("jjswitch")

TWO_PI = 2.0 * math.pi


def _index_chunks(n: int, workers: int) -> list[tuple[int, int]]:
    span = max(1, (n + workers - 1) // workers)
    return [(lo, min(lo + span, n)) for lo in range(0, n, span)]


def _ensemble_slice(args):
    cfg_text, lo, hi = args
    from .config import parse_config_text

    cfg = parse_config_text(cfg_text)
    p, tls, d, ecfg = build_physics(cfg)
    recs = engine.run_trajectories(
        p, tls, d, ecfg, [0] * (hi - lo), list(range(lo, hi))
    )
    return [(r.ramp_index, r.switching_current, r.flag_at_switch, r.n_relax_events) for r in recs]


def _variant_slice(args):
    cfg_text, flag, lo, hi = args
    from .config import parse_config_text

    cfg = parse_config_text(cfg_text)
    p, tls, d, ecfg = build_physics(cfg)
    recs = engine.run_trajectories(
        p, tls, d, ecfg, [flag] * (hi - lo), list(range(lo, hi))
    )
    return [(r.ramp_index, r.switching_current, r.flag_at_switch, r.n_relax_events) for r in recs]


def _records_from_rows(rows) -> list[engine.SwitchRecord]:
    # only the relax count crosses worker boundaries, not full event logs
    return [
        engine.SwitchRecord(
            ramp_index=idx,
            switching_current=i_s,
            flag_at_switch=flag,
            n_relax_events=n_relax,
        )
        for idx, i_s, flag, n_relax in rows
    ]


def _run_sequence_records(cfg: RunConfig, workers: int) -> list[engine.SwitchRecord]:
    """Telegraph sequence, optionally fanning the flag variants out to a pool."""
    p, tls, d, ecfg = build_physics(cfg)
    if workers <= 1:
        return engine.run_sequence(p, tls, d, ecfg)
    from .config import config_text

    text = config_text(cfg)
    n = ecfg.ramps
    chunks = _index_chunks(n, workers)
    flags_needed = (0,) if ecfg.dimension == 2 else (0, 1)
    jobs = [(text, f, lo, hi) for f in flags_needed for lo, hi in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_variant_slice, jobs))
    per_flag: dict[int, list] = {f: [] for f in flags_needed}
    for (text_, f, lo, hi), rows in zip(jobs, results):
        per_flag[f].extend(rows)
    rec0 = _records_from_rows(sorted(per_flag[0]))
    if ecfg.dimension == 2:
        return rec0
    rec1 = _records_from_rows(sorted(per_flag[1]))
    return engine.fold_sequence(rec0, rec1, ecfg.init_flag)


def _run_ensemble_records(cfg: RunConfig, workers: int) -> list[engine.SwitchRecord]:
    p, tls, d, ecfg = build_physics(cfg)
    n = cfg.trajectories
    if workers <= 1:
        return engine.run_ensemble(p, tls, d, ecfg, n)
    from .config import config_text

    text = config_text(cfg)
    jobs = [(text, lo, hi) for lo, hi in _index_chunks(n, workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_ensemble_slice, jobs))
    rows = sorted(row for rows in results for row in rows)
    return _records_from_rows(rows)


def _branch_summary(records) -> tuple[dict, object]:
    """Classify the records; on a unimodal sequence report that instead."""
    try:
        stats = analysis.classify_branches(records)
    except UnimodalSequenceError as exc:
        return {"bimodal": False, "reason": str(exc)}, None
    fidelity = analysis.label_fidelity(records, stats)
    summary = {
        "bimodal": True,
        "threshold_uA": stats.threshold * 1e6,
        "jumps": stats.jumps,
        "mean_dwell_upper_ramps": stats.mean_dwell_upper,
        "mean_dwell_lower_ramps": stats.mean_dwell_lower,
        "mean_dwell_ramps": stats.mean_dwell,
        "mean_current_upper_uA": stats.mean_current_upper * 1e6,
        "mean_current_lower_uA": stats.mean_current_lower * 1e6,
        "label_fidelity": fidelity,
    }
    return summary, stats


def cmd_simulate(cfg: RunConfig, out_dir: str, workers: int) -> dict:
    """Telegraph run: records.csv, labels.csv (when bimodal), summary.json."""
    output.ensure_dir(out_dir)
    records = _run_sequence_records(cfg, workers)
    output.write_csv(
        os.path.join(out_dir, "records.csv"),
        cfg,
        "simulate",
        ("ramp_index", "I_s_uA", "flag", "n_relax_events"),
        (
            (r.ramp_index, r.switching_current * 1e6, r.flag_at_switch, r.n_relax_events)
            for r in records
        ),
    )
    branch, stats = _branch_summary(records)
    if stats is not None:
        output.write_csv(
            os.path.join(out_dir, "labels.csv"),
            cfg,
            "simulate",
            ("ramp_index", "branch"),
            ((r.ramp_index, label) for r, label in zip(records, stats.labels)),
        )
    summary = {"ramps": len(records), "branches": branch}
    output.write_summary(os.path.join(out_dir, "summary.json"), cfg, "simulate", summary)
    return summary


def cmd_ensemble(cfg: RunConfig, out_dir: str, workers: int) -> dict:
    """Independent-ramp ensemble vs the master equation: histogram.csv,
    master.csv, TV distance in summary.json."""
    output.ensure_dir(out_dir)
    records = _run_ensemble_records(cfg, workers)
    hist = analysis.histogram(records, cfg.bin_width_uA * 1e-6)
    output.write_csv(
        os.path.join(out_dir, "histogram.csv"),
        cfg,
        "ensemble",
        ("bin_lo_uA", "bin_hi_uA", "count"),
        (
            (lo * 1e6, hi * 1e6, int(c))
            for lo, hi, c in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts)
        ),
    )
    p, tls, d, ecfg = build_physics(cfg)
    dist = oracle.integrate_master(p, tls, d, frame=ecfg.frame)
    output.write_csv(
        os.path.join(out_dir, "master.csv"),
        cfg,
        "ensemble",
        ("I_uA", "density_per_uA", "survival"),
        (
            (i * 1e6, rho * 1e-6, s)
            for i, rho, s in zip(dist.grid, dist.density, dist.survival)
        ),
    )
    tv = oracle.distribution_distance(hist, dist)
    summary = {
        "trajectories": len(records),
        "tv_distance": tv,
        "histogram_mode_uA": float(hist.bin_centers[hist.counts.argmax()] * 1e6),
        "master_mode_uA": float(dist.grid[dist.density.argmax()] * 1e6),
    }
    output.write_summary(os.path.join(out_dir, "summary.json"), cfg, "ensemble", summary)
    return summary


def cmd_sweep(cfg: RunConfig, out_dir: str, workers: int, axis: str, values: list[float]) -> dict:
    """Repeat simulate across a parameter axis with per-value derived seeds."""
    if axis not in ("rabi_MHz", "ramp_rate"):
        raise ConfigError("sweep axis must be rabi_MHz or ramp_rate")
    output.ensure_dir(out_dir)
    rows = []
    for k, value in enumerate(values):
        sub = with_seed(cfg, rng.derive_seed(cfg.master_seed, k))
        if axis == "rabi_MHz":
            sub.rabi_MHz, sub.I_uw_nA = value, None
        else:
            sub.ramp_rate_uA_per_s = value
        sub_dir = os.path.join(out_dir, f"{axis}_{output.fmt(value)}")
        summary = cmd_simulate(sub, sub_dir, workers)
        b = summary["branches"]
        rows.append(
            (
                value,
                b.get("mean_dwell_upper_ramps", float("nan")),
                b.get("mean_dwell_lower_ramps", float("nan")),
                b.get("jumps", 0),
                b.get("mean_current_upper_uA", float("nan")),
                b.get("mean_current_lower_uA", float("nan")),
            )
        )
    output.write_csv(
        os.path.join(out_dir, "sweep.csv"),
        cfg,
        "sweep",
        ("value", "mean_dwell_upper", "mean_dwell_lower", "jumps", "mean_Is_upper", "mean_Is_lower"),
        rows,
    )
    summary = {"axis": axis, "values": values}
    output.write_summary(os.path.join(out_dir, "summary.json"), cfg, "sweep", summary)
    return summary


def cmd_lz(cfg: RunConfig, out_dir: str) -> dict:
    """Landau-Zener report: crossing current, sweep rate, closed form vs
    numerically integrated crossing probability."""
    output.ensure_dir(out_dir)
    p, tls, d, ecfg = build_physics(cfg)
    if tls is None:
        raise ConfigError("lz needs tls.enabled = true")
    i_cross = resonance_current(p, tls.omega_tls, "g")
    v = sweep_rate(p, tls, d)
    p_lz = landau_zener_probability(tls.coupling, v)
    # the numerical crossing integration is only resolvable when the
    # exponent is moderate; deep in the adiabatic regime report the regime
    exponent = 2.0 * math.pi * (tls.coupling**2) * HBAR / v if v > 0 else float("inf")
    if 1e-6 < p_lz < 1.0 - 1e-6:
        p_numeric = crossing_survival_numeric(tls.coupling, v)
        regime = "intermediate"
    else:
        p_numeric = p_lz
        regime = "adiabatic regime" if p_lz < 0.5 else "diabatic regime"
    summary = {
        "crossing_current_uA": i_cross * 1e6,
        "sweep_rate_J_per_s": v,
        "lz_exponent": exponent,
        "p_lz_closed_form": p_lz,
        "p_lz_numeric": p_numeric,
        "regime": regime,
    }
    output.write_summary(os.path.join(out_dir, "summary.json"), cfg, "lz", summary)
    for key, val in summary.items():
        print(f"{key}: {output.fmt(val)}")
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jjswitch",
        description="Quantum-jump simulation of Josephson-junction switching currents",
    )
    ap.add_argument("--verbose", action="store_true", help="log applied defaults")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "telegraph sequence of consecutive ramps"),
        ("ensemble", "independent ramps vs the master equation"),
        ("sweep", "repeat simulate along a parameter axis"),
        ("lz", "Landau-Zener crossing report"),
    ):
        cp = sub.add_parser(name, help=help_text)
        cp.add_argument("--config", default=None, help="config file path")
        cp.add_argument("--seed", type=int, default=None, help="override master seed")
        cp.add_argument("--workers", type=int, default=1, help="worker processes")
        cp.add_argument("--out", default=None, help="output directory")
        cp.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="section.key=value",
            help="override a config key",
        )
        if name == "sweep":
            cp.add_argument("--axis", required=True, choices=("rabi_MHz", "ramp_rate"))
            cp.add_argument(
                "--values", required=True, help="comma-separated axis values"
            )
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.set)
        if args.seed is not None:
            cfg = with_seed(cfg, args.seed)
        out_dir = args.out if args.out is not None else cfg.directory
        if args.command == "simulate":
            cmd_simulate(cfg, out_dir, args.workers)
        elif args.command == "ensemble":
            cmd_ensemble(cfg, out_dir, args.workers)
        elif args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("--values must list at least one number")
            cmd_sweep(cfg, out_dir, args.workers, args.axis, values)
        elif args.command == "lz":
            cmd_lz(cfg, out_dir)
        return 0
    except ConfigError as exc:
        _report_error(exc)
        return 2
    except PhysicsDomainError as exc:
        _report_error(exc)
        return 3
    except ToleranceError as exc:
        _report_error(exc)
        return 4
    except JJSwitchError as exc:
        _report_error(exc)
        return 2


def _report_error(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
