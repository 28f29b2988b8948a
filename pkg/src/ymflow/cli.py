"""Command-line driver: ``ymflow {run,compare-alpha,deturck-verify,monitor}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import deturck, io, monitor
from .config import ConfigError, load_config
from .flow import FlowParams, NonFinite, StepCollapse, run_flow
from .lattice import Lattice, cold_start, hot_start, instanton, thooft_field

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COLLAPSE = 2
EXIT_NONFINITE = 3
EXIT_WINDOW = 4

log = logging.getLogger("ymflow")


def _threads(args):
    n = args.threads
    if n is None and os.environ.get("YMFLOW_THREADS"):
        n = int(os.environ["YMFLOW_THREADS"])
    if n is not None:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _out(args, rel):
    return Path(args.out or ".") / rel


def _lattice(cfg):
    return Lattice(tuple(cfg.lattice.dims), cfg.lattice.spacing)


def initial_field(cfg, seed):
    lat = _lattice(cfg)
    kind, p = cfg.initial.kind, cfg.initial.params
    if kind == "cold":
        return cold_start(lat)
    if kind == "hot":
        return hot_start(lat, seed, p["magnitude"])
    if kind == "file":
        U, _, _ = io.read_snapshot(p["path"])
        if U.lattice != lat:
            raise ConfigError(f"snapshot {p['path']} does not match the configured lattice")
        return U
    a = lat.spacing
    center = None if p["center"] is None else np.asarray(p["center"], dtype=float) * a
    if p["second_scale"] is None:
        return instanton(lat, center=center, scale=p["scale"], anti=p["anti"])
    if center is None or p["second_center"] is None or p["scale"] is None:
        raise ConfigError("a two-instanton start needs scale, center and second_center")
    centers = [center, np.asarray(p["second_center"], dtype=float) * a]
    return thooft_field(lat, centers, [p["scale"], p["second_scale"]], anti=p["anti"])


def _monitor_report(cfg, series):
    """Phi / monotonicity / epsilon output as a JSON-ready dict."""
    report = {"alpha": series.alpha}
    mon = cfg.monitors
    lat = series.lattice
    if mon.phi.enabled:
        x0 = mon.phi.x0 or [n // 2 for n in lat.dims]
        t0 = mon.phi.t0 if mon.phi.t0 is not None else float(series.times[-1])
        cutoff = mon.phi.cutoff_radius or 3.0 * float(min(lat.extent)) / 8.0
        phis = [monitor.phi_alpha(series, x0, t0, R, cutoff) for R in mon.phi.radii]
        report["phi"] = [{"R": p.R, "value": p.value, "quality": p.quality} for p in phis]
        if len(mon.phi.radii) > 1:
            report["monotonicity"] = monitor.check_monotonicity(
                series, x0, t0, mon.phi.radii, cutoff).as_dict()
    if mon.epsilon.enabled:
        conc = monitor.epsilon_detector(series, mon.epsilon.R, mon.epsilon.epsilon0)
        report.update(conc.as_dict())
    return report


def cmd_run(cfg, args):
    U0 = initial_field(cfg, cfg.seed)
    f = cfg.flow
    p = FlowParams(f.alpha, f.dt, f.t_end, f.integrator, f.adaptive, f.tol, f.record_every)
    snap_dir = _out(args, cfg.output.snapshot_dir)
    every = cfg.monitors.snapshots_every
    state = {"n": 0, "snaps": 0, "last": None}
    fields, times = [], []
    monitors_on = cfg.monitors.phi.enabled or cfg.monitors.epsilon.enabled
    trace_path = _out(args, cfg.output.trace_path)
    if trace_path.exists():
        trace_path.unlink()
    with io.TraceWriter(trace_path) as writer:
        def on_record(rec, U):
            writer.write(rec)
            state["last"] = (rec.t, U)
            if every and state["n"] % every == 0:
                snap_dir.mkdir(parents=True, exist_ok=True)
                io.write_snapshot(snap_dir / io.snapshot_name(state["snaps"]), U, rec.t, f.alpha)
                state["snaps"] += 1
                if monitors_on:
                    fields.append(U)
                    times.append(rec.t)
            state["n"] += 1

        try:
            run_flow(U0, p, callback=on_record)
        except StepCollapse as exc:
            snap_dir.mkdir(parents=True, exist_ok=True)
            io.write_snapshot(snap_dir / "collapse.ymaf", exc.field, exc.t, f.alpha)
            print(f"step collapse: {exc}", file=sys.stderr)
            return EXIT_COLLAPSE
        except NonFinite as exc:
            print(f"non-finite: {exc}", file=sys.stderr)
            return EXIT_NONFINITE
    if monitors_on and fields:
        series = monitor.SnapshotSeries.from_fields(fields, times, f.alpha)
        try:
            report = _monitor_report(cfg, series)
        except monitor.WindowNotCovered as exc:
            print(f"window not covered: {exc}", file=sys.stderr)
            return EXIT_WINDOW
        _write_json(_out(args, cfg.output.report_path), report)
    return EXIT_OK


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def cmd_compare_alpha(cfg, args):
    f = cfg.flow
    if not f.alphas:
        raise ConfigError("compare-alpha needs flow.alphas")
    U0 = initial_field(cfg, cfg.seed)
    res = monitor.alpha_continuation(U0, f.alphas, f.critical_tol, max_steps=f.max_steps)
    rows = [e.row() for e in res.entries]
    io.write_alpha_table(_out(args, cfg.output.table_path), rows)
    summary = {"verdict": res.verdict, "density_steps": res.density_steps, "ym_residual": res.ym_residual}
    _write_json(_out(args, cfg.output.report_path), summary)
    print(f"verdict: {res.verdict}")
    return EXIT_OK


def _deturck_initial(kind, lat, seed, magnitude):
    if kind == "zero":
        return deturck.ConnectionField(lat, np.zeros(lat.dims + (4, 3)))
    if kind == "abelian":
        return deturck.abelian_mode(lat, magnitude, k=1, mu=0, along=0)
    return deturck.smooth_connection(lat, seed, magnitude)


def deturck_refinement(dims, spacing, kind, magnitude, alpha, dt, t_end, seed=0):
    """Equivalence norms at ``(a, dt)`` and ``(a/2, dt/2)`` on the same box."""
    norms = []
    for level in range(2):
        lat = Lattice(tuple(n * 2**level for n in dims), spacing / 2**level)
        a0 = _deturck_initial(kind, lat, seed, magnitude)
        d, m, S = deturck.evolve_pair(a0, alpha, dt / 2**level, t_end)
        norms.append(deturck.check_equivalence(d, m, S))
    return norms


def cmd_deturck_verify(cfg, args):
    d = cfg.deturck
    norms = deturck_refinement(cfg.lattice.dims, cfg.lattice.spacing, d.kind, d.magnitude,
                               d.alpha, d.dt, d.t_end, cfg.seed)
    ratio = norms[0] / norms[1] if norms[1] > 0 else (1.0 if norms[0] == 0 else float("inf"))
    print(f"equivalence norm coarse: {norms[0]:.6e}")
    print(f"equivalence norm fine:   {norms[1]:.6e}")
    print(f"refinement ratio:        {ratio:.4f}")
    _write_json(_out(args, cfg.output.report_path), {"norms": norms, "ratio": ratio})
    if norms[0] == 0.0 and norms[1] == 0.0:
        return EXIT_OK
    lo, hi = d.band
    return EXIT_OK if lo <= ratio <= hi else EXIT_COLLAPSE


def cmd_monitor(cfg, args):
    items = io.read_series(_out(args, cfg.output.snapshot_dir))
    fields = [U for U, _, _ in items]
    times = [t for _, t, _ in items]
    alpha = items[0][2]
    series = monitor.SnapshotSeries.from_fields(fields, times, alpha)
    try:
        report = _monitor_report(cfg, series)
    except monitor.WindowNotCovered as exc:
        print(f"window not covered: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    _write_json(_out(args, cfg.output.report_path), report)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare-alpha": cmd_compare_alpha,
    "deturck-verify": cmd_deturck_verify,
    "monitor": cmd_monitor,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="ymflow", description="Yang-Mills alpha-flow on a 4-torus")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="fallback: YMFLOW_THREADS")
        p.add_argument("--out", type=Path, default=None, help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    _threads(args)
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
