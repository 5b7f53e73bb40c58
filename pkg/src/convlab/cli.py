"""Command-line front end.

Every subcommand writes into ``<out>/<subcommand>/`` (``--out`` or
``$CONVLAB_OUT``, default ``./convlab_out``), prints a one-line summary and
lists its files in ``manifest.txt``. Exit codes: 0 ok, 1 usage, 2 numeric
failure, 3 I/O.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import jelly_model as jm
from . import ode_euler, quad_trap, root_order, seq_golden
from .conv_harness import (ConvergenceSeries, abs_rel_error, field_error, fit_rate,
                           read_study_csv, write_csv, write_study_csv)
from .errors import ConvLabError, FitError, NumericError, UsageError
from .ib_core import read_geometry, write_geometry

SUBCOMMANDS = ("golden", "trapezoid", "euler", "secant", "jelly", "jelly-sweep", "report")
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


@dataclass
class StudyRequest:
    subcommand: str
    parameters: dict = field(default_factory=dict)
    output_dir: Path = Path("convlab_out")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_list(text: str, cast=float) -> list:
    """Comma list ``a,b,c`` or inclusive range ``start:step:stop``."""
    text = text.strip()
    if not text:
        raise UsageError("empty list")
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise UsageError(f"range {text!r} must be start:step:stop")
            start, step, stop = (cast(p) for p in parts)
            if step <= 0 or stop < start:
                raise UsageError(f"range {text!r} must have step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9))
            return [cast(start + k * step) for k in range(n + 1)]
        return [cast(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def _int_list(text):
    return parse_list(text, int)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="convlab", description="Convergence studies and a swimming-jellyfish IB model.")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--out", help="output root (default $CONVLAB_OUT or ./convlab_out)")
        return sp

    g = add("golden", "Fibonacci ratios converging to the golden ratio")
    g.add_argument("--n-max", type=int, default=40)

    t = add("trapezoid", "composite trapezoid convergence study")
    t.add_argument("--example", choices=sorted(quad_trap.BUILTIN), default="nonperiodic")
    t.add_argument("--n-list", help="N values; default depends on the example")
    t.add_argument("--reference-n", type=int, default=quad_trap.REFERENCE_N)

    e = add("euler", "forward Euler error and timing study")
    e.add_argument("--dt-list", help="time steps (default 13 log-spaced in [1e-5, 1e-2])")
    e.add_argument("--repeats", type=int, default=3)

    s = add("secant", "secant and Newton iterations with empirical order")
    s.add_argument("--function", choices=sorted(root_order.ROOT_PROBLEMS) + ["all"], default="all")
    s.add_argument("--tol", type=float, default=1e-14)
    s.add_argument("--max-iter", type=int, default=100)

    def jelly_flags(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--re", type=float)
        sp.add_argument("--cycles", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--output-every", type=int)
        sp.add_argument("--no-vtk", action="store_true", help="skip VTK snapshots")

    j = add("jelly", "one jellyfish simulation")
    jelly_flags(j)
    j.add_argument("--n", type=int)
    j.add_argument("--geometry", help="DIR/NAME prefix of .vertex/.spring/.beam/.target files")

    w = add("jelly-sweep", "jellyfish resolution sweep; the largest N is the reference")
    jelly_flags(w)
    w.add_argument("--n-list", default="32,64,128")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--timed", action="store_true", help="run members serially for clean timings")

    r = add("report", "fit every study.csv below a directory")
    r.add_argument("--dir", help="directory to scan (default: the output root)")
    return p


def parse_args(argv) -> StudyRequest:
    parser = _build_parser()
    if not argv:
        raise UsageError("missing subcommand; one of " + ", ".join(SUBCOMMANDS))
    ns = parser.parse_args(list(argv))
    if ns.subcommand is None:
        raise UsageError("missing subcommand; one of " + ", ".join(SUBCOMMANDS))
    root = Path(ns.out or os.environ.get("CONVLAB_OUT") or "convlab_out")
    params = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "out")}
    if "n_list" in params and params["n_list"] is not None:
        params["n_list"] = _int_list(params["n_list"])
    if params.get("dt_list") is not None:
        params["dt_list"] = parse_list(params["dt_list"], float)
    if ns.subcommand in ("jelly", "jelly-sweep"):
        params["config"] = _jelly_config(ns)
    if ns.subcommand == "jelly-sweep" and ns.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return StudyRequest(ns.subcommand, params, root / ns.subcommand)


def _jelly_config(ns) -> jm.SimConfig:
    over = dict(Re=ns.re, n_cycles=ns.cycles, dt=ns.dt, output_every=ns.output_every)
    if getattr(ns, "n", None) is not None:
        over["N"] = ns.n
    if ns.config:
        return jm.load_config(ns.config, **over)
    return jm.SimConfig(**{k: v for k, v in over.items() if v is not None})


# --- studies ----------------------------------------------------------------

def _fit_text(fit) -> str:
    return fit.report()


def _golden(req: StudyRequest) -> str:
    n_max = req.parameters["n_max"]
    s = seq_golden.golden_series(n_max)
    bounds = [seq_golden.geometric_bound(k) if k >= 2 else None for k in s.n_values]
    write_csv(req.output_dir / "golden.csv", ["k", "approximation", "error", "bound"],
              zip(s.n_values, s.approximations, s.errors, bounds))
    write_study_csv(ConvergenceSeries(list(s.n_values), list(s.errors), kind="terms"),
                    req.output_dir / "study.csv")
    need = seq_golden.terms_for_tolerance(1e-15)
    return (f"golden: n_max={n_max} final_error={s.errors[-1]:.3e} "
            f"terms_for_1e-15={need}")


def _default_n_list(example: str) -> list[int]:
    if example == "nonperiodic":
        return quad_trap.log_spaced(100, 100_000, 8)
    return list(range(2, 65))


def _trapezoid(req: StudyRequest) -> str:
    P = req.parameters
    f = quad_trap.BUILTIN[P["example"]]
    n_list = P["n_list"] or _default_n_list(P["example"])
    study = quad_trap.make_study(f, 0.0, 1.0, n_list, reference_n=P["reference_n"])
    series = quad_trap.trap_study(study, f)
    k_max = quad_trap.estimate_k(f, 0.0, 1.0)
    bounds = [quad_trap.trap_error_bound(k_max, 0.0, 1.0, n) for n in series.resolution]
    write_csv(req.output_dir / "trapezoid.csv",
              ["N", "approximation", "error", "bound", "parity"],
              zip(series.resolution, series.extra["approximation"], series.error, bounds,
                  series.extra["parity"]))
    write_study_csv(series, req.output_dir / "study.csv")
    (req.output_dir / "reference.txt").write_text(
        f"reference_n = {study.reference_n}\nreference = {study.reference_value!r}\n"
        f"k_max = {k_max!r}\n")
    try:
        fit = fit_rate(series)
    except FitError:
        return (f"trapezoid[{P['example']}]: reference={study.reference_value:.15f} "
                f"final_error={series.error[-1]:.3e} (at machine precision, no fit)")
    (req.output_dir / "fit.txt").write_text(_fit_text(fit))
    return (f"trapezoid[{P['example']}]: reference={study.reference_value:.15f} "
            f"slope={fit.slope:.6f}")


def _euler(req: StudyRequest) -> str:
    P = req.parameters
    dts = P["dt_list"] or list(np.logspace(-5, -2, 13))
    series = ode_euler.euler_timing_study(ode_euler.paper_problem(), dts, repeats=P["repeats"])
    write_study_csv(series, req.output_dir / "study.csv")
    fit = fit_rate(series)
    tser = ConvergenceSeries(series.resolution, series.wall_time, kind="dt",
                             decreases_with="smaller")
    tfit = fit_rate(tser, floor=0.0)
    (req.output_dir / "fit.txt").write_text("# error vs dt\n" + _fit_text(fit)
                                            + "# wall time vs dt\n" + _fit_text(tfit))
    return f"euler: order={fit.slope:.4f} timing_slope={tfit.slope:.3f}"


def _secant(req: StudyRequest) -> str:
    P = req.parameters
    names = sorted(root_order.ROOT_PROBLEMS) if P["function"] == "all" else [P["function"]]
    rows, orders, parts = [], [], []
    for name in names:
        prob = root_order.ROOT_PROBLEMS[name]
        runs = {
            "secant": root_order.secant(prob.f, *prob.secant_start, tol=P["tol"],
                                        max_iter=P["max_iter"]),
            "newton": root_order.newton(prob.f, prob.fprime, prob.newton_start, tol=P["tol"],
                                        max_iter=P["max_iter"]),
        }
        for method, run in runs.items():
            for i, (x, r) in enumerate(zip(run.iterates, run.residuals)):
                rows.append((name, method, i, x, r, abs(x - prob.root)))
            order = root_order.empirical_order(run, prob.root)
            orders.append((name, method, order, run.converged, len(run.iterates)))
            parts.append(f"{name}:{method}={order:.3f}")
    write_csv(req.output_dir / "iterates.csv",
              ["function", "method", "iteration", "x", "residual", "error"], rows)
    write_csv(req.output_dir / "orders.csv",
              ["function", "method", "order", "converged", "iterates"], orders)
    return "secant: " + " ".join(parts)


def _load_bell(spec: str) -> jm.BellMesh:
    d, name = os.path.split(spec)
    return jm.bell_from_mesh(read_geometry(d or ".", name))


def _jelly(req: StudyRequest) -> str:
    P = req.parameters
    cfg = P["config"].replace(output_dir=str(req.output_dir))
    bell = _load_bell(P["geometry"]) if P.get("geometry") else jm.build_bell(cfg)
    write_geometry(bell.mesh, req.output_dir / "geometry", "jelly")
    rec = jm.run_simulation(cfg, bell, write_vtk=not P["no_vtk"], keep_snapshots=False)
    jm.write_outputs(rec, cfg, req.output_dir)
    try:
        speed = f"{jm.swim_speed(rec):.6f}"
    except UsageError:
        speed = "undefined"
    return (f"jelly: N={cfg.N} Re={cfg.Re:g} displacement={rec.displacement():.6f} "
            f"speed={speed} wall_time={rec.wall_time:.2f}s")


def _sweep_member(args):
    cfg, write_vtk = args
    rec = jm.run_simulation(cfg, write_vtk=write_vtk)
    jm.write_outputs(rec, cfg, cfg.output_dir)
    t1 = 1.0 / cfg.f
    snap = None
    try:
        s = jm.snapshot_at(rec, t1)
        snap = s.v
    except UsageError:
        pass
    rec.snapshots = []  # only the first-contraction field travels back
    return rec, snap


def sweep_rows(records: dict, snaps: dict, L: float):
    """Per-N metrics against the finest member."""
    Ns = sorted(records)
    ref = Ns[-1]
    fine = records[ref]
    m_ref = jm.swim_speed(fine)
    rows = []
    for N in Ns:
        rec = records[N]
        m = jm.swim_speed(rec)
        th = jm.thrust_error(rec, fine)
        l1 = l2 = None
        if snaps.get(N) is not None and snaps.get(ref) is not None and ref % N == 0:
            l1 = field_error(snaps[ref], snaps[N], p=1, h_coarse=L / N)
            l2 = field_error(snaps[ref], snaps[N], p=2, h_coarse=L / N)
        rows.append((N, rec.displacement(), m, abs_rel_error(m_ref, m)[0],
                     th.last_cycle_absolute, th.last_cycle_relative, l1, l2,
                     rec.x_drift(), rec.wall_time))
    return rows


SWEEP_HEADER = ["N", "displacement", "swim_speed", "speed_error", "thrust_abs_error",
                "thrust_rel_error", "L1_v_error", "L2_v_error", "apex_x_drift",
                "wall_time_seconds"]


def _jelly_sweep(req: StudyRequest) -> str:
    P = req.parameters
    base = P["config"]
    Ns = sorted(set(P["n_list"]))
    if len(Ns) < 2:
        raise UsageError("a sweep needs at least two resolutions")
    cfgs = [base.replace(N=N, output_dir=str(req.output_dir / f"N{N:04d}")) for N in Ns]
    tasks = [(c, not P["no_vtk"]) for c in cfgs]
    if P["timed"] or P["jobs"] == 1:
        results = [_sweep_member(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=P["jobs"]) as ex:
            results = list(ex.map(_sweep_member, tasks))
    records = {N: r for N, (r, _) in zip(Ns, results)}
    snaps = {N: s for N, (_, s) in zip(Ns, results)}
    rows = sweep_rows(records, snaps, base.L)
    write_csv(req.output_dir / "sweep.csv", SWEEP_HEADER, rows)
    write_study_csv(ConvergenceSeries(Ns[:-1], [r[3] for r in rows[:-1]],
                                      [r[-1] for r in rows[:-1]]),
                    req.output_dir / "study.csv")
    disp = " ".join(f"{N}:{r[1]:.4f}" for N, r in zip(Ns, rows))
    return f"jelly-sweep: Re={base.Re:g} displacement {disp}"


def _report(req: StudyRequest) -> str:
    root = Path(req.parameters.get("dir") or req.output_dir.parent)
    if not root.is_dir():
        raise FileNotFoundError(f"no such directory: {root}")
    lines = []
    for path in sorted(root.rglob("study.csv")):
        kind = "dt" if path.parent.name == "euler" else "N"
        dec = "smaller" if kind == "dt" else "larger"
        try:
            fit = fit_rate(read_study_csv(path, kind=kind, decreases_with=dec))
            lines.append(f"{path}: slope={fit.slope:.6f} window={fit.window} "
                         f"floored={fit.excluded_floor_points}")
        except (FitError, UsageError) as e:
            lines.append(f"{path}: no fit ({e})")
    text = "\n".join(lines) + ("\n" if lines else "")
    req.output_dir.mkdir(parents=True, exist_ok=True)
    (req.output_dir / "report.txt").write_text(text)
    print(text, end="")
    return f"report: {len(lines)} studies under {root}"


RUNNERS = {"golden": _golden, "trapezoid": _trapezoid, "euler": _euler, "secant": _secant,
           "jelly": _jelly, "jelly-sweep": _jelly_sweep, "report": _report}


def write_manifest(directory) -> Path:
    """List every file under ``directory`` with its size in bytes."""
    d = Path(directory)
    files = sorted(p for p in d.rglob("*") if p.is_file() and p.name != "manifest.txt")
    out = d / "manifest.txt"
    with open(out, "w") as fh:
        for p in files:
            fh.write(f"{p.stat().st_size} {p.relative_to(d).as_posix()}\n")
    return out


def run_study(req: StudyRequest) -> int:
    if req.subcommand not in RUNNERS:
        raise UsageError(f"unknown subcommand {req.subcommand!r}")
    req.output_dir.mkdir(parents=True, exist_ok=True)
    summary = RUNNERS[req.subcommand](req)
    write_manifest(req.output_dir)
    print(summary)
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if any(a in ("-h", "--help") for a in argv):
        try:
            _build_parser().parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)
    try:
        return run_study(parse_args(argv))
    except UsageError as e:
        print(f"convlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, ZeroDivisionError, FloatingPointError) as e:
        print(f"convlab: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"convlab: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ConvLabError as e:
        print(f"convlab: error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
