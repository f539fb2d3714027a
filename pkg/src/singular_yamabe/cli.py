"""Command line: file-based runs, one manifest per run.

Exit codes: 0 success, 1 numerical failure, 2 bad input, 3 data not asymptotic
to a Fowler solution.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._io import write_json
from .balancing import SingularConfiguration, report_dict, residuals, solve_translations
from .errors import NoFowlerMatch, NumericalError, ParameterError
from .fitting import fit, read_samples_csv
from .fowler import compute_orbit
from .geometry import build_quadrature, setup
from .linearization import spectrum
from .model_solutions import (
    DeformedParams,
    DeformedSolution,
    deformed_field,
    homoclinic_field,
    sample_grid,
    write_samples_csv,
)
from .pohozaev import (
    Dilation,
    ParabolicInf,
    ParabolicZero,
    Rotation,
    closed_form,
    invariant_extrapolated,
)

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT, EXIT_NO_MATCH = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _eps(text: str):
    if text.strip().lower() == "eps0":
        return "eps0"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or 'eps0': {text!r}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _sweep(text: str):
    try:
        name, rng = text.split("=", 1)
        lo, hi, step = (float(x) for x in rng.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"sweep must look like name=start:stop:step, got {text!r}")
    if name != "eps":
        raise argparse.ArgumentTypeError(f"only eps can be swept, got {name!r}")
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("sweep needs step > 0 and stop >= start")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def _resolve_eps(eps, n: int) -> float:
    return setup(n).eps0 if eps == "eps0" else float(eps)


def _vector(values, n: int, name: str) -> np.ndarray:
    if values is None:
        return np.zeros(n)
    if len(values) != n:
        raise ParameterError(f"--{name} needs {n} components, got {len(values)}")
    return np.asarray(values, dtype=float)


# -- commands: each returns (payload files written, input files read) ---------------------


def _case_fowler(args, eps, out: Path, prefix: str):
    n = args.n
    orbit = compute_orbit(_resolve_eps(eps, n), n, args.tol)
    csv_path = out / f"{prefix}orbit.csv"
    orbit.to_csv(csv_path)
    summary = out / f"{prefix}summary.json"
    write_json(summary, {
        "n": n,
        "eps": orbit.eps,
        "period": orbit.period,
        "energy": orbit.energy,
        "v_max": orbit.v_max,
        "drift": orbit.drift,
    })
    return [csv_path, summary]


def _case_spectrum(args, eps, out: Path, prefix: str):
    rows = spectrum(_resolve_eps(eps, args.n), args.n, args.degrees)
    path = out / f"{prefix}spectrum.json"
    write_json(path, rows)
    return [path]


def _field(args, n: int):
    kind = args.field
    if kind == "dilation":
        return Dilation()
    b = _vector(args.b, n, "b") if args.b is not None else np.eye(n)[0]
    if kind == "parabolic_inf":
        return ParabolicInf(b)
    if kind == "parabolic_zero":
        return ParabolicZero(b)
    c = _vector(args.c, n, "c") if args.c is not None else np.eye(n)[1]
    return Rotation(b, c)


def _case_pohozaev(args, eps, out: Path, prefix: str):
    n = args.n
    p = DeformedParams(n, _resolve_eps(eps, n), _vector(args.a, n, "a"), args.T)
    X = _field(args, n)
    rule = build_quadrature(n, args.degree)
    est = invariant_extrapolated(DeformedSolution(p), X, args.etas, None, rule, n)
    cf = closed_form(X, p.eps, p.a, n)
    path = out / f"{prefix}pohozaev.json"
    write_json(path, {
        "field": X.describe(),
        "center": [0.0] * n,
        "eps": p.eps,
        "a": list(p.a),
        "T": p.T,
        "etas": list(est.etas),
        "values": list(est.values),
        "extrapolated": est.extrapolated,
        "uncertainty": est.uncertainty,
        "closed_form": cf,
        "abs_err": abs(est.extrapolated - cf),
    })
    return [path]


def cmd_fowler(args, out):
    return _run_cases(args, out, _case_fowler), []


def cmd_spectrum(args, out):
    return _run_cases(args, out, _case_spectrum), []


def cmd_pohozaev(args, out):
    return _run_cases(args, out, _case_pohozaev), []


def cmd_balance(args, out):
    cfg = SingularConfiguration.from_json(args.config)
    sol = None
    if args.solve:
        sol = solve_translations(cfg.points, cfg.necksizes, cfg.n)
        cfg = cfg.with_translations(sol.translations)
    elif cfg.translations is None:
        raise ParameterError("configuration has no translations; pass --solve to compute them")
    path = out / "balance.json"
    write_json(path, report_dict(cfg, residuals(cfg), sol))
    return [path], [Path(args.config)]


def cmd_fit(args, out):
    s = read_samples_csv(args.samples)
    res = fit(s)
    path = out / "fit.json"
    write_json(path, res.as_dict())
    return [path], [Path(args.samples)]


def cmd_sample(args, out):
    n = args.n
    rule = build_quadrature(n, args.degree)
    if args.dt <= 0 or args.t1 <= args.t0:
        raise ParameterError("need dt > 0 and t1 > t0")
    times = args.t0 + args.dt * np.arange(int(np.floor((args.t1 - args.t0) / args.dt + 1e-9)) + 1)
    if args.model == "homoclinic":
        fld = homoclinic_field(n, args.shift)
    else:
        fld = deformed_field(DeformedParams(n, _resolve_eps(args.eps, n), _vector(args.a, n, "a"), args.T))
    path = out / "samples.csv"
    write_samples_csv(path, times, rule, sample_grid(fld, times, rule))
    return [path], []


def _run_cases(args, out: Path, case):
    if not getattr(args, "sweep", None):
        return case(args, args.eps, out, "")
    values = args.sweep
    prefixes = [f"case{i:03d}_" for i in range(len(values))]

    def one(i):
        return case(args, values[i], out, prefixes[i])

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(one, range(len(values))))
    index = out / "index.json"
    write_json(index, [
        {"eps": v, "outputs": [p.name for p in files]} for v, files in zip(values, results)
    ])
    return [f for files in results for f in files] + [index]


# -- parser ------------------------------------------------------------------------------


def _common(p, eps=True, sweep=False):
    p.add_argument("--out", required=True, type=Path, help="output directory (created if missing)")
    p.add_argument("--n", type=int, default=3, help="dimension (default 3)")
    if eps:
        p.add_argument("--eps", type=_eps, default=0.5, help="necksize in (0, eps0], or 'eps0'")
    if sweep:
        p.add_argument("--sweep", type=_sweep, help="eps=start:stop:step, one output set per case")
        p.add_argument("--jobs", type=int, default=1, help="concurrent sweep cases")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="singular-yamabe", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fowler", help="one period of a Fowler orbit (CSV + summary)")
    _common(p, sweep=True)
    p.add_argument("--tol", type=float, default=1e-9, help="relative energy-drift tolerance")
    p.set_defaults(func=cmd_fowler)

    p = sub.add_parser("spectrum", help="indicial roots of the mode operators")
    _common(p, sweep=True)
    p.add_argument("--degrees", type=_ints, default=[0, 1, 2], help="harmonic degrees, e.g. 0,1,2")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("pohozaev", help="Pohozaev invariant of a deformed Fowler solution")
    _common(p, sweep=True)
    p.add_argument("--a", type=_floats, help="translation parameter, comma separated")
    p.add_argument("--T", type=float, default=0.0, help="phase")
    p.add_argument("--field", default="dilation",
                   choices=["dilation", "parabolic_inf", "rotation", "parabolic_zero"])
    p.add_argument("--b", type=_floats, help="field vector b (default e1)")
    p.add_argument("--c", type=_floats, help="second rotation vector (default e2)")
    p.add_argument("--etas", type=_floats, default=[0.2, 0.1, 0.05], help="sphere radii")
    p.add_argument("--degree", type=int, default=24, help="quadrature degree")
    p.set_defaults(func=cmd_pohozaev)

    p = sub.add_parser("balance", help="balancing residuals of a singular configuration")
    p.add_argument("config", help="configuration JSON {n, points, necksizes, translations?}")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--solve", action="store_true", help="solve for the translations first")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("fit", help="recover (eps, T, a) from a sample CSV")
    p.add_argument("samples", help="CSV with columns t,theta_1..theta_n,v")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="sample a model solution on a cylinder grid (CSV)")
    _common(p)
    p.add_argument("--model", default="deformed", choices=["deformed", "homoclinic"])
    p.add_argument("--a", type=_floats, help="translation parameter, comma separated")
    p.add_argument("--T", type=float, default=0.0, help="phase")
    p.add_argument("--shift", type=float, default=0.0, help="center of the homoclinic profile")
    p.add_argument("--t0", type=float, default=6.0)
    p.add_argument("--t1", type=float, default=16.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--degree", type=int, default=8, help="angular quadrature degree")
    p.set_defaults(func=cmd_sample)
    return ap


def _parameters(args) -> dict:
    skip = {"func", "out"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out: Path = args.out
    start = time.perf_counter()
    outputs, inputs, status, message = [], [], EXIT_OK, None
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        outputs, inputs = args.func(args, out)
    except NoFowlerMatch as exc:
        status, message = EXIT_NO_MATCH, str(exc)
    except (ParameterError, OSError) as exc:
        status, message = EXIT_INPUT, str(exc)
    except NumericalError as exc:
        status, message = EXIT_NUMERICAL, str(exc)
    if message:
        print(f"error: {message}", file=sys.stderr)
    write_json(out / "manifest.json", {
        "command": args.command,
        "parameters": _parameters(args),
        "version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [p.name for p in outputs],
        "exit_code": status,
        "error": message,
        "wall_time": time.perf_counter() - start,
    })
    return status


if __name__ == "__main__":
    sys.exit(main())
