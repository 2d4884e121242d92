"""Command-line entry point: ``gasketvar {mesh,verify,solve,sweep,lambda-star}``.

Exit codes: 0 success, 2 hypothesis failure, 3 numerical failure,
4 configuration or parse error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.io

from . import verify as suites
from .embedding import InadmissibleBranch
from .energy import assemble
from .expr import ExprError
from .gasket import GasketError, build_level, to_json_dict
from .problem import INADMISSIBLE, ConfigError, HypothesisFailure, ProblemSpec, admissibility, check_alpha
from .solver import RESIDUAL_TOL, SolverError, two_solutions

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

log = logging.getLogger("gasketvar")


@dataclass
class RunConfig:
    command: str
    config: str | None
    out: Path
    seed: int
    level: int | None
    tol_residual: float
    jobs: int


# -- output formatting -----------------------------------------------------------


def fmt_json_float(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def dumps(obj, indent=2, _level=0):
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_json_float(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    return json.dumps(str(obj))


def fmt9(x):
    if x is None:
        return "-"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".9g")


def write_json(path, obj):
    path.write_text(dumps(obj) + "\n")


def table(rows, headers):
    cells = [[h for h in headers]] + [[fmt9(r[h]) if not isinstance(r[h], str) else r[h] for h in headers] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


# -- configuration -----------------------------------------------------------------


def bundled_configs():
    return sorted(p.name for p in resources.files("gasketvar").joinpath("configs").iterdir() if p.name.endswith(".json"))


def load_config(name):
    path = Path(name)
    if path.exists():
        text = path.read_text()
    else:
        res = resources.files("gasketvar").joinpath("configs", name)
        if not res.is_file():
            raise ConfigError(f"config {name!r} not found (bundled: {', '.join(bundled_configs())})")
        text = res.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{name}: invalid JSON ({err})") from err
    if not isinstance(cfg, dict):
        raise ConfigError(f"{name}: top level must be an object")
    return cfg


def load_spec(run, cfg=None):
    cfg = load_config(run.config) if cfg is None else cfg
    return ProblemSpec.from_dict(cfg, m=run.level), cfg


# -- subcommands ----------------------------------------------------------------------


def cmd_mesh(run, args):
    m = 0 if run.level is None else run.level
    level = build_level(args.N, m)
    run.out.mkdir(parents=True, exist_ok=True)
    stem = f"N{args.N}-m{m}"
    path = run.out / f"mesh-{stem}.json"
    write_json(path, to_json_dict(level))
    if args.matrices:
        form = assemble(level)
        scipy.io.mmwrite(run.out / f"A-{stem}.mtx", form.A.tocoo(), symmetry="symmetric", precision=17)
        scipy.io.mmwrite(run.out / f"M-{stem}.mtx", form.M.tocoo(), symmetry="symmetric", precision=17)
    print(f"vertices {level.n_vertices}  edges {level.edges.shape[0]}  cells {level.cells.shape[0]}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(run, args):
    m = 4 if run.level is None else run.level
    rows = suites.constants_table(sorted(set(args.N)))
    print(table(rows, ["N", "sigma", "morrey_constant", "kappa"]))
    print()
    report = {"constants": rows, "level": m, "trials": args.trials, "seed": run.seed,
              "fault_renormalization": args.fault_renormalization, "suites": []}
    ok = True
    for N in sorted(set(args.N)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # reported below
            results = suites.run_all(N, m, args.trials, run.seed, fault_factor=args.fault_renormalization)
        for res in results:
            ok &= res.passed
            d = res.to_dict()
            d["N"] = N
            report["suites"].append(d)
            status = "PASS" if res.passed else "FAIL"
            print(f"[{status}] N={N} m={m} {res.name}: {res.violations} violations in {res.trials} trials, "
                  f"worst ratio {fmt9(res.worst)}")
            for w in res.warnings:
                print(f"  warning: {w}")
    report["passed"] = ok
    if args.out_given:
        run.out.mkdir(parents=True, exist_ok=True)
        write_json(run.out / "verify.json", report)
    return EXIT_OK if ok else EXIT_NUMERICAL


def _write_solution_csv(path, sol, level):
    X = level.coords
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + [f"x{i + 1}" for i in range(X.shape[1])] + ["u"])
        for i in range(level.n_vertices):
            w.writerow([i] + [fmt_json_float(c) for c in X[i]] + [fmt_json_float(sol.values[i])])


def _hypothesis_abort(run, err, cfg):
    names = ", ".join(c.name for c in err.report.failures) if err.report is not None else "?"
    print(f"hypothesis failure: {names}", file=sys.stderr)
    if err.report is not None:
        for c in err.report.failures:
            print(f"  {c.name}: {c.detail}", file=sys.stderr)
        run.out.mkdir(parents=True, exist_ok=True)
        write_json(run.out / "report.json", {"status": "hypothesis-failure", "violated": names,
                                              "config": cfg, "admissibility": err.report.to_dict()})
    return EXIT_HYPOTHESIS


def cmd_solve(run, args):
    spec, cfg = load_spec(run)
    try:
        report = two_solutions(spec, tol=run.tol_residual, deflation_sweep=args.deflation, seed=run.seed,
                               n_starts=args.starts)
    except HypothesisFailure as err:
        return _hypothesis_abort(run, err, cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    out = {"config": cfg, "level": spec.m, "seed": run.seed, "tol_residual": run.tol_residual}
    out.update(report.to_dict())
    good = (len(report.solutions) >= 2 and all(s.residual < run.tol_residual for s in report.solutions)
            and report.distinctness is not None and report.distinctness > args.distinct_tol)
    out["exit_ok"] = good
    write_json(run.out / "report.json", out)
    rows = []
    for k, sol in enumerate(report.solutions, 1):
        _write_solution_csv(run.out / f"solution-{k}.csv", sol, spec.level)
        d = sol.to_dict()
        rows.append({"solution": k, "method": d["method"], "J": d["J"], "norm_alpha": d["norm_alpha"],
                     "sup_norm": d["sup_norm"], "residual": d["residual"], "in_ball": str(d["in_ball"])})
    print(f"lambda {fmt9(spec.lam)}  rho {fmt9(spec.rho)}  kappa {fmt9(report.kappa)}  "
          f"lambda_bound {fmt9(report.lambda_bound)}  status {report.status}")
    print(table(rows, ["solution", "method", "J", "norm_alpha", "sup_norm", "residual", "in_ball"]))
    print(f"distinctness {fmt9(report.distinctness)}")
    for msg in report.messages:
        print(f"warning: {msg}")
    return EXIT_OK if good else EXIT_NUMERICAL


def _sweep_one(payload):
    cfg, lam, level, tol, seed, deflation = payload
    cfg = dict(cfg, **{"lambda": lam})
    spec = ProblemSpec.from_dict(cfg, m=level)
    row = {"lambda": lam, "status": "ok", "n_solutions": 0, "J": [], "norm_alpha": [], "sup_norm": []}
    try:
        rep = two_solutions(spec, tol=tol, deflation_sweep=deflation, seed=seed, with_lambda_star=False)
    except HypothesisFailure as err:
        row["status"] = f"hypothesis-failure: {', '.join(c.name for c in err.report.failures)}"
        return row
    except SolverError as err:
        row["status"] = f"numerical-failure: {type(err).__name__}"
        return row
    row["status"] = rep.status
    row["n_solutions"] = len(rep.solutions)
    row["J"] = [s.J for s in rep.solutions]
    row["norm_alpha"] = [s.norm_alpha for s in rep.solutions]
    row["sup_norm"] = [float(np.max(np.abs(s.values))) for s in rep.solutions]
    return row


def parse_grid(text):
    """'a,b,c' or 'start:stop:num' (geometric when prefixed with 'log:')."""
    try:
        if text.startswith("log:") or text.count(":") == 2:
            geometric = text.startswith("log:")
            a, b, n = text.removeprefix("log:").split(":")
            a, b, n = float(a), float(b), int(n)
            grid = np.geomspace(a, b, n) if geometric else np.linspace(a, b, n)
            return [float(x) for x in grid]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as err:
        raise ConfigError(f"bad lambda grid {text!r}: {err}") from err


def cmd_sweep(run, args):
    spec, cfg = load_spec(run)  # validates the config once up front
    lams = parse_grid(args.lambdas)
    if not lams or any(not x > 0 for x in lams):
        raise ConfigError("lambda grid must contain positive values")
    payloads = [(cfg, lam, run.level, run.tol_residual, run.seed, args.deflation) for lam in lams]
    if run.jobs > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    else:
        rows = [_sweep_one(p) for p in payloads]
    rows.sort(key=lambda r: r["lambda"])
    width = max([2] + [r["n_solutions"] for r in rows])
    run.out.mkdir(parents=True, exist_ok=True)
    path = run.out / "sweep.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["lambda", "n_solutions"]
        head += [f"J{k}" for k in range(1, width + 1)] + [f"norm_alpha{k}" for k in range(1, width + 1)]
        head += [f"sup{k}" for k in range(1, width + 1)] + ["status"]
        w.writerow(head)
        for r in rows:
            def cols(key):
                vals = [fmt_json_float(v) for v in r[key]]
                return vals + [""] * (width - len(vals))
            w.writerow([fmt_json_float(r["lambda"]), r["n_solutions"]] + cols("J") + cols("norm_alpha")
                       + cols("sup_norm") + [r["status"]])
    print(table([{"lambda": r["lambda"], "n": r["n_solutions"], "status": r["status"]} for r in rows],
                ["lambda", "n", "status"]))
    print(f"wrote {path}")
    return EXIT_OK if all(r["status"].startswith("ok") for r in rows) else EXIT_NUMERICAL


def cmd_lambda_star(run, args):
    spec, cfg = load_spec(run)
    if check_alpha(spec.alpha) == INADMISSIBLE:
        report = admissibility(spec, with_lambda_star=False)
        return _hypothesis_abort(run, HypothesisFailure("alpha", report), cfg)
    report = admissibility(spec, with_lambda_star=True)
    ls = report.lambda_star
    value = math.inf if ls.unbounded else ls.value
    print(f"lambda_star {fmt9(value)}")
    print(f"kappa       {fmt9(report.kappa)}")
    print(f"z_max       {fmt9(ls.z)}")
    print(f"branch      {report.branch}")
    if not report.passed:
        print("warning: hypotheses failing: " + ", ".join(c.name for c in report.failures))
    run.out.mkdir(parents=True, exist_ok=True)
    write_json(run.out / "lambda_star.json", {
        "lambda_star": float(format(value, ".9g")) if math.isfinite(value) else None,
        "kappa": float(format(report.kappa, ".9g")),
        "z": float(format(ls.z, ".9g")) if ls.z is not None else None,
        "unbounded": ls.unbounded,
        "branch": report.branch,
        "alpha_l1": report.alpha_l1,
    })
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--level", type=int, default=None, help="gasket level m (overrides the config)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol-residual", type=float, default=RESIDUAL_TOL)
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--out", default=None, help="output directory (created if missing)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gasketvar", description="Semilinear problems on Sierpinski gaskets.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mesh", parents=[common], help="export a level V_m as JSON")
    s.add_argument("--N", type=int, default=3)
    s.add_argument("--matrices", action="store_true", help="also write A and M in Matrix Market format")

    s = sub.add_parser("verify", parents=[common], help="constants table and randomized invariant suites")
    s.add_argument("--N", type=int, action="append", default=None, help="repeatable; default 3")
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--fault-renormalization", type=float, default=None, metavar="BASE",
                   help="mutation test: use BASE^m instead of ((N+2)/N)^m")

    for name, hlp in (("solve", "two-solution pipeline"), ("sweep", "solve over a lambda grid"),
                      ("lambda-star", "maximal certified lambda")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("config", help="problem JSON (path or bundled name, e.g. model-n3.json)")
        if name in ("solve", "sweep"):
            s.add_argument("--deflation", action="store_true", help="search for further solutions by deflation")
        if name == "solve":
            s.add_argument("--starts", type=int, default=32, help="random starts for the deflated search")
            s.add_argument("--distinct-tol", type=float, default=1e-3)
        if name == "sweep":
            s.add_argument("--lambdas", required=True, help="'a,b,c', 'start:stop:num' or 'log:start:stop:num'")
    return p


COMMANDS = {"mesh": cmd_mesh, "verify": cmd_verify, "solve": cmd_solve, "sweep": cmd_sweep,
            "lambda-star": cmd_lambda_star}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "N", None) is None and args.command == "verify":
        args.N = [3]
    args.out_given = args.out is not None
    run = RunConfig(args.command, getattr(args, "config", None), Path(args.out or "gasketvar-out"), args.seed,
                    args.level, args.tol_residual, max(1, args.jobs))
    try:
        return COMMANDS[args.command](run, args)
    except (ConfigError, ExprError, GasketError, InadmissibleBranch) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisFailure as err:
        return _hypothesis_abort(run, err, getattr(err, "config", None))
    except SolverError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
