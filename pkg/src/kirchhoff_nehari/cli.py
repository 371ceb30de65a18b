"""Command line front end: validate, fiber, thresholds, solve, sweep.

Exit codes: 0 success, 1 config or validation error, 2 partial solve,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .energy import ZeroFunctionError, fibering_profile, tabulate
from .fibering import (BracketError, SobolevNonConvergence, cached_sobolev_constant,
                       fiber_roots, thresholds)
from .nehari_solver import SolveReport, initial_shape, solve
from .params import InadmissibleParams, validate
from .space import random_bump, random_shape

logger = logging.getLogger("kirchhoff_nehari")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_NUMERIC = 0, 1, 2, 3
SHAPES = ("sine_bump", "random_bump", "random_shape")
FIBER_COLUMNS = ("t", "psi", "psi1", "psi2", "sigma", "sigma1", "Tu")
SWEEP_COLUMNS = ("lambda", "J_plus", "J_minus", "converged_plus", "converged_minus",
                 "Pp_plus", "Pp_minus", "error")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _outdir(cfg: RunConfig, args) -> Path:
    out = Path(args.out if args.out is not None else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be an unsigned integer")
        cfg.with_seed(args.seed)
    if getattr(args, "lam", None) is not None:
        cfg.params = cfg.params.with_lambda(args.lam)
    return cfg


def _thresholds(cfg: RunConfig, params, mesh):
    est = cached_sobolev_constant(mesh, params.p, params.N, params.pstar,
                                  restarts=cfg.solver.sobolev_restarts, seed=cfg.seed)
    return thresholds(params, est.S, mesh.volume, est.provenance)


# -- subcommands -------------------------------------------------------------

def cmd_validate(args) -> int:
    cfg = _load(args)
    rep = validate(cfg.params)
    for line in rep.lines():
        print(line)
    print("admissible" if rep.admissible else "NOT admissible")
    return EXIT_OK if rep.admissible else EXIT_CONFIG


def cmd_fiber(args) -> int:
    cfg = _load(args)
    rep = validate(cfg.params)
    if not rep.admissible and not args.allow_inadmissible:
        for line in rep.lines():
            print(line, file=sys.stderr)
        return EXIT_CONFIG
    params = cfg.params
    mesh = cfg.build_mesh()
    w = cfg.build_weight(mesh)
    if params.lam is None:
        if not rep.admissible:
            raise ConfigError("inadmissible parameters need an explicit lambda")
        params = params.with_lambda(0.5 * _thresholds(cfg, params, mesh).Lambda3)

    shape = args.shape or cfg.fiber["shape"]
    rng = np.random.default_rng(cfg.seed)
    if shape == "sine_bump":
        u = initial_shape(mesh, w, params)
    elif shape == "random_bump":
        u = random_bump(mesh, rng)
    elif shape == "random_shape":
        u = random_shape(mesh, rng)
    else:
        raise ConfigError(f"unknown shape {shape!r}; choose from {', '.join(SHAPES)}")

    f = cfg.fiber
    t_min = args.t_min if args.t_min is not None else f["t_min"]
    t_max = args.t_max if args.t_max is not None else f["t_max"]
    steps = args.t_steps if args.t_steps is not None else f["steps"]
    if not (0 < t_min < t_max) or steps < 2:
        raise ConfigError("t grid needs 0 < t_min < t_max and at least 2 steps")

    prof = fibering_profile(u, params, w)
    grid = np.geomspace(t_min, t_max, int(steps))
    tab = tabulate(prof, grid, params, args.problem, params.lam)
    out = _outdir(cfg, args)
    write_csv(out / "fiber.csv", FIBER_COLUMNS, zip(*(tab[c] for c in FIBER_COLUMNS)))

    roots = fiber_roots(prof, params, params.lam, args.problem)
    if roots is None:
        write_csv(out / "fiber_roots.csv", ("name",) + FIBER_COLUMNS, [])
        print(f"lambda={params.lam:.17g} t1=none t_max=none t2=none")
        return EXIT_OK
    names = ("t1", "t_max", "t2")
    rt = tabulate(prof, np.array(roots), params, args.problem, params.lam)
    rows = [(n,) + tuple(rt[c][i] for c in FIBER_COLUMNS) for i, n in enumerate(names)]
    write_csv(out / "fiber_roots.csv", ("name",) + FIBER_COLUMNS, rows)
    print(f"lambda={params.lam:.17g} I_singular={prof.I_singular:.17g} "
          + " ".join(f"{n}={v:.17g}" for n, v in zip(names, roots)))
    return EXIT_OK


def cmd_thresholds(args) -> int:
    cfg = _load(args)
    mesh = cfg.build_mesh()
    thr = _thresholds(cfg, cfg.params, mesh)
    out = _outdir(cfg, args)
    write_json(out / "thresholds.json", {"params": cfg.params.as_dict(), "thresholds": thr.to_dict()})
    for k in ("S", "Lambda1", "Lambda2", "Lambda3", "D1", "D2"):
        print(f"{k} = {getattr(thr, k):.17g}")
    return EXIT_OK


def _export(rep: SolveReport, out: Path) -> None:
    write_json(out / "report.json", rep.to_dict())
    for name, pt in (("u_plus", rep.u_plus), ("v_minus", rep.v_minus)):
        path = out / f"{name}.csv"
        if pt is not None:
            pt.w.to_csv(path)
        elif path.exists():
            path.unlink()
    cols = ("iter", "branch", "energy", "residual", "scale_t", "start")
    write_csv(out / "history.csv", cols, ([row[c] for c in cols] for row in rep.history))
    # wall time varies run to run, so it stays out of the reproducible report
    write_json(out / "timing.json", {"wall_time": rep.wall_time, "branches": rep.branch_times})


def cmd_solve(args) -> int:
    cfg = _load(args)
    require_ok = validate(cfg.params)
    if not require_ok.admissible and not args.allow_inadmissible:
        for line in require_ok.lines():
            print(line, file=sys.stderr)
        return EXIT_CONFIG
    mesh = cfg.build_mesh()
    w = cfg.build_weight(mesh)
    if not require_ok.admissible and cfg.params.lam is None:
        raise ConfigError("inadmissible parameters need an explicit lambda")
    thr = _thresholds(cfg, cfg.params.with_lambda(None), mesh) if require_ok.admissible else None
    rep = solve(cfg.params, w, cfg.solver, thr, args.problem, args.allow_inadmissible)
    out = _outdir(cfg, args)
    _export(rep, out)
    for name, pt in rep.points().items():
        if pt is None:
            print(f"{name}: FAILED ({'; '.join(rep.errors.get(name, []))})")
        else:
            print(f"{name}: J={pt.energy:.17g} residual={pt.residual:.3e} "
                  f"iterations={pt.iterations} status={pt.status}")
    print(f"lambda={rep.lam:.17g} sign_split={rep.sign_split} partial={rep.partial}")
    return EXIT_PARTIAL if rep.partial else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    lo, hi, steps = args.lambda_min, args.lambda_max, args.steps
    if not (0 < lo < hi) or steps < 2:
        raise ConfigError("sweep needs 0 < lambda_min < lambda_max and steps >= 2")
    mesh = cfg.build_mesh()
    w = cfg.build_weight(mesh)
    base = cfg.params.with_lambda(None)
    thr = _thresholds(cfg, base, mesh)
    rows = []
    for lam in np.geomspace(lo, hi, steps):
        lam = float(lam)
        row = {"lambda": lam, "J_plus": math.nan, "J_minus": math.nan,
               "converged_plus": False, "converged_minus": False,
               "Pp_plus": math.nan, "Pp_minus": math.nan, "error": ""}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = solve(base.with_lambda(lam), w, cfg.solver, thr, args.problem)
            for key, pt in (("plus", rep.u_plus), ("minus", rep.v_minus)):
                if pt is not None:
                    row[f"J_{key}"] = pt.energy
                    row[f"converged_{key}"] = pt.converged
                    row[f"Pp_{key}"] = pt.Pp
            row["error"] = " | ".join(f"{b}: {m[0]}" for b, m in sorted(rep.errors.items()))
        except (BracketError, FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
        print(f"lambda={lam:.6g} J_plus={row['J_plus']:.6g} J_minus={row['J_minus']:.6g}")
    out = _outdir(cfg, args)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kirchhoff-nehari", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, lam=True, problem=False):
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        if lam:
            p.add_argument("--lambda", dest="lam", type=float, help="override lambda")
        if problem:
            p.add_argument("--problem", choices=("coupled", "separated"), default="coupled")
        p.add_argument("--allow-inadmissible", action="store_true",
                       help="run even when the parameter hypotheses fail (not for thresholds)")
        return p

    common(sub.add_parser("validate", help="check the parameter hypotheses"), lam=False)
    p = common(sub.add_parser("fiber", help="tabulate the fibering maps of one shape"),
               problem=True)
    p.add_argument("--shape", choices=SHAPES)
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--t-steps", type=int)
    common(sub.add_parser("thresholds", help="Sobolev estimate and threshold constants"))
    common(sub.add_parser("solve", help="minimize on both Nehari branches"), problem=True)
    p = common(sub.add_parser("sweep", help="solve over a geometric lambda range"),
               lam=False, problem=True)
    p.add_argument("--lambda-min", type=float, required=True)
    p.add_argument("--lambda-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    return ap


COMMANDS = {"validate": cmd_validate, "fiber": cmd_fiber, "thresholds": cmd_thresholds,
            "solve": cmd_solve, "sweep": cmd_sweep}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InadmissibleParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BracketError, SobolevNonConvergence, ZeroFunctionError, FloatingPointError,
            np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
