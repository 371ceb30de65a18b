"""Fibering-projected descent on the two Nehari branches.

Every iterate lives on N+ (scaled by t1) or N- (scaled by t2), so the method
minimizes the reduced functional u -> J(t(u) u) over positive shapes. Steps
use a frozen-coefficient (Kacanov) metric, which makes the p < 2 operator
and the singular term tractable without line-search starvation.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import _descent
from .energy import FiberingProfile, fibering_profile, get_fiber, phi_H
from .fibering import (Branch, ThresholdReport, classify_profile, fiber_roots,
                       cached_sobolev_constant, thresholds)
from .params import ProblemParams, kirchhoff_m, require_admissible, validate
from .space import GridFunction, WeightField, luxemburg_norm, random_shape, sine_bump

logger = logging.getLogger(__name__)

BRANCHES = ("plus", "minus")


class ProjectionError(RuntimeError):
    """sigma(t_max) <= lambda * I_singular: the fiber misses the Nehari manifold."""


@dataclass
class SolveOptions:
    restarts: int = 0
    max_iter: int = 10_000
    energy_rtol: float = 1e-10
    stall_iters: int = 5
    residual_tol: float = 1e-4
    floor_rel: float = 1e-8
    tol_stationarity: float = 1e-8
    max_halvings: int = 50
    sobolev_restarts: int = 50
    seed: int = 0

    @classmethod
    def from_mapping(cls, data) -> "SolveOptions":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown solver option(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class NehariPoint:
    w: GridFunction
    branch: str
    energy: float
    psi1: float
    psi2: float
    residual: float
    scale_t: float
    Pp: float
    Qq: float
    converged: bool = False
    iterations: int = 0
    status: str = "projected"

    def summary(self) -> dict:
        """Scalar fields only (the nodal values go to CSV)."""
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "w"}
        vals = self.w.values[self.w.mesh.interior]
        d["min_interior"] = float(vals.min())
        d["max"] = float(self.w.values.max())
        return d


def _lam(params: ProblemParams, lam):
    lam = params.lam if lam is None else lam
    if lam is None or lam <= 0:
        raise ValueError("lambda must be set and positive")
    return lam


def _coefficients(prof: FiberingProfile, params: ProblemParams, problem: str):
    """Kirchhoff factors multiplying the p- and q-Laplacian parts of J'."""
    if get_fiber(problem).name == "coupled":
        c = float(kirchhoff_m(phi_H(prof.Pp, prof.Qq, params.p, params.q), params))
        return c, c
    return float(kirchhoff_m(prof.Pp, params)), float(kirchhoff_m(prof.Qq, params))


def _check_shape(u: GridFunction) -> None:
    if u.is_zero():
        raise ValueError("projection needs u != 0")
    if np.any(u.values < 0):
        raise ValueError("projection needs u >= 0 at every node")


def _branch_root(prof, params, lam, problem, branch):
    if branch not in BRANCHES:
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    roots = fiber_roots(prof, params, lam, problem)
    if roots is None:
        raise ProjectionError(
            f"lambda={lam:.6g} too large for this shape: max sigma <= lambda*I_singular")
    return roots.t1 if branch == "plus" else roots.t2


def _projected_energy(u: GridFunction, branch, params, w, lam, problem):
    prof = fibering_profile(u, params, w)
    t = _branch_root(prof, params, lam, problem, branch)
    return t, float(get_fiber(problem).psi(prof, t, params, lam))


def _gradient_parts(wpt: GridFunction, params, w: WeightField, floor, lam, problem):
    mesh = wpt.mesh
    v = wpt.values
    P = params
    lam = _lam(P, lam)
    if floor is None:
        floor = 1e-8 * float(v.max())
    prof = fibering_profile(wpt, P, w)
    cp, cq = _coefficients(prof, P, problem)
    fl = _descent.flux(mesh, v, w.values, P.p, P.q, cp, cq)
    vf = np.maximum(v, floor)
    load = lam * mesh.mass * vf ** -P.gamma + mesh.mass * np.abs(v) ** (P.r - 1.0)
    fl[mesh.boundary] = 0.0
    load[mesh.boundary] = 0.0
    return fl, load, prof, (cp, cq), vf


def discrete_gradient(wpt: GridFunction, params: ProblemParams, w: WeightField,
                      floor: Optional[float] = None, lam=None, problem="coupled") -> GridFunction:
    """Nodal Frechet derivative of J at wpt, singular factor floored at ``floor``
    (default 1e-8 * max wpt)."""
    fl, load, *_ = _gradient_parts(wpt, params, w, floor, lam, problem)
    return GridFunction(wpt.mesh, fl - load)


def _relative_residual(mesh, fl, load) -> float:
    denom = max(_descent.dual_norm(mesh, fl), _descent.dual_norm(mesh, load))
    if denom == 0.0:
        return 0.0
    return _descent.dual_norm(mesh, fl - load) / denom


def residual(wpt: GridFunction, params: ProblemParams, w: WeightField,
             floor: Optional[float] = None, lam=None, problem="coupled") -> float:
    """H^-1 norm of J'(wpt), relative to the larger of its operator and load parts."""
    fl, load, *_ = _gradient_parts(wpt, params, w, floor, lam, problem)
    return _relative_residual(wpt.mesh, fl, load)


def project(u: GridFunction, branch: str, params: ProblemParams, w: WeightField,
            lam=None, problem="coupled") -> NehariPoint:
    """Scale u onto N+ (t1 u) or N- (t2 u)."""
    _check_shape(u)
    lam = _lam(params, lam)
    fib = get_fiber(problem)
    prof = fibering_profile(u, params, w)
    t = _branch_root(prof, params, lam, problem, branch)
    wpt = u.scaled(t)
    wprof = fibering_profile(wpt, params, w)
    return NehariPoint(
        w=wpt,
        branch=branch,
        energy=float(fib.psi(wprof, 1.0, params, lam)),
        psi1=float(fib.psi_prime(wprof, 1.0, params, lam)),
        psi2=float(fib.psi_second(wprof, 1.0, params, lam)),
        residual=residual(wpt, params, w, lam=lam, problem=problem),
        scale_t=float(t),
        Pp=wprof.Pp,
        Qq=wprof.Qq,
    )


def point_branch(pt: NehariPoint, params: ProblemParams, w: WeightField, tol=1e-8,
                 lam=None, problem="coupled") -> Branch:
    """Classify a point from fresh quadrature of its nodal values."""
    return classify_profile(fibering_profile(pt.w, params, w), params, tol, lam, problem)


def minimize_branch(u0: GridFunction, branch: str, params: ProblemParams, w: WeightField,
                    opts: Optional[SolveOptions] = None, lam=None, problem="coupled",
                    history: Optional[list] = None) -> NehariPoint:
    """Descend J along the branch starting from the shape u0.

    Stops after ``opts.stall_iters`` consecutive steps with relative energy
    change below ``opts.energy_rtol``, when the line search cannot decrease
    the energy any further, or after ``opts.max_iter`` steps.
    """
    opts = opts or SolveOptions()
    lam = _lam(params, lam)
    _check_shape(u0)
    mesh = u0.mesh
    P = params

    t, E = _projected_energy(u0, branch, P, w, lam, problem)
    cur = u0.scaled(t)
    alpha = 1.0
    quiet = 0
    status = "max_iter"
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        fl, load, prof, (cp, cq), vf = _gradient_parts(cur, P, w, opts.floor_rel * cur.values.max(),
                                                       lam, problem)
        g = fl - load
        if history is not None:
            history.append({"iter": it - 1, "branch": branch, "energy": E,
                            "residual": _relative_residual(mesh, fl, load), "scale_t": t})
        coef = _descent.metric_coefficients(mesh, cur.values, w.values, P.p, P.q, cp, cq)
        diag = lam * P.gamma * mesh.mass * vf ** (-P.gamma - 1.0)
        d = -_descent.metric_solve(mesh, coef, diag, g)

        a = alpha
        accepted = None
        for _ in range(opts.max_halvings):
            trial = np.maximum(cur.values + a * d, 0.0)
            trial[mesh.boundary] = 0.0
            if np.any(trial > 0.0):
                tu = GridFunction(mesh, trial)
                ts, Es = _projected_energy(tu, branch, P, w, lam, problem)
                if Es < E:
                    accepted = (tu, ts, Es)
                    break
            a *= 0.5
        if accepted is None:
            status = "stalled"
            converged = True
            break
        tu, ts, Es = accepted
        rel = abs(E - Es) / max(abs(E), np.finfo(float).tiny)
        cur, t, E = tu.scaled(ts), ts, Es
        alpha = min(1.0, 2.0 * a)
        quiet = quiet + 1 if rel < opts.energy_rtol else 0
        if quiet >= opts.stall_iters:
            status = "converged"
            converged = True
            break

    pt = project(cur, branch, P, w, lam, problem)
    pt.converged = converged
    pt.iterations = it
    pt.status = status
    if history is not None:
        history.append({"iter": it, "branch": branch, "energy": pt.energy,
                        "residual": pt.residual, "scale_t": pt.scale_t})
    return pt


def initial_shape(mesh, w: WeightField, params: ProblemParams) -> GridFunction:
    """Sine bump scaled to unit Luxemburg norm of its gradient."""
    u = sine_bump(mesh)
    return u.scaled(1.0 / luxemburg_norm(u.gradient(), w, params.p, params.q))


@dataclass
class SolveReport:
    problem: str
    params: ProblemParams
    lam: float
    thresholds: Optional[ThresholdReport]
    u_plus: Optional[NehariPoint]
    v_minus: Optional[NehariPoint]
    history: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    restart_energies: dict = field(default_factory=dict)
    # timings are kept out of to_dict so reports stay reproducible
    wall_time: float = 0.0
    branch_times: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return not all(pt is not None and pt.converged for pt in (self.u_plus, self.v_minus))

    @property
    def sign_split(self) -> bool:
        if self.u_plus is None or self.v_minus is None:
            return False
        return self.u_plus.energy < 0.0 < self.v_minus.energy

    def points(self) -> dict:
        return {"plus": self.u_plus, "minus": self.v_minus}

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "params": self.params.as_dict(),
            "lambda": self.lam,
            "thresholds": None if self.thresholds is None else self.thresholds.to_dict(),
            "u_plus": None if self.u_plus is None else self.u_plus.summary(),
            "v_minus": None if self.v_minus is None else self.v_minus.summary(),
            "errors": dict(self.errors),
            "restart_energies": {k: list(v) for k, v in self.restart_energies.items()},
            "partial": self.partial,
            "sign_split": self.sign_split,
        }


def default_thresholds(params: ProblemParams, w: WeightField, opts: SolveOptions) -> ThresholdReport:
    mesh = w.mesh
    est = cached_sobolev_constant(mesh, params.p, params.N, params.pstar,
                           restarts=opts.sobolev_restarts, seed=opts.seed)
    return thresholds(params, est.S, mesh.volume, est.provenance)


def solve(params: ProblemParams, w: WeightField, opts: Optional[SolveOptions] = None,
          thr: Optional[ThresholdReport] = None, problem="coupled",
          allow_inadmissible=False) -> SolveReport:
    """Minimize on both branches; lambda defaults to Lambda3/2 when unset.

    The thresholds always come from the coupled problem's constants.
    """
    opts = opts or SolveOptions()
    problem = get_fiber(problem).name
    require_admissible(params, allow_inadmissible)
    start = time.perf_counter()
    admissible = validate(params).admissible
    if thr is None and admissible:
        thr = default_thresholds(params.with_lambda(None), w, opts)
    if params.lam is not None:
        lam = params.lam
    elif thr is not None:
        lam = 0.5 * thr.Lambda3
    else:
        raise ValueError("inadmissible parameters need an explicit lambda")
    if thr is not None and lam > 0.5 * thr.Lambda3 * (1.0 + 1e-12):
        warnings.warn(f"lambda={lam:.6g} exceeds Lambda3/2={0.5 * thr.Lambda3:.6g}; "
                      "the two-solution guarantee does not apply", stacklevel=2)
    params = params.with_lambda(lam)
    if thr is not None and admissible:
        thr = thresholds(params, thr.S, thr.volume, thr.sobolev)

    mesh = w.mesh
    rng = np.random.default_rng(opts.seed)
    starts = [initial_shape(mesh, w, params)]
    starts += [random_shape(mesh, rng) for _ in range(opts.restarts)]

    best: dict = {}
    errors: dict = {}
    history: list = []
    energies: dict = {b: [] for b in BRANCHES}
    branch_times: dict = {}
    for branch in BRANCHES:
        t0 = time.perf_counter()
        for k, u0 in enumerate(starts):
            hist: list = []
            try:
                pt = minimize_branch(u0, branch, params, w, opts, lam, problem, hist)
            except ProjectionError as exc:
                errors.setdefault(branch, []).append(f"start {k}: {exc}")
                energies[branch].append(None)
                continue
            energies[branch].append(pt.energy)
            for row in hist:
                row["start"] = k
            history += hist
            if branch not in best or pt.energy < best[branch].energy:
                best[branch] = pt
        branch_times[branch] = time.perf_counter() - t0
        if branch in best and best[branch].residual > opts.residual_tol:
            logger.warning("%s branch residual %.3e above %.1e", branch,
                           best[branch].residual, opts.residual_tol)

    rep = SolveReport(problem=problem, params=params, lam=lam, thresholds=thr,
                      u_plus=best.get("plus"), v_minus=best.get("minus"),
                      history=history, errors=errors, restart_energies=energies)
    rep.wall_time = time.perf_counter() - start
    rep.branch_times = branch_times
    return rep


def solve_separated(params: ProblemParams, w: WeightField, opts: Optional[SolveOptions] = None,
                    thr: Optional[ThresholdReport] = None, allow_inadmissible=False) -> SolveReport:
    return solve(params, w, opts, thr, "separated", allow_inadmissible)
