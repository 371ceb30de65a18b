"""Scalar problem data, the admissibility gate and the Kirchhoff coefficient."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

FIELD_NAMES = ("N", "p", "q", "gamma", "r", "theta", "a0", "b0", "lambda")


class InadmissibleParams(ValueError):
    """Raised when a theory-backed computation is asked to run outside the admissible set."""


def critical_exponent(p: float, N: int) -> float:
    """Return the critical Sobolev exponent Np/(N-p)."""
    if p <= 1:
        raise ValueError(f"critical exponent needs p > 1, got p={p}")
    if p >= N:
        raise ValueError(f"critical exponent undefined for p >= N (p={p}, N={N})")
    return N * p / (N - p)


@dataclass(frozen=True)
class ProblemParams:
    N: int
    p: float
    q: float
    gamma: float
    r: float
    theta: float
    a0: float
    b0: float
    # None means "pick the default (half of the third threshold) downstream"
    lam: Optional[float] = None

    @property
    def pstar(self) -> float:
        if 1 < self.p < self.N:
            return critical_exponent(self.p, self.N)
        return math.inf

    def with_lambda(self, lam: Optional[float]) -> "ProblemParams":
        return replace(self, lam=lam)

    def replace(self, **changes) -> "ProblemParams":
        if "lambda" in changes:
            changes["lam"] = changes.pop("lambda")
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "N": self.N, "p": self.p, "q": self.q, "gamma": self.gamma,
            "r": self.r, "theta": self.theta, "a0": self.a0, "b0": self.b0,
            "lambda": self.lam,
        }

    @classmethod
    def from_mapping(cls, data) -> "ProblemParams":
        missing = [k for k in FIELD_NAMES if k != "lambda" and k not in data]
        if missing:
            raise KeyError(f"missing parameter field(s): {', '.join(missing)}")
        unknown = sorted(set(data) - set(FIELD_NAMES))
        if unknown:
            raise KeyError(f"unknown parameter field(s): {', '.join(unknown)}")
        n = data["N"]
        if isinstance(n, bool) or int(n) != n:
            raise ValueError(f"N must be an integer, got {n!r}")
        lam = data.get("lambda")
        return cls(
            N=int(n), p=float(data["p"]), q=float(data["q"]),
            gamma=float(data["gamma"]), r=float(data["r"]),
            theta=float(data["theta"]), a0=float(data["a0"]),
            b0=float(data["b0"]), lam=None if lam is None else float(lam),
        )


@dataclass(frozen=True)
class Check:
    name: str
    statement: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def admissible(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [
            f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.statement}  ({c.detail})"
            for c in self.checks
        ]


def validate(params: ProblemParams) -> ValidationReport:
    """Evaluate every admissibility inequality separately.

    Failures are reported, never raised. ``theta < r/q`` and ``q*theta < r`` are
    the same inequality, so it appears once (as the lower end of the r-range).
    """
    P = params
    ps = P.pstar
    checks = [
        Check("N_ge_2", "N >= 2", P.N >= 2, f"N={P.N}"),
        Check("p_gt_1", "1 < p", P.p > 1, f"p={P.p:g}"),
        Check("p_lt_N", "p < N", P.p < P.N, f"p={P.p:g}, N={P.N}"),
        Check("q_gt_p", "p < q", P.q > P.p, f"p={P.p:g}, q={P.q:g}"),
        Check("q_lt_pstar", "q < p*", P.q < ps, f"q={P.q:g}, p*={ps:g}"),
        Check("gamma_in_0_1", "0 < gamma < 1", 0 < P.gamma < 1, f"gamma={P.gamma:g}"),
        Check("a0_nonneg", "a0 >= 0", P.a0 >= 0, f"a0={P.a0:g}"),
        Check("b0_pos", "b0 > 0", P.b0 > 0, f"b0={P.b0:g}"),
        Check("theta_ge_1", "theta in [1, r/q): theta >= 1", P.theta >= 1,
              f"theta={P.theta:g}"),
        Check("r_gt_qtheta", "r in (q*theta, p*): r > q*theta (i.e. theta < r/q)",
              P.r > P.q * P.theta, f"r={P.r:g}, q*theta={P.q * P.theta:g}"),
        Check("r_lt_pstar", "r in (q*theta, p*): r < p*", P.r < ps,
              f"r={P.r:g}, p*={ps:g}"),
        Check("lambda_pos", "lambda > 0 (unset means default)",
              P.lam is None or P.lam > 0,
              "unset" if P.lam is None else f"lambda={P.lam:g}"),
    ]
    return ValidationReport(tuple(checks))


def require_admissible(params: ProblemParams, allow_inadmissible: bool = False) -> None:
    rep = validate(params)
    if rep.admissible or allow_inadmissible:
        return
    names = ", ".join(c.name for c in rep.failures)
    raise InadmissibleParams(f"parameters violate admissibility: {names}")


def _check_nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise ValueError("Kirchhoff functions are defined for t >= 0 only")
    return t


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def kirchhoff_m(t, params: ProblemParams):
    """m(t) = a0 + b0 t^(theta-1); with theta == 1 this is a0 + b0 everywhere."""
    t = _check_nonneg(t)
    if params.theta == 1.0:
        return _out(np.full_like(t, params.a0 + params.b0))
    return _out(params.a0 + params.b0 * t ** (params.theta - 1.0))


def kirchhoff_M(t, params: ProblemParams):
    """Primitive a0 t + (b0/theta) t^theta, with M(0) = 0."""
    t = _check_nonneg(t)
    return _out(params.a0 * t + (params.b0 / params.theta) * t ** params.theta)


PINNED = ProblemParams(N=2, p=1.5, q=1.8, gamma=0.5, r=3.0, theta=1.2, a0=0.0, b0=1.0)
