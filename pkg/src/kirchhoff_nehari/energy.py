"""Energy functionals and fibering maps.

Along a ray t -> t u everything depends on u only through four integrals
(see ``FiberingProfile``), so the fibering functions take a profile and never
touch the mesh. All of them accept scalar or array ``t``.

The coupled problem uses M(phi_H(grad u)); the separated one uses
M(||grad u||_p^p)/p + M(||grad u||_{q,a}^q)/q.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .params import ProblemParams, kirchhoff_M, kirchhoff_m
from .space import GridFunction, WeightField, gradient_norms, lp_integral


class ZeroFunctionError(ValueError):
    """Fibering derivatives are undefined for u == 0."""


@dataclass(frozen=True)
class FiberingProfile:
    I_singular: float   # int |u|^(1-gamma)
    I_r: float          # int |u|^r
    Pp: float           # ||grad u||_p^p
    Qq: float           # ||grad u||_{q,a}^q
    t1: Optional[float] = None
    t_max: Optional[float] = None
    t2: Optional[float] = None

    @property
    def is_zero(self) -> bool:
        return self.Pp == 0.0 and self.Qq == 0.0 and self.I_r == 0.0

    def scaled(self, c: float, params: ProblemParams) -> "FiberingProfile":
        """Profile of c*u from the homogeneity of each integral (roots dropped)."""
        P = params
        return FiberingProfile(
            I_singular=c ** (1.0 - P.gamma) * self.I_singular,
            I_r=c ** P.r * self.I_r,
            Pp=c ** P.p * self.Pp,
            Qq=c ** P.q * self.Qq,
        )

    def with_roots(self, t1=None, t_max=None, t2=None) -> "FiberingProfile":
        return replace(self, t1=t1, t_max=t_max, t2=t2)


def fibering_profile(u: GridFunction, params: ProblemParams, w: WeightField) -> FiberingProfile:
    Pp, Qq = gradient_norms(u, w, params.p, params.q)
    return FiberingProfile(
        I_singular=lp_integral(u, 1.0 - params.gamma),
        I_r=lp_integral(u, params.r),
        Pp=Pp,
        Qq=Qq,
    )


def _lam(params: ProblemParams, lam):
    lam = params.lam if lam is None else lam
    if lam is None:
        raise ValueError("lambda is unset; pass it explicitly or set params.lam")
    return lam


def _t(t, prof: FiberingProfile):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("fibering derivatives need t > 0")
    if prof.is_zero:
        raise ZeroFunctionError("fibering derivatives need u != 0")
    return t


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def phi_H(Pp, Qq, p: float, q: float):
    """phi_H(grad u) = Pp/p + Qq/q."""
    return Pp / p + Qq / q


def _phi(prof, t, P):
    return t ** P.p * prof.Pp / P.p + t ** P.q * prof.Qq / P.q


def _dphi(prof, t, P):
    # t^(p-1) Pp + t^(q-1) Qq, the derivative of phi_H(t grad u)
    return t ** (P.p - 1.0) * prof.Pp + t ** (P.q - 1.0) * prof.Qq


def _kirchhoff_curv(prof, t, P):
    """b0 (theta-1) phi^(theta-2) (t^(p-1) Pp + t^(q-1) Qq)^2."""
    if P.theta == 1.0:
        return np.zeros_like(np.asarray(t, dtype=float))
    return P.b0 * (P.theta - 1.0) * _phi(prof, t, P) ** (P.theta - 2.0) * _dphi(prof, t, P) ** 2


# -- coupled problem ---------------------------------------------------------

def energy_J(u: GridFunction, params: ProblemParams, w: WeightField, lam=None) -> float:
    """M(phi_H(grad u)) - lambda/(1-gamma) int |u|^(1-gamma) - (1/r) int |u|^r."""
    return psi(fibering_profile(u, params, w), 1.0, params, lam)


def psi(prof: FiberingProfile, t, params: ProblemParams, lam=None):
    P = params
    lam = _lam(P, lam)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("psi is defined on t >= 0")
    s = 1.0 - P.gamma
    val = (kirchhoff_M(_phi(prof, t, P), P)
           - lam * t ** s * prof.I_singular / s
           - t ** P.r * prof.I_r / P.r)
    return _ret(val)


def psi_prime(prof: FiberingProfile, t, params: ProblemParams, lam=None):
    P = params
    lam = _lam(P, lam)
    t = _t(t, prof)
    val = (kirchhoff_m(_phi(prof, t, P), P) * _dphi(prof, t, P)
           - lam * t ** -P.gamma * prof.I_singular
           - t ** (P.r - 1.0) * prof.I_r)
    return _ret(val)


def psi_second(prof: FiberingProfile, t, params: ProblemParams, lam=None):
    P = params
    lam = _lam(P, lam)
    t = _t(t, prof)
    m = kirchhoff_m(_phi(prof, t, P), P)
    val = (m * ((P.p - 1.0) * t ** (P.p - 2.0) * prof.Pp
                + (P.q - 1.0) * t ** (P.q - 2.0) * prof.Qq)
           + _kirchhoff_curv(prof, t, P)
           + lam * P.gamma * t ** (-P.gamma - 1.0) * prof.I_singular
           - (P.r - 1.0) * t ** (P.r - 2.0) * prof.I_r)
    return _ret(val)


def sigma(prof: FiberingProfile, t, params: ProblemParams):
    """psi'(t) = t^-gamma (sigma(t) - lambda I_singular); independent of lambda."""
    P = params
    t = _t(t, prof)
    g = P.gamma
    val = (kirchhoff_m(_phi(prof, t, P), P)
           * (t ** (P.p - 1.0 + g) * prof.Pp + t ** (P.q - 1.0 + g) * prof.Qq)
           - t ** (P.r - 1.0 + g) * prof.I_r)
    return _ret(val)


def sigma_prime(prof: FiberingProfile, t, params: ProblemParams):
    P = params
    t = _t(t, prof)
    g = P.gamma
    m = kirchhoff_m(_phi(prof, t, P), P)
    val = m * ((P.p - 1.0 + g) * t ** (P.p - 2.0 + g) * prof.Pp
               + (P.q - 1.0 + g) * t ** (P.q - 2.0 + g) * prof.Qq)
    if P.theta != 1.0:
        val = val + (P.b0 * (P.theta - 1.0) * _phi(prof, t, P) ** (P.theta - 2.0)
                     * (t ** (P.p - 1.0 + g) * prof.Pp + t ** (P.q - 1.0 + g) * prof.Qq)
                     * _dphi(prof, t, P))
    val = val - (P.r - 1.0 + g) * t ** (P.r - 2.0 + g) * prof.I_r
    return _ret(val)


def T_u(prof: FiberingProfile, t, params: ProblemParams):
    """sigma'(t) = t^(r-2+gamma) (T_u(t) - (r-1+gamma) I_r); T_u is strictly decreasing."""
    P = params
    t = _t(t, prof)
    g = P.gamma
    m = kirchhoff_m(_phi(prof, t, P), P)
    val = m * ((P.p - 1.0 + g) * t ** (P.p - P.r) * prof.Pp
               + (P.q - 1.0 + g) * t ** (P.q - P.r) * prof.Qq)
    if P.theta != 1.0:
        val = val + (P.b0 * (P.theta - 1.0) * _phi(prof, t, P) ** (P.theta - 2.0)
                     * (t ** (P.p - P.r + 1.0) * prof.Pp + t ** (P.q - P.r + 1.0) * prof.Qq)
                     * _dphi(prof, t, P))
    return _ret(val)


# -- separated problem -------------------------------------------------------

def energy_J_separated(u: GridFunction, params: ProblemParams, w: WeightField, lam=None) -> float:
    return psi_tilde(fibering_profile(u, params, w), 1.0, params, lam)


def psi_tilde(prof: FiberingProfile, t, params: ProblemParams, lam=None):
    P = params
    lam = _lam(P, lam)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("psi is defined on t >= 0")
    s = 1.0 - P.gamma
    pt, qt = P.p * P.theta, P.q * P.theta
    val = (P.a0 * _phi(prof, t, P)
           + (P.b0 / P.theta) * (t ** pt * prof.Pp ** P.theta / P.p
                                 + t ** qt * prof.Qq ** P.theta / P.q)
           - lam * t ** s * prof.I_singular / s
           - t ** P.r * prof.I_r / P.r)
    return _ret(val)


def psi_tilde_prime(prof: FiberingProfile, t, params: ProblemParams, lam=None):
    P = params
    lam = _lam(P, lam)
    t = _t(t, prof)
    pt, qt = P.p * P.theta, P.q * P.theta
    val = (P.a0 * _dphi(prof, t, P)
           + P.b0 * (t ** (pt - 1.0) * prof.Pp ** P.theta + t ** (qt - 1.0) * prof.Qq ** P.theta)
           - lam * t ** -P.gamma * prof.I_singular
           - t ** (P.r - 1.0) * prof.I_r)
    return _ret(val)


def psi_tilde_second(prof: FiberingProfile, t, params: ProblemParams, lam=None):
    P = params
    lam = _lam(P, lam)
    t = _t(t, prof)
    pt, qt = P.p * P.theta, P.q * P.theta
    val = (P.a0 * ((P.p - 1.0) * t ** (P.p - 2.0) * prof.Pp
                   + (P.q - 1.0) * t ** (P.q - 2.0) * prof.Qq)
           + P.b0 * ((pt - 1.0) * t ** (pt - 2.0) * prof.Pp ** P.theta
                     + (qt - 1.0) * t ** (qt - 2.0) * prof.Qq ** P.theta)
           + lam * P.gamma * t ** (-P.gamma - 1.0) * prof.I_singular
           - (P.r - 1.0) * t ** (P.r - 2.0) * prof.I_r)
    return _ret(val)


def sigma_tilde(prof: FiberingProfile, t, params: ProblemParams):
    """t^gamma psi~'(t) + lambda I_singular."""
    P = params
    t = _t(t, prof)
    g = P.gamma
    pt, qt = P.p * P.theta, P.q * P.theta
    val = (P.a0 * (t ** (P.p - 1.0 + g) * prof.Pp + t ** (P.q - 1.0 + g) * prof.Qq)
           + P.b0 * (t ** (pt - 1.0 + g) * prof.Pp ** P.theta
                     + t ** (qt - 1.0 + g) * prof.Qq ** P.theta)
           - t ** (P.r - 1.0 + g) * prof.I_r)
    return _ret(val)


def sigma_tilde_prime(prof: FiberingProfile, t, params: ProblemParams):
    P = params
    t = _t(t, prof)
    g = P.gamma
    pt, qt = P.p * P.theta, P.q * P.theta
    val = (P.a0 * ((P.p - 1.0 + g) * t ** (P.p - 2.0 + g) * prof.Pp
                   + (P.q - 1.0 + g) * t ** (P.q - 2.0 + g) * prof.Qq)
           + P.b0 * ((pt - 1.0 + g) * t ** (pt - 2.0 + g) * prof.Pp ** P.theta
                     + (qt - 1.0 + g) * t ** (qt - 2.0 + g) * prof.Qq ** P.theta)
           - (P.r - 1.0 + g) * t ** (P.r - 2.0 + g) * prof.I_r)
    return _ret(val)


def T_tilde(prof: FiberingProfile, t, params: ProblemParams):
    """Separated analogue of T_u: sigma~'(t) = t^(r-2+gamma) (T~(t) - (r-1+gamma) I_r)."""
    P = params
    t = _t(t, prof)
    g = P.gamma
    pt, qt = P.p * P.theta, P.q * P.theta
    val = (P.a0 * ((P.p - 1.0 + g) * t ** (P.p - P.r) * prof.Pp
                   + (P.q - 1.0 + g) * t ** (P.q - P.r) * prof.Qq)
           + P.b0 * ((pt - 1.0 + g) * t ** (pt - P.r) * prof.Pp ** P.theta
                     + (qt - 1.0 + g) * t ** (qt - P.r) * prof.Qq ** P.theta))
    return _ret(val)


class Fiber(NamedTuple):
    """Bundle of the fibering maps of one problem variant."""

    name: str
    psi: callable
    psi_prime: callable
    psi_second: callable
    sigma: callable
    sigma_prime: callable
    T: callable


COUPLED = Fiber("coupled", psi, psi_prime, psi_second, sigma, sigma_prime, T_u)
SEPARATED = Fiber("separated", psi_tilde, psi_tilde_prime, psi_tilde_second,
                  sigma_tilde, sigma_tilde_prime, T_tilde)
FIBERS = {"coupled": COUPLED, "separated": SEPARATED}


def get_fiber(problem) -> Fiber:
    if isinstance(problem, Fiber):
        return problem
    try:
        return FIBERS[problem]
    except KeyError:
        raise ValueError(f"problem must be 'coupled' or 'separated', got {problem!r}") from None


def tabulate(prof: FiberingProfile, t_grid, params: ProblemParams, problem="coupled",
             lam=None) -> dict[str, np.ndarray]:
    """Columns t, psi, psi1, psi2, sigma, sigma1, Tu over ``t_grid``."""
    f = get_fiber(problem)
    t = np.asarray(t_grid, dtype=float)
    return {
        "t": t,
        "psi": np.asarray(f.psi(prof, t, params, lam), dtype=float),
        "psi1": np.asarray(f.psi_prime(prof, t, params, lam), dtype=float),
        "psi2": np.asarray(f.psi_second(prof, t, params, lam), dtype=float),
        "sigma": np.asarray(f.sigma(prof, t, params), dtype=float),
        "sigma1": np.asarray(f.sigma_prime(prof, t, params), dtype=float),
        "Tu": np.asarray(f.T(prof, t, params), dtype=float),
    }
