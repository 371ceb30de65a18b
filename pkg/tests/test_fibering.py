import math

import numpy as np
import pytest

from kirchhoff_nehari.energy import fibering_profile, get_fiber, sigma, sigma_prime, psi_second
from kirchhoff_nehari.fibering import (Branch, SobolevNonConvergence, classify, fiber_roots,
                                       sobolev_constant, sobolev_quotient, t_lower_bound, t_max,
                                       talenti_constant, thresholds)
from kirchhoff_nehari.params import PINNED, InadmissibleParams
from kirchhoff_nehari.space import Mesh, WeightField, random_shape

from oracles import reduced_t_max, thresholds_log

# regression value of the artifact's own 50-restart run (seed 0, 64x64, p=1.5, N=2)
S_GOLDEN_64 = 3.1582826382142573


@pytest.fixture(scope="module")
def profiles(shapes, weight):
    return [fibering_profile(u, PINNED, weight) for u in shapes]


def test_reduced_closed_form(shapes, mesh):
    P = PINNED.replace(theta=1.0, a0=0.4)
    w0 = WeightField.constant(mesh, 0.0)
    for u in shapes[:50]:
        prof = fibering_profile(u, P, w0)
        assert t_max(prof, P) == pytest.approx(reduced_t_max(prof, P), rel=1e-8)


@pytest.mark.parametrize("problem", ["coupled", "separated"])
def test_t_max_stationary_and_scaling(profiles, problem):
    fib = get_fiber(problem)
    for prof in profiles[:30]:
        tm = t_max(prof, PINNED, problem)
        s = fib.sigma(prof, tm, PINNED)
        assert abs(fib.sigma_prime(prof, tm, PINNED)) <= 1e-8 * max(1.0, s)
        for c in (0.1, 3.0):
            assert t_max(prof.scaled(c, PINNED), PINNED, problem) == pytest.approx(tm / c, rel=1e-8)


def test_t_max_above_lower_bound(profiles, sobolev):
    for prof in profiles:
        assert t_max(prof, PINNED) >= t_lower_bound(prof, PINNED, sobolev.S, 1.0)


def test_t_lower_bound_hand_value(profiles):
    prof = profiles[0]
    S = 3.0
    # b0=1, p-1+g = 1, p^(theta-1) = 1.5^0.2, r-1+g = 2.5, |Omega| = 1, r - p theta = 1.2
    base = S ** 2 / (1.5 ** 0.2 * 2.5)
    expect = base ** (1 / 1.2) / prof.Pp ** (1 / 1.5)
    assert t_lower_bound(prof, PINNED, S) == pytest.approx(expect, rel=1e-14)
    assert t_lower_bound(prof.scaled(2.0, PINNED), PINNED, S) == pytest.approx(
        0.5 * t_lower_bound(prof, PINNED, S), rel=1e-14)


def test_fiber_structure_below_lambda2(profiles, thr):
    lam = 0.5 * thr.Lambda2
    for prof in profiles:
        roots = fiber_roots(prof, PINNED, lam)
        assert roots is not None
        t1, tm, t2 = roots
        assert t1 < tm < t2
        tol = 1e-10 * max(1.0, lam * prof.I_singular)
        for t in (t1, t2):
            assert abs(sigma(prof, t, PINNED) - lam * prof.I_singular) <= tol
        assert sigma_prime(prof, t1, PINNED) > 0 > sigma_prime(prof, t2, PINNED)
        assert psi_second(prof, t1, PINNED, lam) > 0 > psi_second(prof, t2, PINNED, lam)


def test_fiber_roots_none_for_huge_lambda(profiles):
    prof = profiles[0]
    tm = t_max(prof, PINNED)
    lam = 1.01 * sigma(prof, tm, PINNED) / prof.I_singular
    assert fiber_roots(prof, PINNED, lam) is None
    with pytest.raises(ValueError):
        fiber_roots(prof, PINNED, -1.0)


def test_roots_bit_deterministic(profiles):
    a = fiber_roots(profiles[3], PINNED, 0.1)
    b = fiber_roots(profiles[3], PINNED, 0.1)
    assert a == b


def test_classification(shapes, weight, thr):
    lam = 0.5 * thr.Lambda3
    for u in shapes[:20]:
        prof = fibering_profile(u, PINNED, weight)
        t1, _, t2 = fiber_roots(prof, PINNED, lam)
        assert classify(u.scaled(t1), PINNED, weight, lam=lam) is Branch.Nplus
        assert classify(u.scaled(t2), PINNED, weight, lam=lam) is Branch.Nminus
        assert classify(u.scaled(0.5 * t1), PINNED, weight, lam=lam) is Branch.NotOnNehari


def test_thresholds_against_log_oracle(thr, sobolev):
    ref = thresholds_log(PINNED, sobolev.S, 1.0)
    d = thr.to_dict()
    for k, v in ref.items():
        assert d[k] == pytest.approx(v, rel=1e-12), k
    assert thr.D1 == thr.A1 + thr.A2
    assert thr.Lambda3 <= min(thr.Lambda1, thr.Lambda2)
    assert all(v > 0 for k, v in d.items() if isinstance(v, float))


def test_thresholds_with_lambda_and_a0(sobolev):
    P = PINNED.replace(a0=1.0, theta=1.1).with_lambda(0.01)
    t = thresholds(P, sobolev.S, 1.0)
    ref = thresholds_log(P, sobolev.S, 1.0, lam=0.01)
    assert t.A1 == pytest.approx(ref["A1"], rel=1e-12) and t.lam == 0.01


def test_thresholds_refuse_inadmissible():
    with pytest.raises(InadmissibleParams):
        thresholds(PINNED.replace(r=2.0), 3.0)
    with pytest.raises(ValueError):
        thresholds(PINNED, -1.0)


def test_sobolev_self_consistent(sobolev):
    assert sobolev_quotient(sobolev.minimizer, 1.5, 6.0) == pytest.approx(sobolev.S, rel=1e-12)
    assert sobolev.S == min(sobolev.quotients)
    assert sobolev.provenance["restarts"] == 50


def test_sobolev_golden(sobolev):
    assert abs(sobolev.S - S_GOLDEN_64) <= 1e-6


def test_sobolev_refinement_monotone(sobolev):
    coarse = sobolev_constant(Mesh(nx=32, ny=32), 1.5, 2, restarts=50, seed=0)
    assert coarse.S >= sobolev.S - 1e-6


def test_sobolev_values_sit_below_continuum(sobolev):
    # lumped quadrature: the discrete constant is smaller than Talenti's
    assert 0.5 * talenti_constant(1.5, 2) < sobolev.S < talenti_constant(1.5, 2)


def test_sobolev_flags_non_convergence():
    with pytest.raises(SobolevNonConvergence):
        sobolev_constant(Mesh(nx=8, ny=8), 1.5, 2, restarts=2, max_iter=0)
    with pytest.raises(ValueError):
        sobolev_constant(Mesh(nx=8, ny=8), 2.5, 2)


def test_talenti_sanity():
    # p = 2, N = 3: pi * 3 * (1/1) * (Gamma(3/2) / Gamma(3) / Gamma(5/2))^... known value
    S = talenti_constant(2.0, 3)
    assert S == pytest.approx(3 * (math.pi / 2) ** (4 / 3), rel=1e-12)
