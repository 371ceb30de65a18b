"""Acceptance gate: the nine criteria at their stated tolerances.

Pinned problem: N=2, p=1.5, q=1.8, gamma=0.5, theta=1.2, r=3, b0=1 on the
64x64 unit-square mesh, a0 in {0, 1}.
"""

import json

import numpy as np
import pytest
import yaml

from kirchhoff_nehari import cli
from kirchhoff_nehari import energy as E
from kirchhoff_nehari import fibering
from kirchhoff_nehari.fibering import Branch, classify, fiber_roots, t_lower_bound, t_max, thresholds
from kirchhoff_nehari.nehari_solver import project
from kirchhoff_nehari.params import PINNED
from kirchhoff_nehari.space import (WeightField, gradient_norms, luxemburg_norm, modular,
                                    random_shape)

from oracles import central1, central2, psi1_scale, psi2_scale, psi_tilde_scales, reduced_t_max

CONFIG = {
    "params": {"N": 2, "p": 1.5, "q": 1.8, "gamma": 0.5, "r": 3.0, "theta": 1.2,
               "a0": 0.0, "b0": 1.0},
    "mesh": {"Lx": 1.0, "Ly": 1.0, "nx": 64, "ny": 64},
    "weight": {"kind": "bump", "amplitude": 1.0, "center": [0.5, 0.5], "radius": 0.35},
    "seed": 0,
}


def config_file(tmp_path, name="run.yaml", **params):
    data = json.loads(json.dumps(CONFIG))
    data["params"].update(params)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def solve_cli(cfg, out, problem="coupled"):
    code = cli.main(["solve", "--config", cfg, "--out", str(out), "--problem", problem])
    rep = json.loads((out / "report.json").read_text())
    timing = json.loads((out / "timing.json").read_text())
    return code, rep, timing


def interior_positive(out, name):
    rows = np.loadtxt(out / f"{name}.csv", delimiter=",", skiprows=1)
    x, y, v = rows.T
    inner = (x > 0) & (x < 1) & (y > 0) & (y < 1)
    return bool(np.all(v[inner] > 0))


def test_criterion_1_modular_norm_suite(mesh, verdict):
    p, q, tol = PINNED.p, PINNED.q, 1e-10
    w = WeightField.bump(mesh, amplitude=2.0)
    rng = np.random.default_rng(2024)
    bad = []
    for k in range(100):
        u = random_shape(mesh, rng).scaled(10.0 ** rng.uniform(-2, 2))
        for v in (u, u.gradient()):
            tau = luxemburg_norm(v, w, p, q, rtol=1e-12)
            rho = modular(v, w, p, q)
            ok = abs(modular(v.scaled(1.0 / tau), w, p, q) - 1.0) <= tol           # (i)
            if abs(tau - 1) > tol and abs(rho - 1) > tol:
                ok &= (tau < 1) == (rho < 1)                                     # (ii)
            if tau < 1:
                ok &= tau ** q <= rho + tol and rho <= tau ** p + tol             # (iii)
            elif tau > 1:
                ok &= tau ** p <= rho * (1 + tol) and rho <= tau ** q * (1 + tol)  # (iv)
            if not ok:
                bad.append(k)
    verdict(1, not bad, f"modular/Luxemburg relations on 200 fields from 100 functions, "
                        f"{len(bad)} violations")


def test_criterion_2_derivative_oracles(mesh, weight, verdict):
    rng = np.random.default_rng(7)
    lam = 0.5
    worst = {"d1": 0.0, "d2": 0.0, "ksdp": 0.0, "sig": 0.0}
    for a0 in (0.0, 1.0):
        P = PINNED.replace(a0=a0)
        for _ in range(25):
            prof = E.fibering_profile(random_shape(mesh, rng), P, weight)
            for t in (0.5, 1.0, 2.0):
                s1, s2 = psi1_scale(prof, t, P, lam), psi2_scale(prof, t, P, lam)
                ts1, ts2 = psi_tilde_scales(prof, t, P, lam)
                f = lambda s: E.psi(prof, s, P, lam)
                ft = lambda s: E.psi_tilde(prof, s, P, lam)
                worst["d1"] = max(worst["d1"],
                                  abs(central1(f, t, 1e-6 * t) - E.psi_prime(prof, t, P, lam)) / s1,
                                  abs(central1(ft, t, 1e-6 * t) - E.psi_tilde_prime(prof, t, P, lam)) / ts1)
                worst["d2"] = max(worst["d2"],
                                  abs(central2(f, t, 1e-4 * t) - E.psi_second(prof, t, P, lam)) / s2,
                                  abs(central2(ft, t, 1e-4 * t) - E.psi_tilde_second(prof, t, P, lam)) / ts2)
                g = P.gamma
                p1 = E.psi_prime(prof, t, P, lam)
                worst["ksdp"] = max(worst["ksdp"], abs(
                    p1 - t ** -g * (E.sigma(prof, t, P) - lam * prof.I_singular)) / s1)
                rhs = t ** g * E.psi_second(prof, t, P, lam) + g * t ** (g - 1) * p1
                worst["sig"] = max(worst["sig"], abs(E.sigma_prime(prof, t, P) - rhs)
                                   / (t ** g * s2 + g * t ** (g - 1) * s1))
    ok = worst["d1"] <= 1e-6 and worst["d2"] <= 1e-4 and worst["ksdp"] <= 1e-10 and worst["sig"] <= 1e-10
    verdict(2, ok, "FD and identity errors on 50 shapes: " +
            ", ".join(f"{k}={v:.2e}" for k, v in worst.items()))


def test_criterion_3_reduced_closed_form(mesh, verdict):
    P = PINNED.replace(theta=1.0)
    w0 = WeightField.constant(mesh, 0.0)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        prof = E.fibering_profile(random_shape(mesh, rng), P, w0)
        ref = reduced_t_max(prof, P)
        worst = max(worst, abs(t_max(prof, P) - ref) / ref)
    verdict(3, worst <= 1e-8, f"reduced t_max vs closed form on 50 shapes, max rel err {worst:.2e}")


def test_criterion_4_fibering_structure(shapes, weight, thr, sobolev, verdict):
    lam = 0.5 * thr.Lambda2
    fails = []
    worst_res = 0.0
    for k, u in enumerate(shapes):
        prof = E.fibering_profile(u, PINNED, weight)
        roots = fiber_roots(prof, PINNED, lam)
        if roots is None:
            fails.append((k, "no roots"))
            continue
        t1, tm, t2 = roots
        tol = 1e-10 * max(1.0, lam * prof.I_singular)
        res = max(abs(E.sigma(prof, t, PINNED) - lam * prof.I_singular) for t in (t1, t2))
        worst_res = max(worst_res, res / tol * 1e-10)
        d2p = E.psi_second(E.fibering_profile(u.scaled(t1), PINNED, weight), 1.0, PINNED, lam)
        d2m = E.psi_second(E.fibering_profile(u.scaled(t2), PINNED, weight), 1.0, PINNED, lam)
        if not (t1 < tm < t2 and d2p > 0 > d2m and res <= tol
                and tm >= t_lower_bound(prof, PINNED, sobolev.S, 1.0)):
            fails.append((k, "structure"))
    verdict(4, not fails, f"lambda=Lambda2/2={lam:.4g}: 100 shapes, {len(fails)} failures, "
                          f"max scaled root residual {worst_res:.1e}")


def test_criterion_5_nzero_empty(shapes, weight, thr, verdict):
    lam = 0.5 * thr.Lambda1
    counts = {b: 0 for b in Branch}
    wrong = 0
    for u in shapes:
        for branch, want in (("plus", Branch.Nplus), ("minus", Branch.Nminus)):
            pt = project(u, branch, PINNED, weight, lam)
            got = classify(pt.w, PINNED, weight, 1e-8, lam)
            counts[got] += 1
            wrong += got is not want
    ok = counts[Branch.Nzero] == 0 and sum(counts.values()) == 200
    verdict(5, ok, f"lambda=Lambda1/2={lam:.4g}: 200 projected points, "
                   f"Nzero={counts[Branch.Nzero]}, misclassified={wrong}")


def test_criterion_6_gap_structure(shapes, weight, sobolev, verdict):
    msgs, ok = [], True
    for a0 in (0.0, 1.0):
        P = PINNED.replace(a0=a0)
        base = thresholds(P, sobolev.S, 1.0)
        for tag, lam in (("Lambda3/2", 0.5 * base.Lambda3), ("Lambda1/2", 0.5 * base.Lambda1)):
            t = thresholds(P.with_lambda(lam), sobolev.S, 1.0)
            plus = max(sum(gradient_norms(project(u, "plus", P, weight, lam).w, weight, P.p, P.q))
                       for u in shapes)
            minus = min(project(u, "minus", P, weight, lam).Pp for u in shapes)
            ok &= plus < t.D1 and minus > t.D2
            msgs.append(f"a0={a0:g} {tag}: max(Pp+Qq)={plus:.3g}<D1={t.D1:.3g}, "
                        f"min Pp={minus:.3g}>D2={t.D2:.3g}")
    verdict(6, ok, "; ".join(msgs))


@pytest.mark.parametrize("a0", [0.0, 1.0])
def test_criterion_7_two_solutions(tmp_path, sobolev, a0, verdict):
    out = tmp_path / "out"
    code, rep, timing = solve_cli(config_file(tmp_path, a0=a0), out)
    u, v = rep["u_plus"], rep["v_minus"]
    ok = (code == 0 and u["converged"] and v["converged"]
          and u["energy"] < 0 < v["energy"]
          and max(u["residual"], v["residual"]) <= 1e-4
          and interior_positive(out, "u_plus") and interior_positive(out, "v_minus")
          and max(timing["branches"].values()) <= 60.0)
    verdict(7, ok, f"a0={a0:g}: exit {code}, J(u)={u['energy']:.4g}, J(v)={v['energy']:.4g}, "
                   f"residuals {u['residual']:.1e}/{v['residual']:.1e}, "
                   f"branch times {timing['branches']['plus']:.1f}s/{timing['branches']['minus']:.1f}s")


@pytest.mark.parametrize("a0", [0.0, 1.0])
def test_criterion_8_separated(tmp_path, sobolev, a0, verdict):
    out = tmp_path / "sep"
    code, rep, _ = solve_cli(config_file(tmp_path, a0=a0), out, "separated")
    u, v = rep["u_plus"], rep["v_minus"]
    ok = (code == 0 and u["energy"] < 0 < v["energy"]
          and max(u["residual"], v["residual"]) <= 1e-4
          and interior_positive(out, "u_plus") and interior_positive(out, "v_minus"))
    detail = f"a0={a0:g}: separated J(w)={u['energy']:.4g} < 0 < J(z)={v['energy']:.4g}"

    cfg1 = config_file(tmp_path, "theta1.yaml", a0=a0, theta=1.0)
    _, c, _ = solve_cli(cfg1, tmp_path / "c1")
    _, s, _ = solve_cli(cfg1, tmp_path / "s1", "separated")
    diff = max(abs(c[k]["energy"] - s[k]["energy"]) / abs(c[k]["energy"])
               for k in ("u_plus", "v_minus"))
    ok &= diff <= 1e-8
    verdict(8, ok, detail + f"; theta=1 coupled vs separated rel diff {diff:.1e}")


def test_criterion_9_determinism(tmp_path, verdict):
    cfg = tmp_path / "det.yaml"
    data = json.loads(json.dumps(CONFIG))
    data["solver"] = {"restarts": 2}
    data["seed"] = 11
    cfg.write_text(yaml.safe_dump(data))
    runs = []
    for tag in ("a", "b"):
        fibering._cached_sobolev.cache_clear()  # recompute S from scratch each run
        out = tmp_path / tag
        for cmd in (["thresholds"], ["fiber", "--shape", "random_shape"], ["solve"]):
            assert cli.main([cmd[0], "--config", str(cfg), "--out", str(out)] + cmd[1:]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())
                     if p.name != "timing.json"})
    a, b = runs
    same = a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    verdict(9, same, f"two seeded pipeline runs, {len(a)} artifacts compared: "
                     + ("byte-identical" if same else
                        "differ in " + ", ".join(k for k in a if a.get(k) != b.get(k))))
