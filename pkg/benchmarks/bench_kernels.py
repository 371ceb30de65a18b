"""Compare the numba and numpy element kernels.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 20] [--solve]

Kernel timings import both backends directly. ``--solve`` additionally times
one plus-branch descent per backend in a subprocess, selected through the
KIRCHHOFF_NEHARI_KERNELS environment flag.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from kirchhoff_nehari import _kernels_numba as nb
from kirchhoff_nehari import _kernels_numpy as npk
from kirchhoff_nehari.space import Mesh, WeightField, random_shape

SOLVE_SNIPPET = """
import time
from kirchhoff_nehari import kernels
from kirchhoff_nehari.space import Mesh, WeightField
from kirchhoff_nehari.params import PINNED
from kirchhoff_nehari.nehari_solver import minimize_branch, initial_shape, SolveOptions
m = Mesh(nx={n}, ny={n}); w = WeightField.bump(m); P = PINNED.with_lambda(0.0789)
u = initial_shape(m, w, P)
minimize_branch(u, "plus", P, w, SolveOptions(max_iter=2))  # warm up / compile
t = time.perf_counter()
pt = minimize_branch(u, "plus", P, w, SolveOptions())
print(kernels.BACKEND, time.perf_counter() - t, pt.iterations, repr(pt.energy))
"""


def kernel_calls(mod, m, u, a):
    return {
        "element_gradients": lambda: mod.element_gradients(u, m.tri, m.bx, m.by),
        "gradient_power_sums": lambda: mod.gradient_power_sums(u, m.tri, m.bx, m.by, m.area,
                                                               a, 1.5, 1.8),
        "assemble_flux": lambda: mod.assemble_flux(u, m.tri, m.bx, m.by, m.area, a, 1.5, 1.8,
                                                   1.0, 1.0, m.nnodes),
        "lumped_power_sum": lambda: mod.lumped_power_sum(u, m.mass, 0.5),
    }


def bench(sizes, repeat):
    print(f"{'n':>5} {'kernel':<22} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for n in sizes:
        m = Mesh(nx=n, ny=n)
        u = random_shape(m, np.random.default_rng(0)).values
        a = WeightField.bump(m).values
        fast, slow = kernel_calls(nb, m, u, a), kernel_calls(npk, m, u, a)
        for name in fast:
            fast[name]()  # compile outside the timing
            np.testing.assert_allclose(np.asarray(fast[name](), dtype=float),
                                       np.asarray(slow[name](), dtype=float), rtol=1e-10, atol=1e-13)
            tn = min(timeit.repeat(fast[name], number=1, repeat=repeat)) * 1e3
            tp = min(timeit.repeat(slow[name], number=1, repeat=repeat)) * 1e3
            print(f"{n:>5} {name:<22} {tp:>11.3f} {tn:>11.3f} {tp / tn:>7.1f}x")


def bench_solve(n):
    for backend in ("numpy", "numba"):
        env = dict(os.environ, KIRCHHOFF_NEHARI_KERNELS=backend)
        res = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        name, secs, iters, energy = res.stdout.split()
        print(f"solve n={n} backend={name}: {float(secs):.2f} s, {iters} iterations, J={energy}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--solve", action="store_true")
    args = ap.parse_args()
    bench(args.sizes, args.repeat)
    if args.solve:
        bench_solve(args.sizes[0])
