"""P1 discretization of W_0^{1,H} on a rectangle.

Gradients are constant per triangle, so the gradient integrals are exact
element by element. Zeroth-order terms use mass-lumped vertex quadrature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from . import kernels

__all__ = [
    "Mesh", "GridFunction", "GradientField", "WeightField",
    "gradient_norms", "lp_integral", "modular", "luxemburg_norm",
    "sine_bump", "random_bump", "random_shape",
]


class MeshMismatch(ValueError):
    pass


class Mesh:
    """Uniform triangulation of [0, Lx] x [0, Ly], each cell cut along its
    (i, j) -> (i+1, j+1) diagonal. Nodes are numbered row-major."""

    def __init__(self, Lx: float = 1.0, Ly: float = 1.0, nx: int = 64, ny: int = 64):
        if nx < 1 or ny < 1 or Lx <= 0 or Ly <= 0:
            raise ValueError("mesh needs positive side lengths and cell counts")
        self.Lx, self.Ly, self.nx, self.ny = float(Lx), float(Ly), int(nx), int(ny)
        xs = np.linspace(0.0, self.Lx, self.nx + 1)
        ys = np.linspace(0.0, self.Ly, self.ny + 1)
        X, Y = np.meshgrid(xs, ys)  # row j holds y = ys[j]
        self.x = X.ravel()
        self.y = Y.ravel()
        self.nnodes = self.x.size

        ii, jj = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        n00 = (jj * (self.nx + 1) + ii).ravel()
        n10 = n00 + 1
        n01 = n00 + self.nx + 1
        n11 = n01 + 1
        lower = np.stack([n00, n10, n11], axis=1)
        upper = np.stack([n00, n11, n01], axis=1)
        # interleave so cell c owns elements 2c and 2c+1
        self.tri = np.empty((2 * n00.size, 3), dtype=np.int64)
        self.tri[0::2] = lower
        self.tri[1::2] = upper
        self.nelem = self.tri.shape[0]

        x0, x1, x2 = (self.x[self.tri[:, k]] for k in range(3))
        y0, y1, y2 = (self.y[self.tri[:, k]] for k in range(3))
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        self.area = 0.5 * np.abs(det)
        self.bx = np.stack([y1 - y2, y2 - y0, y0 - y1], axis=1) / det[:, None]
        self.by = np.stack([x2 - x1, x0 - x2, x1 - x0], axis=1) / det[:, None]
        self.cx = (x0 + x1 + x2) / 3.0
        self.cy = (y0 + y1 + y2) / 3.0

        self.mass = np.bincount(
            self.tri.ravel(), weights=np.repeat(self.area / 3.0, 3), minlength=self.nnodes
        )
        i_of = np.tile(np.arange(self.nx + 1), self.ny + 1)
        j_of = np.repeat(np.arange(self.ny + 1), self.nx + 1)
        self.boundary = (i_of == 0) | (i_of == self.nx) | (j_of == 0) | (j_of == self.ny)
        self.interior = np.flatnonzero(~self.boundary)
        self._node_to_dof = np.full(self.nnodes, -1, dtype=np.int64)
        self._node_to_dof[self.interior] = np.arange(self.interior.size)

    @property
    def key(self) -> tuple:
        return (self.Lx, self.Ly, self.nx, self.ny)

    @property
    def volume(self) -> float:
        return self.Lx * self.Ly

    def __repr__(self) -> str:
        return f"Mesh(Lx={self.Lx:g}, Ly={self.Ly:g}, nx={self.nx}, ny={self.ny})"

    def same_as(self, other: "Mesh") -> bool:
        return self is other or self.key == other.key

    @cached_property
    def _local_stiffness(self) -> np.ndarray:
        return self.area[:, None, None] * (
            self.bx[:, :, None] * self.bx[:, None, :] + self.by[:, :, None] * self.by[:, None, :]
        )

    @cached_property
    def _stiffness_pattern(self):
        dof = self._node_to_dof[self.tri]
        rows = np.repeat(dof, 3, axis=1).reshape(-1, 3, 3)
        cols = np.tile(dof, (1, 3)).reshape(-1, 3, 3)
        keep = (rows >= 0) & (cols >= 0)
        return rows[keep], cols[keep], keep

    def stiffness(self, coef: np.ndarray | None = None) -> sp.csc_matrix:
        """Interior-dof matrix of sum_e coef_e * area_e grad(phi_k).grad(phi_l)."""
        rows, cols, keep = self._stiffness_pattern
        loc = self._local_stiffness
        if coef is not None:
            loc = coef[:, None, None] * loc
        n = self.interior.size
        return sp.coo_matrix((loc[keep], (rows, cols)), shape=(n, n)).tocsc()

    @cached_property
    def laplace_factor(self):
        from scipy.sparse.linalg import splu

        return splu(self.stiffness())


@dataclass
class GridFunction:
    """Nodal values of a P1 function with zero trace."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.nnodes,):
            raise ValueError(f"expected {self.mesh.nnodes} nodal values, got shape {v.shape}")
        if np.any(v[self.mesh.boundary] != 0.0):
            raise ValueError("grid function must vanish at every boundary node")
        self.values = v

    @classmethod
    def zeros(cls, mesh: Mesh) -> "GridFunction":
        return cls(mesh, np.zeros(mesh.nnodes))

    @classmethod
    def from_callable(cls, mesh: Mesh, f: Callable) -> "GridFunction":
        v = np.asarray(f(mesh.x, mesh.y), dtype=float) * np.ones(mesh.nnodes)
        v[mesh.boundary] = 0.0
        return cls(mesh, v)

    @classmethod
    def from_interior(cls, mesh: Mesh, vals: np.ndarray) -> "GridFunction":
        v = np.zeros(mesh.nnodes)
        v[mesh.interior] = vals
        return cls(mesh, v)

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.mesh, c * self.values)

    def copy(self) -> "GridFunction":
        return GridFunction(self.mesh, self.values.copy())

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def gradient(self) -> "GradientField":
        m = self.mesh
        gx, gy = kernels.element_gradients(self.values, m.tri, m.bx, m.by)
        return GradientField(m, gx, gy)

    def to_csv(self, path) -> None:
        m = self.mesh
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "value"])
            for x, y, v in zip(m.x, m.y, self.values):
                w.writerow([f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, mesh: Mesh, path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(mesh, np.array([float(r["value"]) for r in rows]))


@dataclass
class GradientField:
    """Per-element constant vector field (typically the gradient of a P1 function)."""

    mesh: Mesh
    gx: np.ndarray
    gy: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy)

    def scaled(self, c: float) -> "GradientField":
        return GradientField(self.mesh, c * self.gx, c * self.gy)


@dataclass
class WeightField:
    """Per-element values of the modulating coefficient a(x) >= 0.

    ``spec`` is the construction recipe, kept for serialization.
    """

    mesh: Mesh
    values: np.ndarray
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.nelem,):
            raise ValueError("weight needs one value per element")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("weight must be finite and nonnegative")
        self.values = v

    @property
    def bound(self) -> float:
        return float(self.values.max(initial=0.0))

    @cached_property
    def nodal(self) -> np.ndarray:
        """Lumped-mass average of the element values around each node."""
        m = self.mesh
        acc = np.bincount(m.tri.ravel(), weights=np.repeat(m.area * self.values / 3.0, 3),
                          minlength=m.nnodes)
        return acc / m.mass

    @classmethod
    def constant(cls, mesh: Mesh, c: float = 1.0) -> "WeightField":
        return cls(mesh, np.full(mesh.nelem, float(c)), {"kind": "constant", "value": float(c)})

    @classmethod
    def indicator(cls, mesh: Mesh, c: float = 1.0, x0=0.25, x1=0.75, y0=0.25, y1=0.75):
        inside = (mesh.cx >= x0) & (mesh.cx <= x1) & (mesh.cy >= y0) & (mesh.cy <= y1)
        spec = {"kind": "indicator", "value": float(c), "x0": x0, "x1": x1, "y0": y0, "y1": y1}
        return cls(mesh, np.where(inside, float(c), 0.0), spec)

    @classmethod
    def bump(cls, mesh: Mesh, amplitude: float = 1.0, center=(0.5, 0.5), radius: float = 0.35):
        """C-infinity radial bump equal to ``amplitude`` at the center, sampled at centroids."""
        s2 = ((mesh.cx - center[0]) ** 2 + (mesh.cy - center[1]) ** 2) / radius ** 2
        vals = np.zeros(mesh.nelem)
        ins = s2 < 1.0
        vals[ins] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s2[ins]))
        spec = {"kind": "bump", "amplitude": float(amplitude),
                "center": [float(center[0]), float(center[1])], "radius": float(radius)}
        return cls(mesh, vals, spec)

    @classmethod
    def from_spec(cls, mesh: Mesh, spec: dict) -> "WeightField":
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "constant":
            return cls.constant(mesh, spec.pop("value", 1.0), **spec)
        if kind == "indicator":
            return cls.indicator(mesh, spec.pop("value", 1.0), **spec)
        if kind == "bump":
            return cls.bump(mesh, **spec)
        raise ValueError(f"unknown weight kind {kind!r} (constant|indicator|bump)")


def _check_same(mesh_a: Mesh, mesh_b: Mesh) -> None:
    if not mesh_a.same_as(mesh_b):
        raise MeshMismatch(f"{mesh_a!r} vs {mesh_b!r}")


def gradient_norms(u: GridFunction, w: WeightField, p: float, q: float) -> tuple[float, float]:
    """Return (sum area |grad u|^p, sum area a |grad u|^q) over all triangles."""
    _check_same(u.mesh, w.mesh)
    m = u.mesh
    return kernels.gradient_power_sums(u.values, m.tri, m.bx, m.by, m.area, w.values, p, q)


def lp_integral(u: GridFunction, s: float) -> float:
    """Lumped quadrature of |u|^s."""
    if s <= 0:
        raise ValueError(f"exponent must be positive, got {s}")
    return kernels.lumped_power_sum(u.values, u.mesh.mass, s)


Field = Union[GridFunction, GradientField]


def _modular_parts(v: Field, w: WeightField, p: float, q: float) -> tuple[float, float]:
    _check_same(v.mesh, w.mesh)
    m = v.mesh
    if isinstance(v, GradientField):
        g = v.magnitude
        return float(np.sum(m.area * g ** p)), float(np.sum(m.area * w.values * g ** q))
    a = np.abs(v.values)
    return float(np.sum(m.mass * a ** p)), float(np.sum(m.mass * w.nodal * a ** q))


def modular(v: Field, w: WeightField, p: float, q: float) -> float:
    """rho_H(v) = int |v|^p + a |v|^q; element quadrature for gradient fields,
    lumped vertex quadrature for nodal functions."""
    P, Q = _modular_parts(v, w, p, q)
    return P + Q


def luxemburg_norm(v: Field, w: WeightField, p: float, q: float, rtol: float = 1e-12) -> float:
    """Unique tau with rho_H(v / tau) = 1, by bisection (0 for v == 0)."""
    P, Q = _modular_parts(v, w, p, q)
    rho = P + Q
    if rho == 0.0:
        return 0.0

    def excess(tau):
        return P * tau ** -p + Q * tau ** -q - 1.0

    lo = rho ** (1.0 / p) / 2.0
    hi = 2.0 * max(1.0, rho ** (1.0 / q)) + 2.0 * rho ** (1.0 / p)
    while excess(lo) <= 0.0:
        lo /= 2.0
    while excess(hi) > 0.0:
        hi *= 2.0
    while True:
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * mid or mid in (lo, hi):
            return mid
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid


# -- initializers ----------------------------------------------------------

def sine_bump(mesh: Mesh) -> GridFunction:
    return GridFunction.from_callable(
        mesh, lambda x, y: np.sin(math.pi * x / mesh.Lx) * np.sin(math.pi * y / mesh.Ly)
    )


def random_bump(mesh: Mesh, rng: np.random.Generator) -> GridFunction:
    """Positive Gaussian bump with random center and width, times the sine envelope."""
    cx = rng.uniform(0.2, 0.8) * mesh.Lx
    cy = rng.uniform(0.2, 0.8) * mesh.Ly
    width = rng.uniform(0.05, 0.3) * min(mesh.Lx, mesh.Ly)
    env = sine_bump(mesh).values
    g = np.exp(-((mesh.x - cx) ** 2 + (mesh.y - cy) ** 2) / (2.0 * width ** 2))
    return GridFunction(mesh, env * g)


def random_shape(mesh: Mesh, rng: np.random.Generator, nbumps: int = 3,
                 noise: float = 0.1) -> GridFunction:
    """Nonnegative random shape: a few weighted bumps plus mild nodal noise."""
    v = np.zeros(mesh.nnodes)
    for _ in range(nbumps):
        v += rng.uniform(0.2, 1.0) * random_bump(mesh, rng).values
    env = sine_bump(mesh).values
    v *= 1.0 + noise * rng.uniform(-1.0, 1.0, mesh.nnodes)
    v = np.maximum(v, 0.0) + 1e-3 * env
    v[mesh.boundary] = 0.0
    return GridFunction(mesh, v)
