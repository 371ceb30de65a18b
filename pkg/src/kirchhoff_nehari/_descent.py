"""Shared pieces of the preconditioned descents (Sobolev quotient and Nehari branches)."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .space import Mesh

GRAD_FLOOR_REL = 1e-3


def flux(mesh: Mesh, u: np.ndarray, aw: np.ndarray, p, q, cp, cq) -> np.ndarray:
    return kernels.assemble_flux(u, mesh.tri, mesh.bx, mesh.by, mesh.area, aw,
                                 p, q, cp, cq, mesh.nnodes)


def metric_coefficients(mesh: Mesh, u: np.ndarray, aw, p, q, cp, cq) -> np.ndarray:
    """Per-element coefficient of the frozen-gradient (Kacanov) metric.

    |grad u| is floored relative to its maximum so p < 2 stays bounded.
    """
    gx, gy = kernels.element_gradients(u, mesh.tri, mesh.bx, mesh.by)
    g = np.hypot(gx, gy)
    gmax = g.max(initial=0.0)
    if gmax == 0.0:
        return np.full(mesh.nelem, cp * (p - 1.0))
    gf = np.maximum(g, GRAD_FLOOR_REL * gmax)
    return cp * (p - 1.0) * gf ** (p - 2.0) + cq * (q - 1.0) * aw * gf ** (q - 2.0)


def metric_solve(mesh: Mesh, coef: np.ndarray, diag: np.ndarray | None,
                 rhs: np.ndarray) -> np.ndarray:
    """Solve (K(coef) + diag) x = rhs on interior dofs; returns a nodal vector."""
    K = mesh.stiffness(coef)
    if diag is not None:
        K = K + sp.diags(diag[mesh.interior], format="csc")
    x = np.zeros(mesh.nnodes)
    x[mesh.interior] = splu(K.tocsc()).solve(rhs[mesh.interior])
    return x


def dual_norm(mesh: Mesh, vec: np.ndarray) -> float:
    """sqrt(v^T K^-1 v), K the Dirichlet stiffness matrix (H^1_0 Riesz map)."""
    b = vec[mesh.interior]
    return float(np.sqrt(max(b @ mesh.laplace_factor.solve(b), 0.0)))
