"""The numba and numpy kernels must agree; both are imported directly."""

import numpy as np
import pytest

from kirchhoff_nehari import _kernels_numba as nb
from kirchhoff_nehari import _kernels_numpy as npk
from kirchhoff_nehari import kernels
from kirchhoff_nehari.space import Mesh, WeightField, random_shape


@pytest.fixture(scope="module")
def setup():
    m = Mesh(nx=20, ny=13, Lx=1.3)
    u = random_shape(m, np.random.default_rng(5)).values
    u[m.interior[::7]] = 0.0  # exercise zero-gradient elements too
    a = WeightField.bump(m).values
    return m, u, a


def test_backend_flag():
    assert kernels.BACKEND in ("numba", "numpy")
    assert kernels.ENV_FLAG == "KIRCHHOFF_NEHARI_KERNELS"


def test_gradients_agree(setup):
    m, u, _ = setup
    for a, b in zip(nb.element_gradients(u, m.tri, m.bx, m.by),
                    npk.element_gradients(u, m.tri, m.bx, m.by)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_power_sums_agree(setup):
    m, u, a = setup
    x = nb.gradient_power_sums(u, m.tri, m.bx, m.by, m.area, a, 1.5, 1.8)
    y = npk.gradient_power_sums(u, m.tri, m.bx, m.by, m.area, a, 1.5, 1.8)
    np.testing.assert_allclose(x, y, rtol=1e-12)
    assert nb.lumped_power_sum(u, m.mass, 0.5) == pytest.approx(
        npk.lumped_power_sum(u, m.mass, 0.5), rel=1e-12)


def test_flux_agrees(setup):
    m, u, a = setup
    x = nb.assemble_flux(u, m.tri, m.bx, m.by, m.area, a, 1.5, 1.8, 0.7, 1.3, m.nnodes)
    y = npk.assemble_flux(u, m.tri, m.bx, m.by, m.area, a, 1.5, 1.8, 0.7, 1.3, m.nnodes)
    np.testing.assert_allclose(x, y, rtol=1e-11, atol=1e-13)


def test_flux_is_gradient_of_energy(setup):
    """Directional derivative of Pp/p + Qq/q equals <flux, h>."""
    m, _, a = setup
    # nodal zeros give near-zero gradients where |g|^p is not C^2, so use a fresh shape
    u = random_shape(m, np.random.default_rng(6)).values
    h = np.random.default_rng(2).normal(size=m.nnodes)
    h[m.boundary] = 0.0

    def E(v):
        Pp, Qq = npk.gradient_power_sums(v, m.tri, m.bx, m.by, m.area, a, 1.5, 1.8)
        return Pp / 1.5 + Qq / 1.8

    eps = 1e-6
    fd = (E(u + eps * h) - E(u - eps * h)) / (2 * eps)
    fl = npk.assemble_flux(u, m.tri, m.bx, m.by, m.area, a, 1.5, 1.8, 1.0, 1.0, m.nnodes)
    assert fl @ h == pytest.approx(fd, rel=1e-6)
