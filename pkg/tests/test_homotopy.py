import numpy as np
import pytest

from hodge_frobenius.dec import DiscreteForm, Grid2, d, sample_one_form, sample_zero_form, sup_norm
from hodge_frobenius.errors import DomainError
from hodge_frobenius.homotopy import RadialHomotopyContext, homotopy, recursive_decompose, split

GRID = Grid2.square(-1.0, 1.0, 65)
CTX = RadialHomotopyContext(nodes=16)
INNER = GRID.interior_mask(2)


def test_homotopy_inverts_d_on_functions():
    f = sample_zero_form(GRID, lambda x, y: np.sin(x + 0.5 * y) + x * y)
    # H(df) = f - f(center)
    err = sup_norm(homotopy(d(f), CTX) - f, INNER)
    assert err <= GRID.hx


def test_homotopy_of_area_form():
    area = DiscreteForm.two_form_vertex(GRID, np.ones(GRID.shape))
    H = homotopy(area, CTX)
    X, Y = GRID.mesh()
    cx, cy = H.components()
    # H(dx^dy) = (x dy - y dx) / 2
    np.testing.assert_allclose(cx[INNER], -0.5 * Y[INNER], atol=GRID.hx)
    np.testing.assert_allclose(cy[INNER], 0.5 * X[INNER], atol=GRID.hx)


def test_split_of_closed_form_is_exact():
    om = sample_one_form(GRID, lambda x, y: np.cos(x) * y, lambda x, y: np.sin(x))
    exact, anti = split(om, CTX)
    assert sup_norm(anti, INNER) <= GRID.hx
    assert sup_norm(exact - om, INNER) <= GRID.hx


def test_homotopy_annihilates_radial_part():
    R = sample_one_form(GRID, lambda x, y: -y, lambda x, y: x)
    assert sup_norm(homotopy(R, CTX), INNER) <= 1e-12


def test_recursive_decomposition_of_gradient_recursive_form():
    eta = sample_zero_form(GRID, lambda x, y: 0.3 * x - 0.2 * y)
    u = sample_zero_form(GRID, lambda x, y: x + 0.5 * y * y)
    om = DiscreteForm.one_form_vertex(
        GRID, *(np.exp(eta.data[0]) * c for c in d(u).components()))
    dec = recursive_decompose(d(eta), om, CTX)
    e, theta, v = dec
    assert sup_norm(theta, INNER) <= GRID.hx
    assert sup_norm(e - eta, INNER) <= GRID.hx


def test_non_star_shaped_mask_raises():
    mask = np.ones(GRID.shape, dtype=bool)
    X, Y = GRID.mesh()
    mask[(np.abs(X - 0.5) < 0.2) & (np.abs(Y) < 0.2)] = False
    ctx = RadialHomotopyContext(nodes=16, mask=mask)
    om = sample_one_form(GRID, lambda x, y: x, lambda x, y: y)
    with pytest.raises(DomainError):
        homotopy(om, ctx)


def test_too_few_nodes():
    with pytest.raises(ValueError):
        RadialHomotopyContext(nodes=4)
