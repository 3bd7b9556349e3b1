import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hodge_frobenius import backlund, fixtures
from hodge_frobenius.dec import DiscreteForm, Grid2, d, sample_zero_form
from hodge_frobenius.density import MassDensity, dual_minimal_surface
from hodge_frobenius.errors import DualityViolation, HypothesisViolation
from hodge_frobenius.solver import flux_form, solve

GRID = Grid2.square(0.0, 1.0, 17)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-1, 1))
def test_recover_potential_exact_for_quadratics(a, b, c):
    f = sample_zero_form(GRID, lambda x, y: a * x + b * y + c * x * y)
    v = backlund.recover_potential(d(f))
    np.testing.assert_allclose(v.data[0], f.data[0] - f.data[0].flat[0], atol=1e-10)


def test_uniform_eikonal_pair():
    X, Y = GRID.mesh()
    u = DiscreteForm.zero_form(GRID, 2.0 * X)
    v, res = backlund.eikonal_forward(u, 1.5)
    # |dv|^2 = |du|^2 + nu^2 and dv is orthogonal to du
    gap = v.data[0] - math.sqrt(4.0 + 2.25) * Y
    assert np.max(np.abs(gap - gap.flat[0])) <= 1e-12
    assert res <= 1e-12
    assert max(backlund.check_eikonal_pair(u, v, 1.5)) <= 1e-12


@pytest.mark.parametrize("sign", [1, -1])
def test_forward_inverse_roundtrip(sign):
    X, Y = GRID.mesh()
    u = DiscreteForm.zero_form(GRID, X + 0.3 * Y * Y + 0.5)
    v, _ = backlund.eikonal_forward(u, 0.8, sign)
    u_back, _ = backlund.eikonal_inverse(v, 0.8, sign)
    err = np.max(np.abs(np.stack(d(u_back).components()) - np.stack(d(u).components())))
    assert err <= 5.0 * GRID.hx


def test_eikonal_hypotheses():
    flat = DiscreteForm.zero_form(GRID, np.ones(GRID.shape))
    with pytest.raises(HypothesisViolation):
        backlund.eikonal_forward(flat, 1.0)
    X, _ = GRID.mesh()
    slow = DiscreteForm.zero_form(GRID, 0.5 * X)
    with pytest.raises(HypothesisViolation):
        backlund.eikonal_inverse(slow, 1.0)


def test_duality_on_scherk():
    spec, _ = fixtures.scherk(33)
    rep = solve(spec)
    omega = flux_form(rep.u, spec.eta)
    pair = backlund.hodge_dual(omega, spec.eta, spec.density, dual_minimal_surface())
    assert pair.max_xi_sq < 1.0
    assert pair.pointwise_product_error <= 1e-12
    assert np.array_equal(pair.eta_hat.data[0], -spec.eta.data[0])
    back = backlund.hodge_dual(pair.xi, pair.eta_hat, dual_minimal_surface(), spec.density)
    for a, b in zip(back.xi.components(), omega.components()):
        np.testing.assert_allclose(a, -b, atol=1e-12)


def test_duality_violation():
    omega = DiscreteForm.one_form_vertex(GRID, np.full(GRID.shape, 2.0), np.zeros(GRID.shape))
    eta = DiscreteForm.zero_form(GRID, np.zeros(GRID.shape))
    # the dual of the minimal surface density pushed past its domain |xi|^2 < 1
    with pytest.raises(DualityViolation):
        backlund.hodge_dual(omega, eta, MassDensity.constant(1.0), dual_minimal_surface())
