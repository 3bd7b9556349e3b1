import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hodge_frobenius.dec import (DiscreteForm, Grid2, codiff, d, integrate, l2_inner, q_field,
                                 sample_one_form, sample_zero_form, star, sup_norm, wedge)
from hodge_frobenius.errors import DegreeError, ShapeError

GRID = Grid2.square(0.0, 1.0, 9)
values = arrays(np.float64, GRID.shape, elements=st.floats(-1e3, 1e3))


@settings(max_examples=50, deadline=None)
@given(u=arrays(np.float64, GRID.shape, elements=st.floats(1.0, 2.0, exclude_max=True)))
def test_dd_vanishes_bitwise(u):
    assert np.all(d(d(DiscreteForm.zero_form(GRID, u))).data[0] == 0.0)


@settings(max_examples=50, deadline=None)
@given(a=values, b=values)
def test_star_star_sign(a, b):
    om = DiscreteForm.one_form_vertex(GRID, a, b)
    for x, y in zip(star(star(om)).components(), om.components()):
        assert np.array_equal(x, -y)
    f = DiscreteForm.zero_form(GRID, a)
    assert np.array_equal(star(star(f)).components()[0], a)


@settings(max_examples=30, deadline=None)
@given(a=values, b=values, c=values)
def test_codiff_is_adjoint_of_d_on_functions(a, b, c):
    a = np.where(GRID.interior_mask(2), a, 0.0)
    f = DiscreteForm.zero_form(GRID, a)
    om = DiscreteForm.one_form_vertex(GRID, b, c)
    lhs, rhs = l2_inner(d(f), om), l2_inner(f, codiff(om))
    scale = np.abs(a).max() * max(np.abs(b).max(), np.abs(c).max())
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, scale)


def test_d_of_linear_function_is_exact():
    f = sample_zero_form(GRID, lambda x, y: 3.0 * x - 2.0 * y)
    cx, cy = d(f).components()
    np.testing.assert_allclose(cx, 3.0, rtol=1e-13)
    np.testing.assert_allclose(cy, -2.0, rtol=1e-13)


def test_circulation_of_rotation_field():
    grid = Grid2.square(-1.0, 1.0, 17)
    om = sample_one_form(grid, lambda x, y: -y, lambda x, y: x)
    # d(-y dx + x dy) = 2 dx^dy
    np.testing.assert_allclose(d(om).components()[0], 2.0, rtol=1e-12)


def test_wedge_and_q_field():
    grid = Grid2.square(0.0, 1.0, 5)
    X, Y = grid.mesh()
    a = DiscreteForm.one_form_vertex(grid, X, Y)
    b = DiscreteForm.one_form_vertex(grid, Y, -X)
    np.testing.assert_allclose(wedge(a, b).data[0], -(X * X + Y * Y))
    assert np.all(wedge(a, a).data[0] == 0.0)
    np.testing.assert_allclose(q_field(a).data[0], X * X + Y * Y)
    with pytest.raises(DegreeError):
        wedge(wedge(a, b), a)


def test_integrate_constant_is_area():
    grid = Grid2.from_bounds(0.0, 2.0, -1.0, 0.5, 11, 7)
    one = DiscreteForm.zero_form(grid, np.ones(grid.shape))
    assert integrate(one) == pytest.approx(3.0, rel=1e-14)


def test_shape_and_degree_errors():
    with pytest.raises(ShapeError):
        DiscreteForm.zero_form(GRID, np.zeros((3, 3)))
    with pytest.raises(DegreeError):
        d(d(d(DiscreteForm.zero_form(GRID, np.zeros(GRID.shape)))))
    other = Grid2.square(0.0, 2.0, 9)
    with pytest.raises(ShapeError):
        DiscreteForm.zero_form(GRID, np.zeros(GRID.shape)) + \
            DiscreteForm.zero_form(other, np.zeros(other.shape))


def test_sup_norm_mask():
    arr = np.zeros(GRID.shape)
    arr[0, 0] = 5.0
    f = DiscreteForm.zero_form(GRID, arr)
    assert sup_norm(f) == 5.0
    assert sup_norm(f, GRID.interior_mask(1)) == 0.0
