import math

import numpy as np
import pytest

from hodge_frobenius import fixtures
from hodge_frobenius.analysis import (gamma_smallness, mean_value_check, ring_maxima,
                                      singularity_probe, theorem5_ratio)
from hodge_frobenius.dec import DiscreteForm, FrobeniusCoefficient, Grid2, sample_zero_form
from hodge_frobenius.density import MassDensity
from hodge_frobenius.errors import GeometryError
from hodge_frobenius.solver import solve


@pytest.fixture(scope="module")
def uniform_report():
    spec, _ = fixtures.uniform_flow(33, MassDensity.minimal_surface(), bounds=(-1.0, 1.0))
    return solve(spec)


@pytest.fixture(scope="module")
def scherk_report():
    spec, _ = fixtures.scherk(33)
    return solve(spec)


def test_mean_value_constant_field(uniform_report):
    rep = mean_value_check(uniform_report, MassDensity.minimal_surface(), (0.0, 0.0), 0.5, 0.5)
    assert rep.C_emp == pytest.approx(1.0, abs=1e-12)
    assert rep.scaled_integral == pytest.approx(math.pi * rep.mean_outer, rel=0.05)
    assert not rep.degenerate


def test_mean_value_zero_field():
    grid = Grid2.square(-1.0, 1.0, 17)
    spec = fixtures._spec(grid, MassDensity.constant(1.0), np.zeros(grid.shape))
    rep = mean_value_check(solve(spec), MassDensity.constant(1.0), (0.0, 0.0), 0.5, 0.5)
    assert rep.degenerate and rep.C_emp == 1.0


def test_mean_value_scherk_bounded(scherk_report):
    rep = mean_value_check(scherk_report, MassDensity.minimal_surface(), (0.0, 0.0), 0.5, 0.5)
    assert 0.0 < rep.C_emp < 10.0


def test_mean_value_disc_must_fit(uniform_report):
    with pytest.raises(GeometryError):
        mean_value_check(uniform_report, MassDensity.minimal_surface(), (0.9, 0.0), 0.5, 0.5)
    with pytest.raises(ValueError):
        mean_value_check(uniform_report, MassDensity.minimal_surface(), (0.0, 0.0), 0.5, 1.0)


def test_theorem5_ratio_finite(scherk_report):
    ratio = theorem5_ratio(scherk_report, MassDensity.minimal_surface())
    assert 0.0 < ratio < math.inf


def test_ring_maxima_uniform_constant():
    spec, _ = fixtures.punctured_uniform(33)
    rep = solve(spec)
    vals = ring_maxima(rep, spec.density, fixtures.RING_RADII)
    np.testing.assert_allclose(vals, vals[0], rtol=1e-8)


def test_singularity_probe_negative_control():
    rep = singularity_probe(lambda n: fixtures.punctured_harmonic(n)[0],
                            ring_radii=fixtures.PROBE_RINGS["punctured_harmonic"],
                            resolutions=(33, 65))
    assert abs(rep.growth_exponent() + 2.0) <= 0.4
    assert len(rep.history) == 2


def test_gamma_smallness_linear_eta_is_exact():
    grid = Grid2.square(-1.0, 1.0, 33)
    eta = sample_zero_form(grid, lambda x, y: 0.3 * x + 0.4 * y)
    f, l1, exponent = gamma_smallness(FrobeniusCoefficient.exact(eta))
    np.testing.assert_allclose(f.data[0], 0.25, rtol=1e-12)
    assert l1 == pytest.approx(0.25 * 4.0, rel=1e-12)
    assert exponent == pytest.approx(2.0, abs=0.15)


def test_gamma_smallness_vanishing():
    grid = Grid2.square(-1.0, 1.0, 9)
    eta = DiscreteForm.zero_form(grid, np.zeros(grid.shape))
    f, l1, exponent = gamma_smallness(eta)
    assert l1 == 0.0 and exponent == math.inf
