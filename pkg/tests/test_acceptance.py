"""Acceptance criteria, one test per item.

Each test recomputes its quantities from the library rather than reading the
verify suite's verdicts; tolerances are the contract values.
"""

import math

import numpy as np
import pytest

from hodge_frobenius import backlund, fixtures
from hodge_frobenius.analysis import mean_value_check, singularity_probe
from hodge_frobenius.cli import main
from hodge_frobenius.dec import (DiscreteForm, FrobeniusCoefficient, Grid2, codiff, d, l2_inner,
                                 sample_one_form, sample_two_form, star, sup_norm)
from hodge_frobenius.density import (MassDensity, check_hypotheses, dual_minimal_surface,
                                     lemma2_constant, sonic_q)
from hodge_frobenius.homotopy import RadialHomotopyContext, homotopy, split
from hodge_frobenius.solver import (energy, energy_gradient, flux_form, frobenius_residual, solve,
                                    solve_linear)
from hodge_frobenius.verify import energy_monotone, smooth_modes

RESOLUTIONS = (33, 65, 129)
MIN_RATE = 1.8


def ratios(errors):
    return [a / b for a, b in zip(errors, errors[1:])]


def decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


@pytest.fixture(scope="module")
def scherk_runs():
    out = {}
    for n in RESOLUTIONS:
        spec, exact = fixtures.scherk(n)
        out[n] = (spec, exact, solve(spec))
    return out


def test_01_dec_identities():
    rng = np.random.default_rng(1)
    grid = Grid2.square(0.0, 1.0, 33)
    for _ in range(10):
        f = DiscreteForm.zero_form(grid, 1.0 + rng.random(grid.shape))
        assert np.all(d(d(f)).data[0] == 0.0)
    om = DiscreteForm.one_form_vertex(grid, rng.standard_normal(grid.shape),
                                      rng.standard_normal(grid.shape))
    for a, b in zip(star(star(om)).components(), om.components()):
        assert np.array_equal(a, -b)
    g = DiscreteForm.zero_form(grid, rng.standard_normal(grid.shape))
    assert np.array_equal(star(star(g)).components()[0], g.data[0])

    inner = grid.interior_mask(2)
    worst = 0.0
    for _ in range(100):
        a0 = DiscreteForm.zero_form(grid, np.where(inner, rng.standard_normal(grid.shape), 0.0))
        b1 = DiscreteForm.one_form_vertex(grid, rng.standard_normal(grid.shape),
                                          rng.standard_normal(grid.shape))
        worst = max(worst, abs(l2_inner(d(a0), b1) - l2_inner(a0, codiff(b1))))
        ex = np.zeros((grid.ny + 1, grid.nx))
        ey = np.zeros((grid.ny, grid.nx + 1))
        ex[2:-2, 1:-1] = rng.standard_normal((grid.ny - 3, grid.nx - 2))
        ey[1:-1, 2:-2] = rng.standard_normal((grid.ny - 2, grid.nx - 3))
        a1 = DiscreteForm.one_form(grid, ex, ey)
        b2 = DiscreteForm.two_form_vertex(grid, rng.standard_normal(grid.shape))
        worst = max(worst, abs(l2_inner(d(a1), b2) - l2_inner(a1, codiff(b2))))
    assert worst <= 1e-12


def test_02_density_diagnostics():
    for gamma in (1.4, 2.0, 3.0):
        crit = 2.0 / (gamma + 1.0)
        assert abs(sonic_q(MassDensity.chaplygin(gamma), crit) - crit) <= 1e-10
    Q = np.geomspace(1e-6, 1e6, 50)
    H = MassDensity.minimal_surface().H(Q)
    assert np.max(np.abs(H - (1.0 - (1.0 + Q) ** -0.5))) <= 1e-8
    for dens in (MassDensity.constant(1.0), MassDensity.constant(3.0),
                 MassDensity.power_law(1.0, 0.5), MassDensity.power_law(2.0, 1.0),
                 MassDensity.power_law(0.5, 2.0)):
        assert lemma2_constant(dens, 100.0) <= 2.0 + 1e-9
    rep = check_hypotheses(MassDensity.power_law(1.0, -0.25), 1e6)
    assert rep.hypo_neg_C >= 0.25 - 1e-9


def test_03_rigid_rotation_oracle():
    errs, frobs = [], []
    for n in RESOLUTIONS:
        spec, theta = fixtures.rigid_rotation(n)
        grid = spec.grid
        w = fixtures.rigid_rotation_weight(grid)
        rep = solve_linear(w, grid, spec.dirichlet, spec.excised, spec.branch_cut)
        errs.append(float(np.max(np.abs(rep.u.data[0] - theta)[~spec.excised])))
        omega = flux_form(rep.u, DiscreteForm.zero_form(grid, np.log(w)), spec.branch_cut)
        coef = FrobeniusCoefficient.exact(
            DiscreteForm.zero_form(grid, fixtures.rigid_rotation_eta(grid)))
        frobs.append(frobenius_residual(omega, coef, mask=~spec.excised))
    assert min(ratios(errs)) >= MIN_RATE
    assert decreasing(frobs)


def test_04_scherk_oracle(scherk_runs):
    errs = []
    for spec, exact, rep in scherk_runs.values():
        assert rep.converged
        assert energy_monotone(rep.energy_history)
        errs.append(float(np.max(np.abs(rep.u.data[0] - exact))))
    assert min(ratios(errs)) >= MIN_RATE


def test_05_duality(scherk_runs):
    dual = dual_minimal_surface()
    frobs = []
    for n, (spec, _, rep) in scherk_runs.items():
        omega = flux_form(rep.u, spec.eta)
        pair = backlund.hodge_dual(omega, spec.eta, spec.density, dual)
        frobs.append(pair.frobenius_residual)
    assert decreasing(frobs)
    spec, _, rep = scherk_runs[129]
    omega = flux_form(rep.u, spec.eta)
    pair = backlund.hodge_dual(omega, spec.eta, spec.density, dual)
    assert pair.max_xi_sq < 1.0
    assert pair.pointwise_product_error <= 1e-12
    back = backlund.hodge_dual(pair.xi, pair.eta_hat, dual, spec.density)
    err = max(float(np.max(np.abs(a + b))) for a, b in zip(back.xi.components(),
                                                            omega.components()))
    assert err <= 5.0 * spec.grid.hx


def test_06_eikonal():
    grid = Grid2.square(0.0, 1.0, 33)
    X, Y = grid.mesh()
    u = DiscreteForm.zero_form(grid, X)
    v, res = backlund.eikonal_forward(u, 1.0)
    gap = v.data[0] - math.sqrt(2.0) * Y
    assert np.max(np.abs(gap - gap.flat[0])) <= 1e-12
    assert res <= 1e-12
    assert max(backlund.check_eikonal_pair(u, v, 1.0)) <= 1e-12
    for n in RESOLUTIONS:
        g, theta = fixtures.eikonal_angle_grid(n)
        U = DiscreteForm.zero_form(g, theta)
        V, _ = backlund.eikonal_forward(U, 1.0)
        U2, _ = backlund.eikonal_inverse(V, 1.0)
        for a, b in zip(d(U).components(), d(U2).components()):
            assert np.max(np.abs(a - b)) <= 5.0 * g.hx
        assert max(backlund.check_eikonal_pair(U, V, 1.0, mask=g.interior_mask(1))) <= 5.0 * g.hx


def test_07_homotopy():
    grid = Grid2.square(-1.0, 1.0, 65)
    h = grid.hx
    ctx = RadialHomotopyContext(nodes=16)
    m = grid.interior_mask(2)
    W = sample_one_form(grid, lambda x, y: np.sin(x) * np.cos(y) + y * y,
                        lambda x, y: x * y - np.cos(x))
    F = sample_two_form(grid, lambda x, y: 1.0 + x * y + np.sin(x))
    HW, HF = homotopy(W, ctx), homotopy(F, ctx)
    assert sup_norm(homotopy(HF, ctx), m) <= h
    assert sup_norm(homotopy(d(HW), ctx) - HW, m) <= h
    assert sup_norm(homotopy(d(HF), ctx) - HF, m) <= h
    assert sup_norm(d(homotopy(d(W), ctx)) - d(W), m) <= h
    R = sample_one_form(grid, lambda x, y: -y, lambda x, y: x)
    exact, anti = split(R, ctx)
    assert sup_norm(exact) <= h
    assert sup_norm(anti - R) <= h


def test_08_mean_value_monitor(scherk_runs):
    ms = MassDensity.minimal_surface()
    for R in (0.3, 0.4, 0.5):
        c65 = mean_value_check(scherk_runs[65][2], ms, (0.0, 0.0), R, 0.5).C_emp
        c129 = mean_value_check(scherk_runs[129][2], ms, (0.0, 0.0), R, 0.5).C_emp
        assert 0.5 <= c129 / c65 <= 2.0


def test_09_singularity_controls():
    pos = singularity_probe(lambda n: fixtures.rigid_rotation(n)[0],
                            ring_radii=fixtures.PROBE_RINGS["rigid_rotation"],
                            resolutions=RESOLUTIONS)
    assert pos.last_variation < 0.10
    neg = singularity_probe(lambda n: fixtures.punctured_harmonic(n)[0],
                            ring_radii=fixtures.PROBE_RINGS["punctured_harmonic"],
                            resolutions=RESOLUTIONS)
    scaled = np.asarray(neg.max_QrhoQ_per_ring) * np.asarray(neg.ring_radii) ** 2
    assert np.max(scaled) / np.min(scaled) <= 1.2
    assert abs(neg.growth_exponent() + 2.0) <= 0.4


@pytest.mark.parametrize("density,amplitude", [
    (MassDensity.minimal_surface(), 1.0),
    (MassDensity.chaplygin(2.0), 0.3),
])
def test_10_gradient_check(density, amplitude):
    rng = np.random.default_rng(10)
    spec, _ = fixtures.uniform_flow(33, density)
    grid = spec.grid
    X, Y = grid.mesh()
    u = amplitude * (0.5 * X + 0.3 * Y + 0.1 * smooth_modes(rng, grid))
    grad = energy_gradient(DiscreteForm.zero_form(grid, u), spec)
    eps = 1e-4
    for _ in range(20):
        psi = smooth_modes(rng, grid)
        psi /= np.linalg.norm(psi)
        ep = energy(DiscreteForm.zero_form(grid, u + eps * psi), spec.eta, density)
        em = energy(DiscreteForm.zero_form(grid, u - eps * psi), spec.eta, density)
        an = float(np.sum(grad * psi))
        assert abs((ep - em) / (2.0 * eps) - an) <= 1e-6 * abs(an)


def test_11_verify_and_determinism(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path / "verify"), "--threads", "1"]) == 0
    cfg = tmp_path / "scherk.cfg"
    cfg.write_text("[problem]\nfixture = scherk\n[grid]\nvertices = 33\n")
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["solve", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    assert len(runs[0]) == 3
    assert runs[0] == runs[1]
