"""The invariant suite behind ``hodge-frobenius verify``.

Each check returns a :class:`CheckResult`; :func:`run_suite` runs them all.
Tolerances are fixed here and mirrored by the acceptance tests.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import analysis, backlund, fixtures
from .dec import (DiscreteForm, FrobeniusCoefficient, Grid2, codiff, d, l2_inner,
                  sample_one_form, sample_two_form, star, sup_norm)
from .density import (MassDensity, check_hypotheses, dual_minimal_surface, lemma2_constant,
                      sonic_q)
from .homotopy import RadialHomotopyContext, homotopy, split
from .solver import energy, energy_gradient, flux_form, frobenius_residual, solve, solve_linear

log = logging.getLogger(__name__)

RESOLUTIONS = (33, 65, 129)
MIN_RATE = 1.8
HOMOTOPY_C = 1.0
HOMOTOPY_MARGIN = 2
DUAL_C = 5.0
EIKONAL_C = 5.0
GRADIENT_RTOL = 1e-6


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _rates(errors):
    return [a / b if b > 0 else math.inf for a, b in zip(errors, errors[1:])]


def _fmt(values):
    return "[" + ", ".join(f"{v:.3g}" for v in values) + "]"


# 1 -------------------------------------------------------------------------------------

def dyadic_field(rng, shape):
    """Random values in [1, 2): differences of such numbers are exact."""
    return 1.0 + rng.random(shape)


def check_dec(seed=0, pairs=100, n=33):
    rng = np.random.default_rng(seed)
    grid = Grid2.square(0.0, 1.0, n)
    dd = max(float(np.max(np.abs(d(d(DiscreteForm.zero_form(grid, dyadic_field(rng, grid.shape))))
                                   .data[0]))) for _ in range(10))
    om = DiscreteForm.one_form_vertex(grid, rng.standard_normal(grid.shape),
                                      rng.standard_normal(grid.shape))
    f = DiscreteForm.zero_form(grid, rng.standard_normal(grid.shape))
    ss1 = np.array_equal(np.stack(star(star(om)).components()), -np.stack(om.components()))
    ss0 = np.array_equal(star(star(f)).components()[0], f.data[0])
    inner = grid.interior_mask(2)
    worst = 0.0
    for _ in range(pairs):
        a = DiscreteForm.zero_form(grid, np.where(inner, rng.standard_normal(grid.shape), 0.0))
        b = DiscreteForm.one_form_vertex(grid, rng.standard_normal(grid.shape),
                                         rng.standard_normal(grid.shape))
        worst = max(worst, abs(l2_inner(d(a), b) - l2_inner(a, codiff(b))))
        # edge cochains supported away from the boundary ring
        ex = rng.standard_normal((grid.ny + 1, grid.nx))
        ey = rng.standard_normal((grid.ny, grid.nx + 1))
        ex[:2], ex[-2:], ex[:, :1], ex[:, -1:] = 0.0, 0.0, 0.0, 0.0
        ey[:1], ey[-1:], ey[:, :2], ey[:, -2:] = 0.0, 0.0, 0.0, 0.0
        a1 = DiscreteForm.one_form(grid, ex, ey)
        b2 = DiscreteForm.two_form_vertex(grid, rng.standard_normal(grid.shape))
        worst = max(worst, abs(l2_inner(d(a1), b2) - l2_inner(a1, codiff(b2))))
    ok = dd == 0.0 and ss1 and ss0 and worst <= 1e-12
    return ok, f"dd={dd:g} starstar={ss0 and ss1} adjoint={worst:.2e}"


# 2 -------------------------------------------------------------------------------------

def check_density():
    sonic = max(abs(sonic_q(MassDensity.chaplygin(g), 2.0 / (g + 1.0)) - 2.0 / (g + 1.0))
                for g in (1.4, 2.0, 3.0))
    ms = MassDensity.minimal_surface()
    Q = np.geomspace(1e-6, 1e6, 50)
    h_err = float(np.max(np.abs(ms.H(Q) - (1.0 - (1.0 + Q) ** -0.5))))
    nondecreasing = [MassDensity.constant(1.0), MassDensity.power_law(1.0, 0.5),
                     MassDensity.power_law(2.0, 1.0), MassDensity.power_law(0.0, 0.0)]
    lemma = max(lemma2_constant(dn, 100.0) for dn in nondecreasing)
    hypo = check_hypotheses(MassDensity.power_law(1.0, -0.25), 1e6).hypo_neg_C
    ok = sonic <= 1e-10 and h_err <= 1e-8 and lemma <= 2.0 + 1e-9 and hypo >= 0.25 - 1e-9
    return ok, f"sonic={sonic:.1e} H={h_err:.1e} lemma2={lemma:.12g} hypo_neg={hypo:.6g}"


# 3 -------------------------------------------------------------------------------------

def rigid_rotation_linear(n):
    spec, theta = fixtures.rigid_rotation(n)
    grid = spec.grid
    w = fixtures.rigid_rotation_weight(grid)
    rep = solve_linear(w, grid, spec.dirichlet, spec.excised, spec.branch_cut)
    err = float(np.max(np.abs(rep.u.data[0] - theta)[~spec.excised]))
    omega = flux_form(rep.u, DiscreteForm.zero_form(grid, np.log(w)), spec.branch_cut)
    coef = FrobeniusCoefficient.exact(DiscreteForm.zero_form(grid, fixtures.rigid_rotation_eta(grid)))
    frob = frobenius_residual(omega, coef, mask=~spec.excised)
    return err, frob


def check_rigid_rotation():
    errs, frobs = zip(*(rigid_rotation_linear(n) for n in RESOLUTIONS))
    rates = _rates(errs)
    ok = min(rates) >= MIN_RATE and all(b < a for a, b in zip(frobs, frobs[1:]))
    return ok, f"err={_fmt(errs)} rates={_fmt(rates)} frobenius={_fmt(frobs)}"


# 4 -------------------------------------------------------------------------------------

def energy_monotone(history, rel=1e-12):
    E = np.asarray(history, dtype=float)
    return bool(np.all(np.diff(E) <= rel * np.maximum(np.abs(E[1:]), 1e-300)))


def scherk_runs():
    out = {}
    for n in RESOLUTIONS:
        spec, exact = fixtures.scherk(n)
        out[n] = (spec, exact, solve(spec))
    return out


def check_scherk(runs):
    errs = [float(np.max(np.abs(rep.u.data[0] - ex))) for spec, ex, rep in runs.values()]
    conv = all(rep.converged for *_, rep in runs.values())
    mono = all(energy_monotone(rep.energy_history) for *_, rep in runs.values())
    rates = _rates(errs)
    ok = conv and mono and min(rates) >= MIN_RATE
    return ok, f"converged={conv} err={_fmt(errs)} rates={_fmt(rates)} energy_monotone={mono}"


# 5 -------------------------------------------------------------------------------------

def check_duality(runs):
    dual = dual_minimal_surface()
    frobs, info = [], None
    for n, (spec, _, rep) in runs.items():
        omega = flux_form(rep.u, spec.eta)
        pair = backlund.hodge_dual(omega, spec.eta, spec.density, dual)
        frobs.append(pair.frobenius_residual)
        if n == max(runs):
            back = backlund.hodge_dual(pair.xi, pair.eta_hat, dual, spec.density)
            dd = max(float(np.max(np.abs(a + b)))
                     for a, b in zip(back.xi.components(), omega.components()))
            info = (pair.max_xi_sq, pair.pointwise_product_error, dd, spec.grid.hx)
    xi2, prod, dd, h = info
    ok = xi2 < 1.0 and prod <= 1e-12 and all(b < a for a, b in zip(frobs, frobs[1:])) \
        and dd <= DUAL_C * h
    return ok, (f"max|xi|^2={xi2:.6f} product={prod:.1e} frobenius={_fmt(frobs)} "
                f"double_dual={dd:.1e}")


# 6 -------------------------------------------------------------------------------------

def check_eikonal():
    grid = Grid2.square(0.0, 1.0, 33)
    X, Y = grid.mesh()
    u = DiscreteForm.zero_form(grid, X)
    v, res = backlund.eikonal_forward(u, 1.0)
    diffv = v.data[0] - math.sqrt(2.0) * Y
    v_err = float(np.max(np.abs(diffv - diffv.flat[0])))
    pair = backlund.check_eikonal_pair(u, v, 1.0)
    roundtrip, solved = [], []
    for n in RESOLUTIONS:
        g, theta = fixtures.eikonal_angle_grid(n)
        U = DiscreteForm.zero_form(g, theta)
        V, _ = backlund.eikonal_forward(U, 1.0)
        U2, _ = backlund.eikonal_inverse(V, 1.0)
        rt = max(float(np.max(np.abs(a - b))) for a, b in zip(d(U).components(), d(U2).components()))
        roundtrip.append(rt / g.hx)
        solved.append(max(backlund.check_eikonal_pair(U, V, 1.0, mask=g.interior_mask(1))))
    ok = (v_err <= 1e-12 and res <= 1e-12 and max(pair) <= 1e-12
          and max(roundtrip) <= EIKONAL_C and all(b < a for a, b in zip(solved, solved[1:])))
    return ok, (f"v_err={v_err:.1e} pair={max(pair):.1e} roundtrip/h={_fmt(roundtrip)} "
                f"solved_pair={_fmt(solved)}")


# 7 -------------------------------------------------------------------------------------

def homotopy_fixtures(grid):
    W = sample_one_form(grid, lambda x, y: np.sin(x) * np.cos(y) + y * y,
                        lambda x, y: x * y - np.cos(x))
    F = sample_two_form(grid, lambda x, y: 1.0 + x * y + np.sin(x))
    R = sample_one_form(grid, lambda x, y: -y, lambda x, y: x)
    return W, F, R


def check_homotopy(n=65):
    grid = Grid2.square(-1.0, 1.0, n)
    ctx = RadialHomotopyContext(nodes=16)
    W, F, R = homotopy_fixtures(grid)
    h = grid.hx
    m = grid.interior_mask(HOMOTOPY_MARGIN)
    HW, HF = homotopy(W, ctx), homotopy(F, ctx)
    errs = {
        "HH": sup_norm(homotopy(HF, ctx), m),
        "HdH1": sup_norm(homotopy(d(HW), ctx) - HW, m),
        "HdH2": sup_norm(homotopy(d(HF), ctx) - HF, m),
        "dHd": sup_norm(d(homotopy(d(W), ctx)) - d(W), m),
    }
    exact, anti = split(R, ctx)
    errs["split_exact"] = sup_norm(exact)
    errs["split_anti"] = sup_norm(anti - R)
    ok = all(v <= HOMOTOPY_C * h for v in errs.values())
    return ok, " ".join(f"{k}/h={v / h:.2g}" for k, v in errs.items())


# 8 -------------------------------------------------------------------------------------

def check_mean_value(runs):
    ms = MassDensity.minimal_surface()
    ratios = []
    for R in (0.3, 0.4, 0.5):
        c = [analysis.mean_value_check(runs[n][2], ms, (0.0, 0.0), R, 0.5).C_emp for n in (65, 129)]
        ratios.append(c[1] / c[0])
    ok = all(0.5 <= r <= 2.0 for r in ratios)
    return ok, f"C_emp ratios 65->129 = {_fmt(ratios)}"


# 9 -------------------------------------------------------------------------------------

def check_singularity():
    pos = analysis.singularity_probe(lambda n: fixtures.rigid_rotation(n)[0],
                                     ring_radii=fixtures.PROBE_RINGS["rigid_rotation"],
                                     resolutions=RESOLUTIONS)
    neg = analysis.singularity_probe(lambda n: fixtures.punctured_harmonic(n)[0],
                                     ring_radii=fixtures.PROBE_RINGS["punctured_harmonic"],
                                     resolutions=RESOLUTIONS)
    scaled = np.asarray(neg.max_QrhoQ_per_ring) * np.asarray(neg.ring_radii) ** 2
    spread = float(np.max(scaled) / np.min(scaled))
    slope = neg.growth_exponent()
    ok = pos.last_variation < 0.10 and spread <= 1.2 and abs(slope + 2.0) <= 0.4
    return ok, f"positive variation={pos.last_variation:.3f} negative r^2*max spread={spread:.3f} slope={slope:.3f}"


# 10 ------------------------------------------------------------------------------------

def smooth_modes(rng, grid, modes=3):
    """Random combination of low sine modes vanishing on the boundary of the grid."""
    X, Y = grid.mesh()
    x0, x1, y0, y1 = grid.bounds
    sx = (X - x0) / (x1 - x0)
    sy = (Y - y0) / (y1 - y0)
    out = np.zeros(grid.shape)
    for a in range(1, modes + 1):
        for b in range(1, modes + 1):
            out += rng.standard_normal() * np.sin(a * np.pi * sx) * np.sin(b * np.pi * sy) / (a * b)
    return out


def gradient_check(density, seed=0, n=33, directions=20, eps=1e-4, amplitude=1.0):
    """Worst relative gap between the analytic and central-difference derivative."""
    rng = np.random.default_rng(seed)
    spec, _ = fixtures.uniform_flow(n, density)
    grid = spec.grid
    X, Y = grid.mesh()
    u = amplitude * (0.5 * X + 0.3 * Y + 0.1 * smooth_modes(rng, grid))
    U = DiscreteForm.zero_form(grid, u)
    grad = energy_gradient(U, spec)
    worst = 0.0
    for _ in range(directions):
        psi = smooth_modes(rng, grid)
        psi /= np.linalg.norm(psi)
        ep = energy(DiscreteForm.zero_form(grid, u + eps * psi), spec.eta, density)
        em = energy(DiscreteForm.zero_form(grid, u - eps * psi), spec.eta, density)
        fd = (ep - em) / (2.0 * eps)
        an = float(np.sum(grad * psi))
        worst = max(worst, abs(fd - an) / abs(an))
    return worst


def check_gradient():
    ms = gradient_check(MassDensity.minimal_surface())
    # smaller amplitude keeps Q below the Chaplygin sonic value 2/3
    ch = gradient_check(MassDensity.chaplygin(2.0), amplitude=0.3)
    return max(ms, ch) <= GRADIENT_RTOL, f"minimal_surface={ms:.1e} chaplygin={ch:.1e}"


# 11 ------------------------------------------------------------------------------------

def check_determinism():
    import contextlib
    import io
    import tempfile
    from pathlib import Path

    from .cli import main

    text = "[problem]\nfixture = scherk\n[grid]\nvertices = 33\n"
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "scherk.cfg"
        cfg.write_text(text)
        outs = []
        for k in range(2):
            out = Path(tmp) / f"run{k}"
            with contextlib.redirect_stdout(io.StringIO()):
                code = main(["solve", "--config", str(cfg), "--out", str(out), "--threads", "1"])
            outs.append((code, {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}))
    same = outs[0][1] == outs[1][1] and len(outs[0][1]) == 3
    ok = outs[0][0] == 0 and outs[1][0] == 0 and same
    return ok, f"exit codes={outs[0][0]},{outs[1][0]} identical_csv={same}"


CHECKS = [
    (1, "DEC identities", check_dec, False),
    (2, "density diagnostics", check_density, False),
    (3, "rigid rotation oracle", check_rigid_rotation, False),
    (4, "Scherk oracle", check_scherk, True),
    (5, "density duality", check_duality, True),
    (6, "eikonal transform", check_eikonal, False),
    (7, "homotopy operator", check_homotopy, False),
    (8, "mean value monitor", check_mean_value, True),
    (9, "singularity probe controls", check_singularity, False),
    (10, "energy gradient check", check_gradient, False),
    (11, "CSV determinism", check_determinism, False),
]


def run_suite(report=print):
    """Run every check, reporting one line each; returns the list of results."""
    results = []
    runs = None
    for number, name, fn, needs_runs in CHECKS:
        t0 = time.perf_counter()
        try:
            if needs_runs and runs is None:
                runs = scherk_runs()
            ok, detail = fn(runs) if needs_runs else fn()
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failing check
            log.exception("check %d failed with an exception", number)
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        res = CheckResult(number, name, bool(ok), detail, time.perf_counter() - t0)
        results.append(res)
        if report is not None:
            report(res.line())
    return results
