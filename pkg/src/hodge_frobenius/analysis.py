"""Numerical monitors for the boundedness estimates.

Everything here measures converged solutions; nothing certifies an
inequality.  The plane is the only dimension available, so the exponent
``n`` in the scaled norms is 2 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dec import DiscreteForm, FrobeniusCoefficient, d
from .density import MassDensity
from .errors import GeometryError
from .solver import SolveReport, SolverConfig, solve

DIM = 2


def _distance(grid, center):
    X, Y = grid.mesh()
    return np.hypot(X - center[0], Y - center[1])


def _check_disc(grid, center, R):
    x0, x1, y0, y1 = grid.bounds
    cx, cy = center
    slack = 1e-12 * max(x1 - x0, y1 - y0)
    if not (R > 0 and cx - R >= x0 - slack and cx + R <= x1 + slack
            and cy - R >= y0 - slack and cy + R <= y1 + slack):
        raise GeometryError(f"disc of radius {R} about {center} leaves the grid {grid.bounds}")


def _shifted_mean(values, weights):
    """Weighted mean computed about the minimum, so constant data is reproduced exactly."""
    if values.size == 0:
        raise GeometryError("no samples inside the disc")
    base = float(np.min(values))
    return base + float(np.sum(weights * (values - base)) / np.sum(weights))


# -- mean value monitor -------------------------------------------------------------

@dataclass(frozen=True)
class MeanValueReport:
    """Sup of ``Q rho(Q)^2`` on the inner disc against its mean on the outer one.

    ``mean_outer`` is the area average over ``D_R`` (midpoint rule over
    cells whose centres lie in the disc); ``scaled_integral`` is
    ``R^-2 * int_{D_R}``, which differs from it by the area factor ``pi``.
    """

    R: float
    delta: float
    sup_inner: float
    mean_outer: float
    scaled_integral: float
    C_emp: float
    degenerate: bool = False


def mean_value_check(report: SolveReport, density: MassDensity, center=(0.0, 0.0),
                     R: float = 0.5, delta: float = 0.5) -> MeanValueReport:
    """Empirical constant in ``sup_{D_(1-delta)R} h(Q) <= C mean_{D_R} h(Q)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    grid = report.Q.grid
    _check_disc(grid, center, R)
    h = density.frak_h(report.Q.data[0])
    r = _distance(grid, center)
    inner = r <= (1.0 - delta) * R
    if not np.any(inner):
        raise GeometryError("the inner disc contains no vertices; refine the grid")
    sup_inner = float(np.max(h[inner]))

    Xc, Yc = grid.cell_centers()
    in_cells = np.hypot(Xc - center[0], Yc - center[1]) <= R
    cell_h = 0.25 * (h[:-1, :-1] + h[:-1, 1:] + h[1:, :-1] + h[1:, 1:])
    vals = cell_h[in_cells]
    areas = np.full(vals.shape, grid.cell_area)
    mean_outer = _shifted_mean(vals, areas)
    integral = float(np.sum(vals * areas))
    if mean_outer == 0.0:
        return MeanValueReport(R, delta, sup_inner, 0.0, 0.0,
                               1.0 if sup_inner == 0.0 else math.inf, degenerate=True)
    return MeanValueReport(R, delta, sup_inner, mean_outer, integral / R ** DIM,
                           sup_inner / mean_outer)


# -- L2 of H and the local sup bound ------------------------------------------------------

def _h_l2(report, density, mask):
    Hq = density.H(report.Q.data[0])
    w = report.Q.grid.vertex_weights()
    return math.sqrt(float(np.sum(np.where(mask, w * Hq * Hq, 0.0))))


def theorem5_ratio(report: SolveReport, density: MassDensity, center=(0.0, 0.0),
                   r_inner: float = 0.25, r_outer: float = 0.5) -> float:
    """``sup_{D_inner} Q rho(Q)`` divided by ``||H(Q)||_{L2(D_outer)}``.

    Returns 0 when both vanish and ``inf`` when only the norm does.
    """
    if not 0 < r_inner < r_outer:
        raise ValueError("need 0 < r_inner < r_outer")
    grid = report.Q.grid
    _check_disc(grid, center, r_outer)
    r = _distance(grid, center)
    Q = report.Q.data[0]
    top = float(np.max((Q * density.rho(Q))[r <= r_inner]))
    norm = _h_l2(report, density, r <= r_outer)
    if norm == 0.0:
        return 0.0 if top == 0.0 else math.inf
    return top / norm


# -- singularity probe --------------------------------------------------------------------

@dataclass
class SingularityReport:
    """Ring maxima of ``Q rho(Q)`` approaching an excised set.

    ``max_QrhoQ_per_ring`` and ``H_L2_outer`` belong to the finest
    resolution; ``history`` holds the ring maxima for every resolution.
    """

    ring_radii: tuple
    resolutions: tuple
    max_QrhoQ_per_ring: tuple
    H_L2_outer: float
    theorem5_ratio: float
    history: dict = field(default_factory=dict)
    converged: tuple = ()

    @property
    def last_variation(self):
        """Largest relative change of a ring maximum over the last two resolutions."""
        if len(self.resolutions) < 2:
            return 0.0
        a = np.asarray(self.history[self.resolutions[-2]])
        b = np.asarray(self.history[self.resolutions[-1]])
        scale = np.maximum(np.abs(b), np.finfo(float).tiny)
        return float(np.max(np.abs(b - a) / scale))

    def growth_exponent(self):
        """Least-squares slope of log(ring max) against log(radius) on the finest grid."""
        m = np.asarray(self.max_QrhoQ_per_ring)
        if np.any(m <= 0):
            return math.nan
        return float(np.polyfit(np.log(self.ring_radii), np.log(m), 1)[0])


def ring_maxima(report: SolveReport, density: MassDensity, radii, center=(0.0, 0.0),
                excised=None):
    """Max of ``Q rho(Q)`` over vertices within one cell of each ring."""
    grid = report.Q.grid
    r = _distance(grid, center)
    Q = report.Q.data[0]
    field_ = Q * density.rho(Q)
    band = max(grid.hx, grid.hy)
    keep = np.ones(grid.shape, dtype=bool) if excised is None else ~excised
    out = []
    for rk in radii:
        sel = keep & (np.abs(r - rk) <= band)
        if not np.any(sel):
            raise GeometryError(f"no vertices near the ring of radius {rk}")
        out.append(float(np.max(field_[sel])))
    return out


def singularity_probe(problem: Callable, config: Optional[SolverConfig] = None,
                      ring_radii: Sequence[float] = (0.8, 0.65, 0.5, 0.4),
                      resolutions: Sequence[int] = (33, 65, 129), center=(0.0, 0.0),
                      outer: Optional[tuple] = None) -> SingularityReport:
    """Solve ``problem(n)`` on each resolution and record ring maxima.

    ``problem`` maps a vertex count to a ``ProblemSpec`` (or a
    ``(ProblemSpec, exact)`` pair) with a nonempty excised set.  The L2 norm
    of ``H(Q)`` is taken over the annulus ``outer = (a, b)``, by default from
    the largest ring radius to the inscribed radius of the grid.
    """
    radii = tuple(float(r) for r in ring_radii)
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("ring radii must be strictly decreasing")
    history, converged = {}, []
    report = spec = None
    for n in resolutions:
        spec = problem(n)
        if isinstance(spec, tuple):
            spec = spec[0]
        if spec.excised is None or not np.any(spec.excised):
            raise ValueError("the probe needs a nonempty excised set")
        report = solve(spec, config)
        converged.append(report.converged)
        history[n] = ring_maxima(report, spec.density, radii, center, spec.excised)
    grid = spec.grid
    if outer is None:
        x0, x1, y0, y1 = grid.bounds
        outer = (radii[0], min(center[0] - x0, x1 - center[0], center[1] - y0, y1 - center[1]))
    r = _distance(grid, center)
    ann = (r >= outer[0]) & (r <= outer[1]) & ~spec.excised
    norm = _h_l2(report, spec.density, ann)
    finest = tuple(history[resolutions[-1]])
    ratio = max(finest) / norm if norm > 0 else math.inf
    return SingularityReport(radii, tuple(resolutions), finest, norm, ratio, history,
                             tuple(converged))


# -- smallness of the coefficient ----------------------------------------------------------

def _vertex_gamma(source):
    if isinstance(source, FrobeniusCoefficient):
        source = source.gamma()
    if source.degree == 0:
        source = d(source)
    if source.degree != 1:
        raise ValueError("give eta (0-form), Gamma (1-form) or a FrobeniusCoefficient")
    return source.grid, source.components()


def gamma_smallness(source, mask=None, center=None, radii=None):
    """``f = |grad Gamma| + |Gamma|^2`` with its L1 norm and Morrey exponent.

    ``|grad Gamma|`` is the spectral norm of the finite-difference Jacobian of
    the co-located components.  The Morrey exponent is the least-squares
    slope of ``log int_{B_r} f`` against ``log r`` over ``radii`` (default:
    eight geometric radii between a tenth and a half of the inscribed
    radius about ``center``); it is ``inf`` when ``f`` vanishes.

    Returns
    -------
    f : DiscreteForm
    f_L1 : float
        ``||f||_{L^{n/2}}`` with ``n = 2``.
    morrey_exponent : float
    """
    grid, (gx, gy) = _vertex_gamma(source)
    gxx, gxy = np.gradient(gx, grid.hy, grid.hx)[::-1]
    gyx, gyy = np.gradient(gy, grid.hy, grid.hx)[::-1]
    # spectral norm of [[gxx, gxy], [gyx, gyy]]
    a = gxx * gxx + gxy * gxy + gyx * gyx + gyy * gyy
    det = gxx * gyy - gxy * gyx
    spec = np.sqrt(0.5 * (a + np.sqrt(np.maximum(a * a - 4.0 * det * det, 0.0))))
    f = spec + gx * gx + gy * gy
    w = grid.vertex_weights()
    sel = np.ones(grid.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    f_l1 = float(np.sum(np.where(sel, w * np.abs(f), 0.0)))

    x0, x1, y0, y1 = grid.bounds
    if center is None:
        center = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    if radii is None:
        rin = min(center[0] - x0, x1 - center[0], center[1] - y0, y1 - center[1])
        radii = np.geomspace(0.1 * rin, 0.5 * rin, 8)
    r = _distance(grid, center)
    integrals = np.array([np.sum(np.where(sel & (r <= rk), w * np.abs(f), 0.0)) for rk in radii])
    if np.all(integrals == 0.0):
        exponent = math.inf
    else:
        good = integrals > 0
        exponent = float(np.polyfit(np.log(np.asarray(radii)[good]), np.log(integrals[good]), 1)[0])
    return DiscreteForm.zero_form(grid, f), f_l1, exponent


__all__ = ["MeanValueReport", "mean_value_check", "theorem5_ratio", "SingularityReport",
           "ring_maxima", "singularity_probe", "gamma_smallness"]
