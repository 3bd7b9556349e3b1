"""Variational solver for delta[rho(Q) exp(2 eta) du] = 0.

The discrete energy is

    E(u) = 1/2 sum_cells area/4 sum_corners P(Q_c),   P(Q) = int_0^Q rho,

where each cell corner c uses the two cell edges meeting there:
Q_c = exp(2 eta_c) (g_x^2 + g_y^2) with g_x, g_y the edge difference
quotients.  Averaging over the four corners of every cell removes the
checkerboard null modes that a single co-located gradient per cell would
have, and for constant rho it reduces to the 5-point Laplacian.  The residual
is the energy gradient divided by the vertex area, i.e. the discrete
codifferential of the weighted flux.

Newton steps use the exact Hessian of E; a frozen-coefficient (Picard) step
is the fallback when the Newton direction fails to descend.  Every accepted
step passes a backtracking line search on E.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .density import MassDensity, sonic_q
from .dec import (BranchCut, DiscreteForm, FrobeniusCoefficient, Grid2, d,
                  frobenius_defect, operators, scale_edges)
from .errors import DomainError, SolverError

log = logging.getLogger(__name__)

MIN_STEP = 2.0 ** -20
ARMIJO = 1e-4
ENERGY_RTOL = 1e-12
CG_RTOL = 1e-10


@dataclass
class ProblemSpec:
    """Grid, density, exact Frobenius coefficient and Dirichlet data.

    ``dirichlet`` supplies values on the outer boundary and on the excised
    vertices; interior values are only used as nothing more than a shape.
    ``excised`` is a boolean vertex mask of strictly interior vertices that
    are removed from the unknowns (their ring carries Dirichlet data).
    ``branch_cut`` lets the potential be multivalued (angle-type data).
    """

    grid: Grid2
    density: MassDensity
    coefficient: FrobeniusCoefficient
    dirichlet: DiscreteForm
    excised: Optional[np.ndarray] = None
    branch_cut: Optional[BranchCut] = None

    def __post_init__(self):
        if self.coefficient.kind != "exact":
            raise ValueError("the variational solver needs an exact coefficient Gamma = d(eta)")
        if self.dirichlet.degree != 0 or self.dirichlet.grid != self.grid:
            raise ValueError("Dirichlet data must be a 0-form on the problem grid")
        if self.coefficient.eta.grid != self.grid:
            raise ValueError("eta lives on a different grid")
        if self.excised is not None:
            ex = np.asarray(self.excised, dtype=bool)
            if ex.shape != self.grid.shape:
                raise ValueError("excised mask has the wrong shape")
            if np.any(ex & self.grid.boundary_mask()):
                raise ValueError("the excised set must be strictly interior")
            self.excised = ex

    @property
    def eta(self):
        return self.coefficient.eta


@dataclass
class SolverConfig:
    max_iterations: int = 50
    tolerance: float = 1e-9
    damping: float = 1.0
    continuation_steps: int = 4
    subsonic_guard: bool = True
    sonic_margin: float = 0.02

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iterations < 1 or self.continuation_steps < 1:
            raise ValueError("iteration and continuation counts must be positive")
        if not 0 <= self.sonic_margin < 1:
            raise ValueError("sonic_margin must lie in [0, 1)")


@dataclass
class SolveReport:
    u: DiscreteForm
    Q: DiscreteForm
    energy: float
    residual_sup: float
    iterations: int
    max_Q: float
    sonic_Q: Optional[float]
    sonic_margin: Optional[float]
    converged: bool
    cavitated: bool
    sonic_exceeded: bool
    energy_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    stages: int = 1

    @property
    def flags(self):
        return {"converged": self.converged, "cavitated": self.cavitated,
                "sonic_exceeded": self.sonic_exceeded}


class _Discretization:
    """Corner-quadrature energy, gradient and Hessian for one problem."""

    def __init__(self, grid, weight, density, excised=None, branch_cut=None):
        self.grid, self.density = grid, density
        nx, ny = grid.nx, grid.ny
        ops = operators(grid)
        ex = np.zeros(grid.shape, dtype=bool) if excised is None else excised
        self.excised = ex
        self.free = ~(grid.boundary_mask() | ex)
        self.free_idx = np.flatnonzero(self.free.ravel())

        cells_j, cells_i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
        all_excised = ex[:-1, :-1] & ex[:-1, 1:] & ex[1:, :-1] & ex[1:, 1:]
        active = ~all_excised
        cj, ci = cells_j[active], cells_i[active]
        self.active_cells = active
        self.active_vertices = np.zeros(grid.shape, dtype=bool)
        for dj in (0, 1):
            for di in (0, 1):
                self.active_vertices[cj + dj, ci + di] = True

        weight = np.asarray(weight, dtype=float)
        if not np.all(np.isfinite(weight[self.active_vertices])) or \
                np.any(weight[self.active_vertices] <= 0):
            raise ValueError("the flux weight must be positive and finite on the active domain")

        gx_edges = ops.D0x / grid.hx
        gy_edges = ops.D0y / grid.hy
        if branch_cut is not None:
            J = branch_cut.offset(grid)
            jx_all, jy_all = J.data[0].ravel() / grid.hx, J.data[1].ravel() / grid.hy
        else:
            jx_all = np.zeros((ny + 1) * nx)
            jy_all = np.zeros(ny * (nx + 1))
        self.corners = []
        wv = weight.ravel()
        for dj in (0, 1):
            for di in (0, 1):
                xe = (cj + dj) * nx + ci                # bottom or top x-edge
                ye = cj * (nx + 1) + ci + di            # left or right y-edge
                vtx = (cj + dj) * (nx + 1) + ci + di
                self.corners.append(dict(
                    Gx=gx_edges[xe], Gy=gy_edges[ye],
                    jx=jx_all[xe], jy=jy_all[ye],
                    k=wv[vtx], vertex=vtx,
                ))
        self.w = 0.25 * grid.cell_area
        self.scale = 1.0

    # -- pieces ------------------------------------------------------------
    def gradients(self, u):
        for c in self.corners:
            gx = c["Gx"] @ u + self.scale * c["jx"]
            gy = c["Gy"] @ u + self.scale * c["jy"]
            yield c, gx, gy, c["k"] * (gx * gx + gy * gy)

    def corner_q(self, u):
        return [Q for _, _, _, Q in self.gradients(u)]

    def _check(self, c, Q):
        ok = self.density.in_domain(Q)
        if not np.all(ok):
            bad = int(np.flatnonzero(~ok)[0])
            v = int(c["vertex"][bad])
            j, i = divmod(v, self.grid.nx + 1)
            X, Y = self.grid.x[i], self.grid.y[j]
            lo, hi = self.density.q_domain
            raise DomainError(
                f"Q = {float(Q[bad])!r} at vertex ({i}, {j}) = ({X:.6g}, {Y:.6g}) leaves the "
                f"domain [{lo}, {hi}) of the {self.density.family} density"
            )

    def energy(self, u, strict=True):
        total = 0.0
        for c, _, _, Q in self.gradients(u):
            if not np.all(self.density.in_domain(Q)):
                if strict:
                    self._check(c, Q)
                return math.inf
            total += float(np.sum(self.density.rho_integral(Q)))
        return 0.5 * self.w * total

    def gradient(self, u):
        g = np.zeros(self.grid.num_vertices)
        for c, gx, gy, Q in self.gradients(u):
            self._check(c, Q)
            f = self.w * c["k"] * self.density.rho(Q)
            g += c["Gx"].T @ (f * gx) + c["Gy"].T @ (f * gy)
        return g

    def hessian(self, u, frozen=False):
        H = None
        for c, gx, gy, Q in self.gradients(u):
            self._check(c, Q)
            k = c["k"]
            r = self.density.rho(Q)
            base = self.w * k * r
            if frozen:
                axx = ayy = base
                axy = np.zeros_like(base)
            else:
                dr2 = 2.0 * self.w * k * k * self.density.drho(Q)
                axx = base + dr2 * gx * gx
                ayy = base + dr2 * gy * gy
                axy = dr2 * gx * gy
            Gx, Gy = c["Gx"], c["Gy"]
            term = (Gx.T @ sp.diags(axx) @ Gx + Gy.T @ sp.diags(ayy) @ Gy
                    + Gx.T @ sp.diags(axy) @ Gy + Gy.T @ sp.diags(axy) @ Gx)
            H = term if H is None else H + term
        return H.tocsr()

    def residual_field(self, grad):
        r = np.zeros(self.grid.num_vertices)
        r[self.free_idx] = grad[self.free_idx] / self.grid.cell_area
        return r.reshape(self.grid.shape)

    def max_q(self, u):
        return max(float(np.max(Q)) for Q in self.corner_q(u))

    def min_rho(self, u):
        return min(float(np.min(self.density.rho(Q))) for Q in self.corner_q(u))


def _spd_solve(A, b):
    """Jacobi-preconditioned CG at relative tolerance 1e-10, direct fallback."""
    if b.size == 0:
        return b.copy()
    diag = A.diagonal()
    if np.all(diag > 0):
        M = sp.diags(1.0 / diag)
        x, info = spla.cg(A, b, rtol=CG_RTOL, atol=0.0, maxiter=20 * b.size, M=M)
        if info == 0 and np.all(np.isfinite(x)):
            return x
    try:
        x = spla.spsolve(A.tocsc(), b)
    except Exception as exc:  # noqa: BLE001 - scipy raises several types here
        raise SolverError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("singular linear system")
    return x


def _linear_solve(disc, u_bc, frozen_rho=None):
    """Minimise the quadratic energy with constant density for fixed Dirichlet values."""
    u = u_bc.copy()
    u[disc.free_idx] = 0.0
    if frozen_rho is not None:
        saved = disc.density
        disc.density = MassDensity.constant(frozen_rho)
    try:
        A = disc.hessian(u, frozen=True)
        g = disc.gradient(u)
    finally:
        if frozen_rho is not None:
            disc.density = saved
    f = disc.free_idx
    Aff = A[f][:, f].tocsc()
    try:
        x = spla.spsolve(Aff, -g[f]) if f.size else np.zeros(0)
    except Exception as exc:  # noqa: BLE001
        raise SolverError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("singular linear system")
    u[f] = x
    return u


def _vertex_q(grid, u, weight, branch_cut, scale=1.0):
    om = d(DiscreteForm.zero_form(grid, u.reshape(grid.shape)))
    if branch_cut is not None:
        om = om + scale * branch_cut.offset(grid)
    cx, cy = om.components()
    return np.asarray(weight) * (cx * cx + cy * cy)


def potential_differential(u: DiscreteForm, branch_cut: Optional[BranchCut] = None) -> DiscreteForm:
    """``du`` with the branch-cut jump removed (primal layout)."""
    om = d(u)
    return om + branch_cut.offset(u.grid) if branch_cut is not None else om


def flux_form(u: DiscreteForm, eta: DiscreteForm, branch_cut: Optional[BranchCut] = None) -> DiscreteForm:
    """The gradient-recursive 1-form ``omega = exp(eta) du`` on edges."""
    return scale_edges(DiscreteForm.zero_form(u.grid, np.exp(eta.data[0])),
                       potential_differential(u, branch_cut))


# -- public operations ---------------------------------------------------------

def _disc_for(spec: ProblemSpec):
    return _Discretization(spec.grid, np.exp(2.0 * spec.eta.data[0]), spec.density,
                           spec.excised, spec.branch_cut)


def energy(u: DiscreteForm, eta: DiscreteForm, density: MassDensity,
           excised=None, branch_cut=None) -> float:
    """Discrete nonlinear Hodge energy of ``u``; raises :class:`DomainError`."""
    disc = _Discretization(u.grid, np.exp(2.0 * eta.data[0]), density, excised, branch_cut)
    return disc.energy(u.data[0].ravel())


def energy_gradient(u: DiscreteForm, spec: ProblemSpec) -> np.ndarray:
    """dE/du at every vertex (zero rows are not removed)."""
    return _disc_for(spec).gradient(u.data[0].ravel()).reshape(spec.grid.shape)


def weak_form(u: DiscreteForm, spec: ProblemSpec, psi: DiscreteForm) -> float:
    """<rho(Q) exp(2 eta) du, d psi> in the discrete inner product of the energy."""
    return float(np.sum(energy_gradient(u, spec) * psi.data[0]))


def residual(u: DiscreteForm, spec: ProblemSpec) -> DiscreteForm:
    """Discrete codifferential of the weighted flux at free vertices."""
    disc = _disc_for(spec)
    return DiscreteForm.zero_form(spec.grid, disc.residual_field(disc.gradient(u.data[0].ravel())))


def frobenius_residual(omega: DiscreteForm, coefficient, mask=None, margin=0) -> float:
    """Sup over vertices of ``|d(omega) - Gamma ^ omega|``.

    ``coefficient`` is a :class:`FrobeniusCoefficient` or a 1-form.  ``margin``
    drops vertices within that many index steps of the grid boundary, where
    co-location is only first-order accurate.
    """
    gamma = coefficient.gamma() if isinstance(coefficient, FrobeniusCoefficient) else coefficient
    defect = np.abs(frobenius_defect(omega, gamma).data[0])
    sel = omega.grid.interior_mask(margin) if margin else np.ones(omega.grid.shape, dtype=bool)
    if mask is not None:
        sel = sel & np.asarray(mask, dtype=bool)
    vals = defect[sel]
    return float(vals.max()) if vals.size else 0.0


def _line_search(disc, u, p, grad, E0, t0):
    f = disc.free_idx
    slope = float(grad[f] @ p)
    if not slope < 0:
        return None
    tol = ENERGY_RTOL * max(abs(E0), 1e-300)
    t = t0
    trial = u.copy()
    while t >= MIN_STEP:
        trial[f] = u[f] + t * p
        E1 = disc.energy(trial, strict=False)
        if E1 <= E0 + ARMIJO * t * slope or (math.isfinite(E1) and E1 <= E0 + tol):
            return trial, E1, t
        t *= 0.5
    return None


def _newton(disc, u, config, history, guard_limit):
    """Run damped Newton with Picard fallback; returns (u, iterations, converged, guard_hit)."""
    f = disc.free_idx
    E = disc.energy(u)
    iterations = 0
    while True:
        grad = disc.gradient(u)
        res = float(np.max(np.abs(grad[f]))) / disc.grid.cell_area if f.size else 0.0
        history["energy"].append(E)
        history["residual"].append(res)
        log.debug("iteration %d: energy %.16g residual %.3e", iterations, E, res)
        if res <= config.tolerance:
            return u, iterations, True, False
        if iterations >= config.max_iterations:
            return u, iterations, False, False
        iterations += 1
        step = None
        try:
            H = disc.hessian(u)[f][:, f]
            p = _spd_solve(H, -grad[f])
            step = _line_search(disc, u, p, grad, E, config.damping)
        except SolverError:
            step = None
        if step is None:
            A = disc.hessian(u, frozen=True)[f][:, f]
            p = _spd_solve(A, -grad[f])
            step = _line_search(disc, u, p, grad, E, config.damping)
        if step is None:
            log.info("line search stalled after %d iterations", iterations)
            return u, iterations, False, False
        u, E, _ = step
        if disc.max_q(u) > guard_limit:
            return u, iterations, False, True


def _report(disc, u, weight, branch_cut, density, converged, iterations, history,
            sonic, stages, guard_limit):
    grid = disc.grid
    grad = disc.gradient(u)
    f = disc.free_idx
    res = float(np.max(np.abs(grad[f]))) / grid.cell_area if f.size else 0.0
    max_q = disc.max_q(u)
    return SolveReport(
        u=DiscreteForm.zero_form(grid, u.reshape(grid.shape)),
        Q=DiscreteForm.zero_form(grid, _vertex_q(grid, u, weight, branch_cut)),
        energy=disc.energy(u),
        residual_sup=res,
        iterations=iterations,
        max_Q=max_q,
        sonic_Q=sonic,
        sonic_margin=None if sonic is None else sonic - max_q,
        converged=converged and res <= history["tolerance"],
        cavitated=disc.min_rho(u) < density.cavitation_threshold,
        sonic_exceeded=sonic is not None and max_q >= guard_limit,
        energy_history=history["energy"],
        residual_history=history["residual"],
        stages=stages,
    )


def _density_sonic(density):
    lo, hi = density.q_domain
    return sonic_q(density, hi if math.isfinite(hi) else 1e8)


def solve(spec: ProblemSpec, config: SolverConfig = None) -> SolveReport:
    """Minimise the discrete energy for the given Dirichlet data."""
    config = config or SolverConfig()
    grid, density = spec.grid, spec.density
    weight = np.exp(2.0 * spec.eta.data[0])
    disc = _Discretization(grid, weight, density, spec.excised, spec.branch_cut)
    g = spec.dirichlet.data[0].ravel().astype(float)
    sonic = _density_sonic(density)
    guard_limit = math.inf
    if sonic is not None:
        guard_limit = (1.0 - config.sonic_margin) * sonic if config.subsonic_guard else sonic
    rho0 = float(density.rho(density.q_domain[0]))
    history = {"energy": [], "residual": [], "tolerance": config.tolerance}

    def start(fraction):
        disc.scale = fraction
        return _linear_solve(disc, fraction * g, frozen_rho=rho0)

    u = start(1.0)
    fractions = [1.0]
    if disc.max_q(u) > guard_limit:
        if not config.subsonic_guard:
            disc.energy(u)  # raises DomainError with the offending vertex
        else:
            fractions = [s / config.continuation_steps for s in range(1, config.continuation_steps + 1)]
            u = start(fractions[0])

    total_iterations, converged, stage = 0, False, 0
    while stage < len(fractions):
        frac = fractions[stage]
        if stage > 0:
            u = u * (frac / fractions[stage - 1])
            disc.scale = frac
        if disc.max_q(u) >= (sonic if sonic is not None else math.inf) or \
                not all(np.all(density.in_domain(Q)) for Q in disc.corner_q(u)):
            disc.energy(u)  # raises DomainError
        limit = guard_limit if (config.subsonic_guard and len(fractions) == 1) else math.inf
        u, its, converged, guard_hit = _newton(disc, u, config, history, limit)
        total_iterations += its
        if guard_hit:
            log.info("subsonic guard triggered; ramping boundary data in %d stages",
                     config.continuation_steps)
            fractions = [s / config.continuation_steps for s in range(1, config.continuation_steps + 1)]
            stage = 0
            u = start(fractions[0])
            continue
        stage += 1
    disc.scale = 1.0
    return _report(disc, u, weight, spec.branch_cut, density, converged, total_iterations,
                   history, sonic, len(fractions), guard_limit)


def solve_linear(weight, grid: Grid2, dirichlet: DiscreteForm, excised=None,
                 branch_cut: Optional[BranchCut] = None) -> SolveReport:
    """Solve delta(w du) = 0 with Dirichlet data by a direct sparse solve.

    This is :func:`solve` with rho = 1 and exp(2 eta) = w.  The report's ``Q``
    is ``|w du|^2``, the squared norm of the linear flux form ``omega = w du``,
    and ``energy`` is ``1/2 int w |du|^2``.
    """
    w = weight.data[0] if isinstance(weight, DiscreteForm) else np.asarray(weight, dtype=float)
    density = MassDensity.constant(1.0)
    disc = _Discretization(grid, w, density, excised, branch_cut)
    u = _linear_solve(disc, dirichlet.data[0].ravel().astype(float))
    history = {"energy": [], "residual": [], "tolerance": math.inf}
    rep = _report(disc, u, w, branch_cut, density, True, 1, history, None, 1, math.inf)
    rep.Q = DiscreteForm.zero_form(grid, w * rep.Q.data[0])
    rep.energy_history, rep.residual_history = [rep.energy], [rep.residual_sup]
    return rep
