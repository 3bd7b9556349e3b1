"""Reference problems with known solutions.

Each factory takes the number of vertices per side and returns a
:class:`~hodge_frobenius.solver.ProblemSpec` together with the exact
potential sampled on the grid (``None`` where no closed form exists).
"""

from __future__ import annotations

import numpy as np

from .dec import BranchCut, DiscreteForm, FrobeniusCoefficient, Grid2
from .density import MassDensity
from .solver import ProblemSpec

SCHERK_HALF_WIDTH = 1.2


def _spec(grid, density, g, eta=None, excised=None, branch_cut=None):
    eta = np.zeros(grid.shape) if eta is None else eta
    return ProblemSpec(
        grid=grid, density=density,
        coefficient=FrobeniusCoefficient.exact(DiscreteForm.zero_form(grid, eta)),
        dirichlet=DiscreteForm.zero_form(grid, g),
        excised=excised, branch_cut=branch_cut,
    )


def block_mask(grid, half_width, center=(0.0, 0.0)):
    """Vertices in the closed square ``max(|x-cx|, |y-cy|) <= half_width``."""
    X, Y = grid.mesh()
    tol = 1e-12 * max(grid.hx, grid.hy)
    return np.maximum(np.abs(X - center[0]), np.abs(Y - center[1])) <= half_width + tol


def uniform_flow(n, density=None, slope=1.0, bounds=(0.0, 1.0)):
    """Affine data ``g = slope * x`` with eta = 0; the exact solution is g."""
    grid = Grid2.square(bounds[0], bounds[1], n)
    X, _ = grid.mesh()
    g = slope * X
    return _spec(grid, density or MassDensity.minimal_surface(), g), g


def scherk_exact(X, Y):
    return np.log(np.cos(X) / np.cos(Y))


def scherk(n, half_width=SCHERK_HALF_WIDTH):
    """Scherk's surface ``log(cos x / cos y)`` with the minimal surface density."""
    grid = Grid2.square(-half_width, half_width, n)
    X, Y = grid.mesh()
    g = scherk_exact(X, Y)
    return _spec(grid, MassDensity.minimal_surface(), g), g


def _radius(grid):
    X, Y = grid.mesh()
    return np.hypot(X, Y), np.arctan2(Y, X)


def rigid_rotation_eta(grid, block=0.5):
    """``eta = 2 log r`` outside the excised block, clamped inside it."""
    r, _ = _radius(grid)
    return 2.0 * np.log(np.maximum(r, block))


def rigid_rotation(n, block=0.5, density=None):
    """Angle potential on ``[-1, 1]^2`` minus a central block, eta = 2 log r.

    ``u = arctan2(y, x)`` solves the weighted equation for any radial weight,
    and the flux form ``omega = r^2 du`` has ``|omega| = r`` bounded.
    """
    grid = Grid2.square(-1.0, 1.0, n)
    _, theta = _radius(grid)
    excised = block_mask(grid, block)
    spec = _spec(grid, density or MassDensity.constant(1.0), theta,
                 eta=rigid_rotation_eta(grid, block), excised=excised,
                 branch_cut=BranchCut())
    return spec, theta


def rigid_rotation_weight(grid, block=0.5):
    """Linear-case weight ``w = r^2``, clamped inside the block."""
    r, _ = _radius(grid)
    return np.maximum(r, block) ** 2


def punctured_harmonic(n, block=0.25):
    """Bare angle potential with eta = 0 around a small block (|du| = 1/r)."""
    grid = Grid2.square(-1.0, 1.0, n)
    _, theta = _radius(grid)
    spec = _spec(grid, MassDensity.constant(1.0), theta,
                 excised=block_mask(grid, block), branch_cut=BranchCut())
    return spec, theta


def punctured_uniform(n, block=0.25, slope=1.0):
    """Affine data on the punctured square; the solution stays affine."""
    grid = Grid2.square(-1.0, 1.0, n)
    X, _ = grid.mesh()
    g = slope * X
    return _spec(grid, MassDensity.constant(1.0), g, excised=block_mask(grid, block)), g


def eikonal_angle_grid(n):
    """Grid ``[0.5, 1.5] x [-0.5, 0.5]`` away from the origin, with ``theta`` there."""
    grid = Grid2.from_bounds(0.5, 1.5, -0.5, 0.5, n - 1)
    X, Y = grid.mesh()
    return grid, np.arctan2(Y, X)


PROBLEMS = {
    "uniform": uniform_flow,
    "scherk": scherk,
    "rigid_rotation": rigid_rotation,
    "punctured_harmonic": punctured_harmonic,
    "punctured_uniform": punctured_uniform,
}


RING_RADII = (0.8, 0.65, 0.5, 0.4)
# rings must clear the excised block of each probe problem
PROBE_RINGS = {
    "rigid_rotation": (0.9, 0.8, 0.7, 0.6),
    "punctured_harmonic": RING_RADII,
    "punctured_uniform": RING_RADII,
}


__all__ = ["block_mask", "uniform_flow", "scherk", "scherk_exact", "rigid_rotation",
           "rigid_rotation_eta", "rigid_rotation_weight", "punctured_harmonic",
           "punctured_uniform", "eikonal_angle_grid", "PROBLEMS", "RING_RADII", "PROBE_RINGS"]
