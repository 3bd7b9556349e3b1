"""Hodge-Backlund transformations in the plane.

Two constructions are provided:

* the density duality ``xi = *(rho(Q) omega)`` with ``eta_hat = -eta``, which
  maps a solution for the density ``rho`` to one for any ``rho_hat`` with
  ``rho(|omega|^2) rho_hat(|xi|^2) = 1``;
* the eikonal pair ``u -> v`` with ``dv = +-*(sqrt(|du|^2 + nu^2) du/|du|)``
  and its inverse, which relate the two weighted divergence equations
  attached to the complex eikonal equation.

Pointwise steps act on vertex co-located components; potentials are
recovered from (nearly) closed 1-forms by a global least-squares solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dec import DiscreteForm, FrobeniusCoefficient, d, operators, q_field, star
from .density import MassDensity
from .errors import DegreeError, DualityViolation, HypothesisViolation, ShapeError
from .solver import frobenius_residual

# Relative slack when testing |dv|^2 >= nu^2 so that exact equality survives rounding.
RADICAND_RTOL = 1e-12
# Co-location is one-sided on the boundary ring, so d of a co-located field is
# only consistent this many steps inside.
INTERIOR_MARGIN = 2


@dataclass(frozen=True)
class DualPair:
    """Output of :func:`hodge_dual`.

    Attributes
    ----------
    xi : DiscreteForm
        ``*(rho(Q) omega)`` in vertex layout.
    eta_hat : DiscreteForm
        ``-eta``.
    rho_hat : MassDensity
        The paired density.
    pointwise_product_error : float
        ``sup |rho(|omega|^2) rho_hat(|xi|^2) - 1|``.
    frobenius_residual : float
        Sup-norm of ``d(xi) - d(eta_hat) ^ xi`` at vertices at least
        ``margin`` steps from the boundary.
    max_xi_sq : float
        ``sup |xi|^2``.
    """

    xi: DiscreteForm
    eta_hat: DiscreteForm
    rho_hat: MassDensity
    pointwise_product_error: float
    frobenius_residual: float
    max_xi_sq: float


def hodge_dual(omega: DiscreteForm, eta: DiscreteForm, density: MassDensity,
               density_hat: MassDensity, margin: int = INTERIOR_MARGIN) -> DualPair:
    """Dual form ``xi = *(rho(|omega|^2) omega)`` and coefficient ``-eta``.

    Raises
    ------
    DualityViolation
        If ``|xi|^2`` leaves the domain of ``density_hat`` at some vertex.
    """
    if omega.degree != 1:
        raise DegreeError("the duality acts on 1-forms")
    if eta.degree != 0 or eta.grid != omega.grid:
        raise ShapeError("eta must be a 0-form on the grid of omega")
    grid = omega.grid
    Q = q_field(omega).data[0]
    density.check_domain(Q)
    r = density.rho(Q)
    cx, cy = omega.components()
    xi = star(DiscreteForm.one_form_vertex(grid, r * cx, r * cy))
    Qh = q_field(xi).data[0]
    bad = ~density_hat.in_domain(Qh)
    if np.any(bad):
        j, i = np.argwhere(bad)[0]
        lo, hi = density_hat.q_domain
        raise DualityViolation(
            f"|xi|^2 = {float(Qh[j, i])!r} at vertex ({i}, {j}) is outside [{lo}, {hi}); "
            "omega does not solve the source equation"
        )
    product = r * density_hat.rho(Qh)
    eta_hat = -eta
    res = frobenius_residual(xi, FrobeniusCoefficient.exact(eta_hat), margin=margin)
    return DualPair(
        xi=xi, eta_hat=eta_hat, rho_hat=density_hat,
        pointwise_product_error=float(np.max(np.abs(product - 1.0))),
        frobenius_residual=res,
        max_xi_sq=float(np.max(Qh)),
    )


# -- potential recovery -------------------------------------------------------------

def recover_potential(beta: DiscreteForm, anchor: int = 0) -> DiscreteForm:
    """Least-squares potential: minimise ``||dv - beta||`` with ``v[anchor] = 0``.

    Edge residuals are weighted by the inverse squared edge length, so the
    normal equations are the 5-point Laplacian.  The anchor is a flat vertex
    index (default: the lowest-index vertex).  The solve is a correction to
    a path-integrated first guess, so closed forms come back to rounding.
    """
    if beta.degree != 1:
        raise DegreeError("potential recovery needs a 1-form")
    grid = beta.grid
    ex, ey = beta.to_primal().data
    ops = operators(grid)
    D = sp.vstack([ops.D0x / grid.hx, ops.D0y / grid.hy]).tocsr()
    b = np.concatenate([ex.ravel() / grid.hx, ey.ravel() / grid.hy])
    # along the bottom row, then up every column
    v0 = np.zeros(grid.shape)
    v0[0, 1:] = np.cumsum(ex[0])
    v0[1:, :] = v0[0] + np.cumsum(ey, axis=0)
    v0 = v0.ravel() - v0.ravel()[anchor]
    A = (D.T @ D).tocsr()
    rhs = D.T @ (b - D @ v0)
    keep = np.ones(grid.num_vertices, dtype=bool)
    keep[anchor] = False
    idx = np.flatnonzero(keep)
    v = v0.copy()
    v[idx] += spla.spsolve(A[idx][:, idx].tocsc(), rhs[idx])
    return DiscreteForm.zero_form(grid, v.reshape(grid.shape))


class EikonalTransform(NamedTuple):
    potential: DiscreteForm
    integrability_residual: float


def _nu_values(nu, grid):
    if isinstance(nu, DiscreteForm):
        vals = nu.data[0]
    else:
        vals = np.broadcast_to(np.asarray(nu, dtype=float), grid.shape)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("nu must be a finite nonnegative field")
    return vals


def _sign(sign):
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return float(sign)


def _closedness(form, margin=INTERIOR_MARGIN):
    curl = np.abs(d(form).colocate().data[0])
    return float(np.max(curl[form.grid.interior_mask(margin)]))


def forward_form(u: DiscreteForm, nu, sign: int = 1) -> DiscreteForm:
    """``beta = sign * *(sqrt(|du|^2 + nu^2) du/|du|)`` at vertices."""
    s = _sign(sign)
    grid = u.grid
    ux, uy = d(u).components()
    q = ux * ux + uy * uy
    if np.any(q <= 0):
        j, i = np.argwhere(q <= 0)[0]
        raise HypothesisViolation(f"du vanishes at vertex ({i}, {j}); the transform needs |du| > 0")
    n2 = _nu_values(nu, grid) ** 2
    factor = np.sqrt((q + n2) / q)
    return DiscreteForm.one_form_vertex(grid, -s * factor * uy, s * factor * ux)


def inverse_form(v: DiscreteForm, nu, sign: int = 1) -> DiscreteForm:
    """``alpha = -sign * sqrt(1 - nu^2/|dv|^2) * dv`` at vertices."""
    s = _sign(sign)
    grid = v.grid
    vx, vy = d(v).components()
    q = vx * vx + vy * vy
    n2 = _nu_values(nu, grid) ** 2
    short = q < n2 * (1.0 - RADICAND_RTOL)
    if np.any(short):
        j, i = np.argwhere(short)[0]
        raise HypothesisViolation(
            f"|dv|^2 = {float(q[j, i])!r} < nu^2 = {float(n2[j, i])!r} at vertex ({i}, {j})"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        radicand = np.where(q > 0, 1.0 - n2 / q, 0.0)
    factor = np.sqrt(np.maximum(radicand, 0.0))
    # *dv = -v_y dx + v_x dy
    return DiscreteForm.one_form_vertex(grid, s * factor * vy, -s * factor * vx)


def eikonal_forward(u: DiscreteForm, nu, sign: int = 1) -> EikonalTransform:
    """Transform ``u`` to ``v`` with ``|dv|^2 = |du|^2 + nu^2`` and ``dv`` orthogonal to ``du``.

    ``integrability_residual`` is ``sup |d beta|`` over vertices at least two
    steps inside the grid.
    """
    beta = forward_form(u, nu, sign)
    return EikonalTransform(recover_potential(beta), _closedness(beta))


def eikonal_inverse(v: DiscreteForm, nu, sign: int = 1) -> EikonalTransform:
    """Inverse transform; with the same ``sign`` it undoes :func:`eikonal_forward`."""
    alpha = inverse_form(v, nu, sign)
    return EikonalTransform(recover_potential(alpha), _closedness(alpha))


def check_eikonal_pair(u: DiscreteForm, v: DiscreteForm, nu, mask=None):
    """Sup-norms of ``|du|^2 - |dv|^2 + nu^2`` and ``du . dv`` at vertices."""
    if u.grid != v.grid:
        raise ShapeError("u and v live on different grids")
    ux, uy = d(u).components()
    vx, vy = d(v).components()
    n2 = _nu_values(nu, u.grid) ** 2
    diff = np.abs(ux * ux + uy * uy - vx * vx - vy * vy + n2)
    orth = np.abs(ux * vx + uy * vy)
    if mask is not None:
        diff, orth = diff[mask], orth[mask]
    return float(np.max(diff)), float(np.max(orth))
