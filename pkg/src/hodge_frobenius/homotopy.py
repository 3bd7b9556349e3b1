"""Radial homotopy operator on star-shaped grid domains.

For a k-form w and a center x0,

    (H w)(x) = int_0^1 t**(k-1) [(x - x0) _| w](x0 + t (x - x0)) dt,

evaluated per vertex with Gauss-Legendre quadrature along the ray and bilinear
sampling of the co-located components.  H satisfies w = dHw + Hdw on
star-shaped domains; the identities hold up to interpolation error here.
"""

from dataclasses import dataclass, field

import numpy as np

from .dec import DiscreteForm, d, frobenius_defect, wedge
from .errors import DegreeError, DomainError

DEFAULT_NODES = 16


@dataclass(frozen=True)
class RadialHomotopyContext:
    """Center of the radial contraction, quadrature size and optional domain mask.

    ``mask`` marks vertices where data is defined (True).  A ray sample that
    draws on an unmarked vertex means the domain is not star-shaped about
    ``center`` and raises :class:`DomainError`.
    """

    center: tuple = (0.0, 0.0)
    nodes: int = DEFAULT_NODES
    mask: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError("use at least 8 quadrature nodes per ray")

    def quadrature(self):
        s, w = np.polynomial.legendre.leggauss(self.nodes)
        return 0.5 * (s + 1.0), 0.5 * w


def _bilinear(grid, arrays, px, py, mask):
    x0, y0 = grid.origin
    fx = (px - x0) / grid.hx
    fy = (py - y0) / grid.hy
    tol = 1e-9
    if np.any(fx < -tol) or np.any(fx > grid.nx + tol) or np.any(fy < -tol) or np.any(fy > grid.ny + tol):
        raise DomainError("a homotopy ray leaves the grid; the center must lie inside it")
    i = np.clip(np.floor(fx).astype(int), 0, grid.nx - 1)
    j = np.clip(np.floor(fy).astype(int), 0, grid.ny - 1)
    tx = np.clip(fx - i, 0.0, 1.0)
    ty = np.clip(fy - j, 0.0, 1.0)
    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty
    if mask is not None:
        outside = ((w00 > 0) & ~mask[j, i]) | ((w10 > 0) & ~mask[j, i + 1]) \
            | ((w01 > 0) & ~mask[j + 1, i]) | ((w11 > 0) & ~mask[j + 1, i + 1])
        if np.any(outside):
            raise DomainError("domain is not star-shaped about the homotopy center")
    return [w00 * a[j, i] + w10 * a[j, i + 1] + w01 * a[j + 1, i] + w11 * a[j + 1, i + 1]
            for a in arrays]


def homotopy(omega: DiscreteForm, ctx: RadialHomotopyContext) -> DiscreteForm:
    """Apply the radial homotopy operator to a 1- or 2-form."""
    k = omega.degree
    if k not in (1, 2):
        raise DegreeError("the homotopy operator acts on forms of degree 1 or 2")
    g = omega.grid
    x0, y0 = ctx.center
    X, Y = g.mesh()
    sel = np.ones(g.shape, dtype=bool) if ctx.mask is None else np.asarray(ctx.mask, dtype=bool)
    if ctx.mask is not None:
        _bilinear(g, [], np.array([x0]), np.array([y0]), sel)
    Xr = X[sel] - x0
    Yr = Y[sel] - y0
    t, w = ctx.quadrature()
    px = x0 + t[:, None] * Xr[None, :]
    py = y0 + t[:, None] * Yr[None, :]
    comps = omega.components()
    samples = _bilinear(g, comps, px, py, ctx.mask)
    if k == 1:
        integrand = Xr[None, :] * samples[0] + Yr[None, :] * samples[1]
        out = np.zeros(g.shape)
        out[sel] = w @ integrand
        return DiscreteForm.zero_form(g, out)
    radial = (w * t) @ samples[0]
    cx, cy = np.zeros(g.shape), np.zeros(g.shape)
    cx[sel] = -Yr * radial
    cy[sel] = Xr * radial
    return DiscreteForm.one_form_vertex(g, cx, cy)


def split(omega: DiscreteForm, ctx: RadialHomotopyContext):
    """Exact and anti-exact parts ``(dHw, Hdw)`` of a form."""
    exact = d(homotopy(omega, ctx))
    if omega.degree == 2:
        return exact, DiscreteForm.zeros(omega.grid, 2, "vertex")
    return exact, homotopy(d(omega), ctx)


@dataclass
class RecursiveDecomposition:
    eta: DiscreteForm
    theta: DiscreteForm
    u: DiscreteForm
    residual: float

    def __iter__(self):
        return iter((self.eta, self.theta, self.u))


def recursive_decompose(gamma: DiscreteForm, omega: DiscreteForm, ctx: RadialHomotopyContext):
    """eta = H(Gamma), theta = H(dGamma), u = H(exp(-eta) omega).

    Iterating the result yields ``(eta, theta, u)``; ``residual`` is the sup
    of ``d(omega) - Gamma ^ omega`` over the context mask, reported only.
    """
    if gamma.degree != 1 or omega.degree != 1:
        raise DegreeError("recursive decomposition is implemented for 1-forms")
    eta = homotopy(gamma, ctx)
    theta = homotopy(d(gamma), ctx)
    weight = DiscreteForm.zero_form(omega.grid, np.exp(-eta.data[0]))
    u = homotopy(wedge(weight, omega), ctx)
    defect = np.abs(frobenius_defect(omega, gamma).data[0])
    if ctx.mask is not None:
        defect = defect[np.asarray(ctx.mask, dtype=bool)]
    return RecursiveDecomposition(eta, theta, u, float(defect.max()) if defect.size else 0.0)
