"""Discrete exterior calculus on uniform rectilinear 2D grids.

Storage conventions
-------------------
Arrays are indexed ``[j, i]`` (y first), so a raveled array is y-major.

* 0-forms live on vertices, shape ``(ny + 1, nx + 1)``.
* 1-forms in the ``"primal"`` layout are cochains: the x-edge array (shape
  ``(ny + 1, nx)``) holds integrals of the dx component along horizontal
  edges, the y-edge array (shape ``(ny, nx + 1)``) the dy integrals along
  vertical edges.
* 2-forms in the ``"primal"`` layout are face integrals, shape ``(ny, nx)``.

The exterior derivative acts on primal cochains by signed incidence sums.  All
pointwise operations (Hodge star, wedge, Q, scaling by 0-forms) act on
vertex-co-located component fields and return forms in the ``"vertex"``
layout.  Co-location averages the two edges adjacent to a vertex along each
axis (one-sided on the boundary) and the up to four faces around a vertex.

The codifferential is the exact adjoint of ``d`` for the co-located,
trapezoid-weighted L2 inner product.  In the continuum limit it reproduces
``delta = (-1)**(n*k + n + 1) * star d star`` with n = 2, i.e. ``delta = -div``
on 1-forms and ``delta(f dx^dy) = f_y dx - f_x dy`` on 2-forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegreeError, ShapeError

LAYOUTS = ("primal", "vertex")


@dataclass(frozen=True)
class Grid2:
    """Uniform grid of ``nx`` by ``ny`` cells with spacings ``hx``, ``hy``."""

    nx: int
    ny: int
    hx: float
    hy: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("cell counts must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("a grid needs at least 2 cells per direction")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "hx", float(self.hx))
        object.__setattr__(self, "hy", float(self.hy))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def from_bounds(cls, x0, x1, y0, y1, nx, ny=None):
        ny = nx if ny is None else ny
        return cls(nx, ny, (x1 - x0) / nx, (y1 - y0) / ny, (x0, y0))

    @classmethod
    def square(cls, lo, hi, vertices):
        """Square ``[lo, hi]^2`` with ``vertices`` points per side."""
        return cls.from_bounds(lo, hi, lo, hi, vertices - 1)

    @property
    def shape(self):
        return (self.ny + 1, self.nx + 1)

    @property
    def num_vertices(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def x(self):
        return self.origin[0] + self.hx * np.arange(self.nx + 1)

    @property
    def y(self):
        return self.origin[1] + self.hy * np.arange(self.ny + 1)

    def mesh(self):
        """Vertex coordinates ``(X, Y)``, each of shape :attr:`shape`."""
        return np.meshgrid(self.x, self.y)

    def cell_centers(self):
        xc = self.origin[0] + self.hx * (np.arange(self.nx) + 0.5)
        yc = self.origin[1] + self.hy * (np.arange(self.ny) + 0.5)
        return np.meshgrid(xc, yc)

    @property
    def bounds(self):
        return (self.origin[0], self.origin[0] + self.nx * self.hx,
                self.origin[1], self.origin[1] + self.ny * self.hy)

    @property
    def h(self):
        return max(self.hx, self.hy)

    @property
    def cell_area(self):
        return self.hx * self.hy

    def vertex_weights(self):
        """Trapezoid weights; they integrate constants exactly."""
        wx = np.full(self.nx + 1, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny + 1, self.hy)
        wy[[0, -1]] *= 0.5
        return np.outer(wy, wx)

    def boundary_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def interior_mask(self, margin=1):
        """Vertices at least ``margin`` index steps away from the boundary."""
        m = np.zeros(self.shape, dtype=bool)
        if 2 * margin <= min(self.nx, self.ny):
            m[margin:self.ny + 1 - margin, margin:self.nx + 1 - margin] = True
        return m

    def refine(self, factor=2):
        return Grid2(self.nx * factor, self.ny * factor,
                     self.hx / factor, self.hy / factor, self.origin)


# -- sparse building blocks ----------------------------------------------------

def _diff(n):
    """(n, n+1) forward difference."""
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _to_nodes(n):
    """(n+1, n) average of the adjacent cells, one-sided at the ends."""
    rows, cols, vals = [0, n], [0, n - 1], [1.0, 1.0]
    for k in range(1, n):
        rows += [k, k]
        cols += [k - 1, k]
        vals += [0.5, 0.5]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def _to_mids(n):
    """(n, n+1) midpoint average of adjacent nodes."""
    return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


class _Ops:
    def __init__(self, g: Grid2):
        Ix, Iy = sp.identity(g.nx + 1, format="csr"), sp.identity(g.ny + 1, format="csr")
        Icx, Icy = sp.identity(g.nx, format="csr"), sp.identity(g.ny, format="csr")
        area = g.hx * g.hy
        self.D0x = sp.kron(Iy, _diff(g.nx), format="csr")
        self.D0y = sp.kron(_diff(g.ny), Ix, format="csr")
        self.D1x = sp.kron(-_diff(g.ny), Icx, format="csr")
        self.D1y = sp.kron(Icy, _diff(g.nx), format="csr")
        # cochain -> vertex component / density
        self.Cx = sp.kron(Iy, _to_nodes(g.nx), format="csr") / g.hx
        self.Cy = sp.kron(_to_nodes(g.ny), Ix, format="csr") / g.hy
        self.C2 = sp.kron(_to_nodes(g.ny), _to_nodes(g.nx), format="csr") / area
        # vertex component / density -> cochain
        self.Px = sp.kron(Iy, _to_mids(g.nx), format="csr") * g.hx
        self.Py = sp.kron(_to_mids(g.ny), Ix, format="csr") * g.hy
        self.P2 = sp.kron(_to_mids(g.ny), _to_mids(g.nx), format="csr") * area
        self.M = g.vertex_weights().ravel()
        Mdiag = sp.diags(self.M)
        self.mass1x = (self.Cx.T @ Mdiag @ self.Cx).tocsc()
        self.mass1y = (self.Cy.T @ Mdiag @ self.Cy).tocsc()
        self._solve1x = spla.factorized(self.mass1x)
        self._solve1y = spla.factorized(self.mass1y)


@lru_cache(maxsize=32)
def operators(grid: Grid2) -> _Ops:
    """Sparse incidence, co-location and mass matrices of a grid (cached)."""
    return _Ops(grid)


# -- forms ---------------------------------------------------------------------

def _shapes(grid, degree, layout):
    v = grid.shape
    if degree == 0:
        return [v]
    if layout == "vertex":
        return [v, v] if degree == 1 else [v]
    if degree == 1:
        return [(grid.ny + 1, grid.nx), (grid.ny, grid.nx + 1)]
    return [(grid.ny, grid.nx)]


class DiscreteForm:
    """A 0-, 1- or 2-form on a :class:`Grid2`.

    ``data`` is a tuple of arrays whose shapes depend on ``degree`` and
    ``layout`` (see the module docstring).  Forms are treated as immutable.
    """

    __slots__ = ("grid", "degree", "data", "layout")

    def __init__(self, grid, degree, data, layout="primal"):
        if degree not in (0, 1, 2):
            raise DegreeError(f"degree must be 0, 1 or 2, got {degree}")
        if layout not in LAYOUTS:
            raise ValueError(f"unknown layout {layout!r}")
        if degree == 0:
            layout = "primal"
        if isinstance(data, np.ndarray):
            data = (data,)
        data = tuple(np.array(a, dtype=float) for a in data)
        expected = _shapes(grid, degree, layout)
        if [a.shape for a in data] != expected:
            raise ShapeError(
                f"degree-{degree} {layout} form needs arrays of shape {expected}, "
                f"got {[a.shape for a in data]}"
            )
        for a in data:
            if not np.all(np.isfinite(a)):
                raise ValueError("form coefficients must be finite")
            a.setflags(write=False)
        self.grid, self.degree, self.data, self.layout = grid, degree, data, layout

    def __repr__(self):
        return f"DiscreteForm(degree={self.degree}, layout={self.layout!r}, grid={self.grid})"

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero_form(cls, grid, values):
        return cls(grid, 0, (values,))

    @classmethod
    def one_form(cls, grid, ex, ey):
        """Primal 1-form from edge cochains."""
        return cls(grid, 1, (ex, ey), "primal")

    @classmethod
    def one_form_vertex(cls, grid, cx, cy):
        """1-form from co-located dx and dy component fields."""
        return cls(grid, 1, (cx, cy), "vertex")

    @classmethod
    def two_form(cls, grid, faces):
        return cls(grid, 2, (faces,), "primal")

    @classmethod
    def two_form_vertex(cls, grid, density):
        return cls(grid, 2, (density,), "vertex")

    @classmethod
    def zeros(cls, grid, degree, layout="primal"):
        return cls(grid, degree, tuple(np.zeros(s) for s in _shapes(grid, degree, layout)), layout)

    # -- layout conversions -------------------------------------------------
    def components(self):
        """Vertex-co-located component arrays (values, (dx, dy) or density)."""
        if self.degree == 0 or self.layout == "vertex":
            return self.data
        g, ops = self.grid, operators(self.grid)
        if self.degree == 1:
            ex, ey = self.data
            return ((ops.Cx @ ex.ravel()).reshape(g.shape),
                    (ops.Cy @ ey.ravel()).reshape(g.shape))
        return ((ops.C2 @ self.data[0].ravel()).reshape(g.shape),)

    def colocate(self):
        if self.layout == "vertex":
            return self
        return DiscreteForm(self.grid, self.degree, self.components(), "vertex")

    def to_primal(self):
        """Project a vertex-layout form onto edges/faces by midpoint averaging."""
        if self.layout == "primal":
            return self
        g, ops = self.grid, operators(self.grid)
        if self.degree == 1:
            cx, cy = self.data
            return DiscreteForm(g, 1, ((ops.Px @ cx.ravel()).reshape(g.ny + 1, g.nx),
                                       (ops.Py @ cy.ravel()).reshape(g.ny, g.nx + 1)))
        return DiscreteForm(g, 2, ((ops.P2 @ self.data[0].ravel()).reshape(g.ny, g.nx),))

    # -- algebra ------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, DiscreteForm):
            raise TypeError("expected a DiscreteForm")
        if other.grid != self.grid:
            raise ShapeError("forms live on different grids")
        if other.degree != self.degree:
            raise DegreeError(f"degree mismatch: {self.degree} vs {other.degree}")

    def _binary(self, other, op):
        self._check(other)
        a, b = self, other
        if a.layout != b.layout:
            a, b = a.colocate(), b.colocate()
        return DiscreteForm(a.grid, a.degree, tuple(op(x, y) for x, y in zip(a.data, b.data)), a.layout)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return DiscreteForm(self.grid, self.degree, tuple(-a for a in self.data), self.layout)

    def __mul__(self, scalar):
        if isinstance(scalar, DiscreteForm):
            return wedge(scalar, self) if scalar.degree == 0 else wedge(self, scalar)
        return DiscreteForm(self.grid, self.degree, tuple(scalar * a for a in self.data), self.layout)

    __rmul__ = __mul__

    def pointwise_norm(self):
        """Euclidean norm of the co-located components at every vertex."""
        comps = self.components()
        return np.sqrt(sum(c * c for c in comps))

    def allclose(self, other, atol=0.0, rtol=0.0):
        diff = self - other
        return all(np.allclose(a, 0.0, atol=atol, rtol=rtol) for a in diff.data)


# -- sampling helpers ------------------------------------------------------------

def sample_zero_form(grid, f):
    X, Y = grid.mesh()
    return DiscreteForm.zero_form(grid, np.broadcast_to(f(X, Y), grid.shape))


def sample_one_form(grid, fx, fy, layout="primal"):
    """Sample ``fx dx + fy dy``; primal cochains use the edge-midpoint rule."""
    if layout == "vertex":
        X, Y = grid.mesh()
        return DiscreteForm.one_form_vertex(grid, np.broadcast_to(fx(X, Y), grid.shape),
                                            np.broadcast_to(fy(X, Y), grid.shape))
    x, y = grid.x, grid.y
    xm = 0.5 * (x[1:] + x[:-1])
    ym = 0.5 * (y[1:] + y[:-1])
    Xe, Ye = np.meshgrid(xm, y)
    Xf, Yf = np.meshgrid(x, ym)
    ex = np.broadcast_to(fx(Xe, Ye), Xe.shape) * grid.hx
    ey = np.broadcast_to(fy(Xf, Yf), Xf.shape) * grid.hy
    return DiscreteForm.one_form(grid, ex, ey)


def sample_two_form(grid, f, layout="primal"):
    if layout == "vertex":
        X, Y = grid.mesh()
        return DiscreteForm.two_form_vertex(grid, np.broadcast_to(f(X, Y), grid.shape))
    Xc, Yc = grid.cell_centers()
    return DiscreteForm.two_form(grid, np.broadcast_to(f(Xc, Yc), Xc.shape) * grid.cell_area)


@dataclass(frozen=True)
class BranchCut:
    """Cut along the ray ``{y = cy, x < cx}`` for multivalued angle-type potentials.

    A potential whose values jump by ``jump`` when the ray is crossed upwards
    (like ``arctan2(y - cy, x - cx)``) has a smooth differential once the
    :meth:`offset` cochain is added to ``d(u)``.
    """

    center: tuple = (0.0, 0.0)
    jump: float = 2.0 * math.pi

    def offset(self, grid):
        cx, cy = self.center
        x, y = grid.x, grid.y
        crosses = (y[:-1] < cy) & (y[1:] >= cy)
        left = x < cx
        ey = np.zeros((grid.ny, grid.nx + 1))
        ey[np.ix_(crosses, left)] = -self.jump
        return DiscreteForm.one_form(grid, np.zeros((grid.ny + 1, grid.nx)), ey)


# -- operators -------------------------------------------------------------------

def d(form: DiscreteForm) -> DiscreteForm:
    """Exterior derivative; vertex-layout 1-forms are projected to edges first."""
    if form.degree == 0:
        u = form.data[0]
        return DiscreteForm(form.grid, 1, (u[:, 1:] - u[:, :-1], u[1:, :] - u[:-1, :]))
    if form.degree == 1:
        ex, ey = form.to_primal().data
        return DiscreteForm(form.grid, 2, ((ex[:-1, :] - ex[1:, :]) + (ey[:, 1:] - ey[:, :-1]),))
    raise DegreeError("d of a 2-form vanishes identically in 2D and is not represented")


def star(form: DiscreteForm) -> DiscreteForm:
    """Hodge star: 1 -> dx^dy, dx -> dy, dy -> -dx, dx^dy -> 1 (vertex layout)."""
    g = form.grid
    if form.degree == 0:
        return DiscreteForm(g, 2, (form.data[0],), "vertex")
    if form.degree == 1:
        cx, cy = form.components()
        return DiscreteForm(g, 1, (-cy, cx), "vertex")
    return DiscreteForm(g, 0, (form.components()[0],))


def wedge(alpha: DiscreteForm, beta: DiscreteForm) -> DiscreteForm:
    """Pointwise exterior product of co-located components (vertex layout)."""
    if alpha.grid != beta.grid:
        raise ShapeError("forms live on different grids")
    k = alpha.degree + beta.degree
    if k > 2:
        raise DegreeError(f"wedge of degrees {alpha.degree} and {beta.degree} exceeds 2")
    g = alpha.grid
    if alpha.degree == 0 or beta.degree == 0:
        f, other = (alpha, beta) if alpha.degree == 0 else (beta, alpha)
        fv = f.data[0]
        return DiscreteForm(g, other.degree, tuple(fv * c for c in other.components()),
                            "vertex" if other.degree else "primal")
    ax, ay = alpha.components()
    bx, by = beta.components()
    return DiscreteForm(g, 2, (ax * by - ay * bx,), "vertex")


def scale_edges(f: DiscreteForm, omega: DiscreteForm) -> DiscreteForm:
    """Multiply a primal 1-form by a 0-form averaged to edge midpoints.

    Unlike :func:`wedge` this keeps the staggered layout, so ``d`` of the
    result is an exact circulation.
    """
    if f.degree != 0 or omega.degree != 1:
        raise DegreeError("scale_edges expects a 0-form and a 1-form")
    v = f.data[0]
    ex, ey = omega.to_primal().data
    return DiscreteForm(omega.grid, 1, (0.5 * (v[:, 1:] + v[:, :-1]) * ex,
                                        0.5 * (v[1:, :] + v[:-1, :]) * ey))


def interior_product(vx, vy, form: DiscreteForm) -> DiscreteForm:
    """Contraction of the vector field ``(vx, vy)`` (vertex arrays) into a form."""
    g = form.grid
    if form.degree == 0:
        raise DegreeError("interior product of a 0-form vanishes")
    if form.degree == 1:
        cx, cy = form.components()
        return DiscreteForm(g, 0, (vx * cx + vy * cy,))
    (f,) = form.components()
    return DiscreteForm(g, 1, (-vy * f, vx * f), "vertex")


def q_field(omega: DiscreteForm) -> DiscreteForm:
    """Q = *(omega ^ *omega), the squared pointwise norm of a 1-form."""
    if omega.degree != 1:
        raise DegreeError("Q is defined for 1-forms")
    cx, cy = omega.components()
    return DiscreteForm(omega.grid, 0, (cx * cx + cy * cy,))


def codiff(form: DiscreteForm) -> DiscreteForm:
    """Codifferential: the adjoint of ``d`` for :func:`l2_inner`.

    On 2-forms the identity ``<d a, b> = <a, codiff b>`` holds for primal
    (edge) 1-forms ``a``; ``d`` projects a vertex-layout ``a`` to edges first,
    so for those it holds only up to the projection error.
    """
    g = form.grid
    ops = operators(g)
    if form.degree == 0:
        raise DegreeError("codifferential of a 0-form vanishes")
    if form.degree == 1:
        cx, cy = form.components()
        M = ops.M
        gx = ops.Cx.T @ (M * cx.ravel())
        gy = ops.Cy.T @ (M * cy.ravel())
        out = (ops.D0x.T @ gx + ops.D0y.T @ gy) / M
        return DiscreteForm(g, 0, (out.reshape(g.shape),))
    (f,) = form.components()
    rhs = ops.C2.T @ (ops.M * f.ravel())
    ex = ops._solve1x(ops.D1x.T @ rhs)
    ey = ops._solve1y(ops.D1y.T @ rhs)
    return DiscreteForm(g, 1, (ex.reshape(g.ny + 1, g.nx), ey.reshape(g.ny, g.nx + 1)))


def l2_inner(alpha: DiscreteForm, beta: DiscreteForm, mask=None) -> float:
    """Trapezoid-weighted sum of co-located pointwise inner products."""
    alpha._check(beta)
    w = alpha.grid.vertex_weights()
    if mask is not None:
        w = np.where(mask, w, 0.0)
    return float(sum(np.sum(w * a * b) for a, b in zip(alpha.components(), beta.components())))


def l2_norm(alpha: DiscreteForm, mask=None) -> float:
    return math.sqrt(max(l2_inner(alpha, alpha, mask), 0.0))


def sup_norm(alpha: DiscreteForm, mask=None) -> float:
    n = alpha.pointwise_norm()
    if mask is not None:
        n = n[mask]
    return float(np.max(n)) if n.size else 0.0


def integrate(f: DiscreteForm, mask=None) -> float:
    """Trapezoid integral of a 0-form (or density of a 2-form)."""
    (v,) = f.components()
    w = f.grid.vertex_weights()
    if mask is not None:
        w = np.where(mask, w, 0.0)
    return float(np.sum(w * v))


@dataclass(frozen=True)
class FrobeniusCoefficient:
    """Either an exact coefficient ``Gamma = d(eta)`` or a general 1-form."""

    eta: DiscreteForm = None
    gamma_form: DiscreteForm = None

    def __post_init__(self):
        if (self.eta is None) == (self.gamma_form is None):
            raise ValueError("give exactly one of eta and gamma_form")
        if self.eta is not None and self.eta.degree != 0:
            raise DegreeError("eta must be a 0-form")
        if self.gamma_form is not None and self.gamma_form.degree != 1:
            raise DegreeError("Gamma must be a 1-form")

    @classmethod
    def exact(cls, eta):
        return cls(eta=eta)

    @classmethod
    def general(cls, gamma):
        return cls(gamma_form=gamma)

    @property
    def kind(self):
        return "exact" if self.eta is not None else "general"

    def gamma(self):
        return d(self.eta) if self.eta is not None else self.gamma_form


def frobenius_defect(omega: DiscreteForm, gamma: DiscreteForm) -> DiscreteForm:
    """The 2-form ``d(omega) - gamma ^ omega`` at vertices."""
    if omega.degree != 1 or gamma.degree != 1:
        raise DegreeError("the Frobenius condition is checked for 1-forms")
    return d(omega).colocate() - wedge(gamma, omega)
