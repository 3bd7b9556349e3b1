"""Mass densities rho(Q) and the scalar diagnostics derived from them.

Every density exposes rho, its derivative, the antiderivative
P(Q) = int_0^Q rho(s) ds (used by the energy), the auxiliary function H with
H' = rho/2 + Q rho' and H(0) = 0, and frak_h(Q) = Q rho(Q)**2.

For the built-in families H is evaluated in closed form through the identity

    H(Q) = Q rho(Q) - P(Q) / 2,

which follows from d(Q rho)/dQ = rho + Q rho'.  Custom densities fall back to
adaptive Simpson quadrature of H'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, EvaluationError

SIMPSON_ATOL = 1e-10
CAVITATION_FACTOR = 1e-8


def adaptive_simpson(f, a, b, atol=SIMPSON_ATOL, max_depth=60):
    """Integrate a scalar function on [a, b] by adaptive Simpson quadrature."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, atol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        if not math.isfinite(left + right):
            raise EvaluationError(f"non-finite integrand on [{lo}, {hi}]")
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * tol:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * tol, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth + 1))
    return total


class MassDensity:
    """A positive density rho(Q) on a half-open interval ``[lo, hi)`` of Q.

    Use the constructors :meth:`chaplygin`, :meth:`minimal_surface`,
    :meth:`power_law`, :meth:`constant` and :meth:`custom`.
    """

    family = "abstract"

    def __init__(self, q_domain, cavitation_threshold=None):
        lo, hi = float(q_domain[0]), float(q_domain[1])
        if not (0.0 <= lo < hi):
            raise ValueError(f"invalid Q domain [{lo}, {hi})")
        self.q_domain = (lo, hi)
        if cavitation_threshold is None:
            cavitation_threshold = CAVITATION_FACTOR * float(self._rho(np.asarray(lo)))
        self.cavitation_threshold = cavitation_threshold

    # -- constructors -------------------------------------------------------
    @staticmethod
    def chaplygin(gamma):
        return Chaplygin(gamma)

    @staticmethod
    def minimal_surface():
        return MinimalSurface()

    @staticmethod
    def power_law(K, q):
        return PowerLaw(K, q)

    @staticmethod
    def constant(c=1.0):
        return Constant(c)

    @staticmethod
    def custom(rho, drho, q_domain, name="custom", antiderivative=None):
        return Custom(rho, drho, q_domain, name=name, antiderivative=antiderivative)

    # -- family hooks -------------------------------------------------------
    def _rho(self, Q):
        raise NotImplementedError

    def _drho(self, Q):
        raise NotImplementedError

    def _antiderivative(self, Q):
        return None

    def params(self):
        return {}

    # -- public evaluators --------------------------------------------------
    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"MassDensity.{self.family}({args})"

    def __eq__(self, other):
        return (
            isinstance(other, MassDensity)
            and self.family == other.family
            and self.params() == other.params()
            and self.q_domain == other.q_domain
        )

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params().items())), self.q_domain))

    def in_domain(self, Q):
        lo, hi = self.q_domain
        Q = np.asarray(Q, dtype=float)
        return (Q >= lo) & (Q < hi)

    def check_domain(self, Q):
        Q = np.asarray(Q, dtype=float)
        ok = self.in_domain(Q)
        if not np.all(ok):
            bad = Q[~ok] if Q.ndim else Q
            lo, hi = self.q_domain
            raise DomainError(
                f"Q = {np.ravel(bad)[0]!r} outside the domain [{lo}, {hi}) "
                f"of the {self.family} density"
            )
        return Q

    def rho(self, Q):
        """Density value; raises :class:`DomainError` outside ``q_domain``."""
        return _scalar_like(self._rho(self.check_domain(Q)), Q)

    def drho(self, Q):
        """Derivative of rho with respect to Q."""
        return _scalar_like(self._drho(self.check_domain(Q)), Q)

    def dH(self, Q):
        """H'(Q) = rho/2 + Q rho'."""
        Qa = self.check_domain(Q)
        return _scalar_like(0.5 * self._rho(Qa) + Qa * self._drho(Qa), Q)

    def frak_h(self, Q):
        """Q rho(Q)^2, whose derivative is positive exactly on the elliptic range."""
        Qa = self.check_domain(Q)
        return _scalar_like(Qa * self._rho(Qa) ** 2, Q)

    def subsonic_expr(self, Q):
        """rho^2 + 2 Q rho' rho, evaluated from the closed form (no domain check)."""
        Q = np.asarray(Q, dtype=float)
        r = self._rho(Q)
        return r * r + 2.0 * Q * self._drho(Q) * r

    def rho_integral(self, Q):
        """P(Q) = int_lo^Q rho(s) ds, vectorised."""
        Qa = self.check_domain(Q)
        P = self._antiderivative(Qa)
        if P is None:
            lo = self.q_domain[0]
            f = lambda s: float(self._rho(np.asarray(s)))
            P = np.vectorize(lambda q: adaptive_simpson(f, lo, q), otypes=[float])(Qa)
        return _scalar_like(P, Q)

    def H(self, Q, method="auto"):
        """H(Q) with H(lo) = 0.

        ``method="auto"`` uses the closed form when the family provides an
        antiderivative of rho; ``method="quadrature"`` forces adaptive Simpson
        on H' with absolute tolerance 1e-10.
        """
        Qa = self.check_domain(Q)
        if method not in ("auto", "quadrature"):
            raise ValueError(f"unknown method {method!r}")
        out = None
        if method == "auto":
            out = self._closed_H(Qa)
        if out is None:
            lo = self.q_domain[0]
            f = lambda s: float(0.5 * self._rho(np.asarray(s)) + s * self._drho(np.asarray(s)))
            out = np.vectorize(lambda q: adaptive_simpson(f, lo, q), otypes=[float])(Qa)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite H for the {self.family} density")
        return _scalar_like(out, Q)

    def _closed_H(self, Q):
        P = self._antiderivative(Q)
        if P is None:
            return None
        lo = self.q_domain[0]
        return Q * self._rho(Q) - lo * self._rho(np.asarray(lo)) - 0.5 * P


def _scalar_like(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return np.asarray(value, dtype=float)


def _powm1(base_log1p_arg, exponent):
    """(1 + x)**e - 1 computed without cancellation."""
    return np.expm1(exponent * np.log1p(base_log1p_arg))


class Chaplygin(MassDensity):
    family = "chaplygin"

    def __init__(self, gamma):
        gamma = float(gamma)
        if gamma == 1.0:
            raise ValueError("chaplygin density is singular at gamma = 1")
        if gamma <= -1.0:
            raise ValueError(f"adiabatic constant must exceed -1, got {gamma}")
        self.gamma = gamma
        self._a = 0.5 * (gamma - 1.0)
        self._b = 1.0 / (gamma - 1.0)
        super().__init__((0.0, 2.0 / (gamma + 1.0)))

    def params(self):
        return {"gamma": self.gamma}

    def _rho(self, Q):
        return np.exp(self._b * np.log1p(-self._a * Q))

    def _drho(self, Q):
        # d/dQ (1 - aQ)^b = -a b (1 - aQ)^(b-1) and a b = 1/2
        return -0.5 * np.exp((self._b - 1.0) * np.log1p(-self._a * Q))

    def _antiderivative(self, Q):
        e = self.gamma / (self.gamma - 1.0)
        return -2.0 / self.gamma * _powm1(-self._a * Q, e)


class MinimalSurface(MassDensity):
    family = "minimal_surface"

    def __init__(self):
        super().__init__((0.0, math.inf))

    def _rho(self, Q):
        return 1.0 / np.sqrt(1.0 + Q)

    def _drho(self, Q):
        return -0.5 * (1.0 + Q) ** -1.5

    def _antiderivative(self, Q):
        s = np.sqrt(1.0 + Q)
        return 2.0 * Q / (s + 1.0)

    def _closed_H(self, Q):
        s = np.sqrt(1.0 + Q)
        return Q / (s * (s + 1.0))


class PowerLaw(MassDensity):
    family = "power_law"

    def __init__(self, K, q):
        K, q = float(K), float(q)
        if K < 0:
            raise ValueError("power_law requires K >= 0")
        if K == 0 and q != 0:
            raise ValueError("power_law with K = 0 is not positive at Q = 0")
        self.K, self.q = K, q
        super().__init__((0.0, math.inf))

    def params(self):
        return {"K": self.K, "q": self.q}

    def _rho(self, Q):
        if self.q == 0:
            return np.ones_like(np.asarray(Q, dtype=float))
        return (self.K + Q) ** self.q

    def _drho(self, Q):
        if self.q == 0:
            return np.zeros_like(np.asarray(Q, dtype=float))
        return self.q * (self.K + Q) ** (self.q - 1.0)

    def _antiderivative(self, Q):
        K, q = self.K, self.q
        if q == 0:
            return np.asarray(Q, dtype=float) * 1.0
        if q == -1.0:
            return np.log1p(Q / K)
        return K ** (q + 1.0) * _powm1(Q / K, q + 1.0) / (q + 1.0)


class Constant(MassDensity):
    family = "constant"

    def __init__(self, c=1.0):
        c = float(c)
        if not c > 0:
            raise ValueError("constant density must be positive")
        self.c = c
        super().__init__((0.0, math.inf))

    def params(self):
        return {"c": self.c}

    def _rho(self, Q):
        return np.full_like(np.asarray(Q, dtype=float), self.c)

    def _drho(self, Q):
        return np.zeros_like(np.asarray(Q, dtype=float))

    def _antiderivative(self, Q):
        return self.c * np.asarray(Q, dtype=float)

    def _closed_H(self, Q):
        return 0.5 * self.c * Q


class Custom(MassDensity):
    def __init__(self, rho, drho, q_domain, name="custom", antiderivative=None):
        self._rho_fn, self._drho_fn = rho, drho
        self._anti_fn = antiderivative
        self.name = name
        super().__init__(q_domain)

    @property
    def family(self):
        return "custom"

    def params(self):
        return {"name": self.name}

    def __eq__(self, other):
        return self is other

    __hash__ = object.__hash__

    def _rho(self, Q):
        return np.asarray(self._rho_fn(np.asarray(Q, dtype=float)), dtype=float)

    def _drho(self, Q):
        return np.asarray(self._drho_fn(np.asarray(Q, dtype=float)), dtype=float)

    def _antiderivative(self, Q):
        if self._anti_fn is None:
            return None
        lo = self.q_domain[0]
        return np.asarray(self._anti_fn(Q), dtype=float) - float(self._anti_fn(lo))


def dual_minimal_surface():
    """The density (1 - Q)^(-1/2) on [0, 1) paired with the minimal surface density."""
    return MassDensity.custom(
        lambda Q: 1.0 / np.sqrt(1.0 - Q),
        lambda Q: 0.5 * (1.0 - Q) ** -1.5,
        (0.0, 1.0),
        name="maximal_surface",
        antiderivative=lambda Q: -2.0 * np.sqrt(1.0 - np.asarray(Q, dtype=float)),
    )


# -- module-level operations -------------------------------------------------

def rho(d, Q):
    return d.rho(Q)


def drho(d, Q):
    return d.drho(Q)


def h_eval(d, Q, method="auto"):
    return d.H(Q, method=method)


def frak_h(d, Q):
    return d.frak_h(Q)


def scan_points(lo, hi, samples):
    """Geometric sample ladder on [lo, hi]: dense near lo, logarithmic tail."""
    if not hi > lo:
        raise ValueError("empty scan range")
    samples = max(int(samples), 3)
    if lo > 0:
        pts = np.geomspace(lo, hi, samples)
    else:
        pts = np.concatenate([[0.0], np.geomspace(hi * 1e-10, hi, samples - 1)])
    return np.unique(pts)


def _check_scan(d, lo, hi):
    dlo, dhi = d.q_domain
    if lo < dlo or hi >= dhi:
        raise DomainError(
            f"scan [{lo}, {hi}] is not inside the domain [{dlo}, {dhi}) of the {d.family} density"
        )


def sonic_q(d, scan_max, samples=4096):
    """Smallest root of rho^2 + 2 Q rho' rho on (0, scan_max].

    A bounded Q domain is always scanned up to its supremum, evaluated by
    continuity; the Chaplygin family reaches its sonic value exactly there.
    Returns ``None`` when no root is found.
    """
    lo, hi = d.q_domain
    top = float(scan_max)
    if math.isfinite(hi):
        if top > hi:
            raise DomainError(f"scan_max {top} beyond the domain supremum {hi}")
        top = hi
    grid = np.unique(np.concatenate([
        np.geomspace(max(lo, top * 1e-12), top, samples // 2),
        np.linspace(lo, top, samples // 2 + 1)[1:],
    ]))
    with np.errstate(all="ignore"):
        S = d.subsonic_expr(grid)
    finite = np.isfinite(S)
    grid, S = grid[finite], S[finite]
    if grid.size == 0:
        return None
    zero = np.flatnonzero(S == 0.0)
    neg = np.flatnonzero(S < 0.0)
    first = min([i for i in (zero[:1].tolist() + neg[:1].tolist())], default=None)
    if first is not None:
        if S[first] == 0.0 or first == 0:
            return float(grid[first])
        a, b = float(grid[first - 1]), float(grid[first])
        for _ in range(200):
            m = 0.5 * (a + b)
            if m <= a or m >= b:
                break
            sm = float(d.subsonic_expr(m))
            if sm > 0:
                a = m
            else:
                b = m
        return 0.5 * (a + b)
    # a root sitting exactly on the supremum of a bounded domain, up to rounding
    if math.isfinite(hi) and grid[-1] == top and abs(S[-1]) <= 1e-12 * np.max(np.abs(S)):
        return float(top)
    return None


@dataclass
class DensityReport:
    family: str
    q_range: tuple
    samples: int
    sonic_Q: Optional[float]
    kappa_bounds: tuple
    lemma2_C: Optional[float]
    hypo_pos_C: float
    hypo_neg_C: float
    binding: str
    cavitates: bool
    rho_min: float


def lemma2_constant(d, q_max, samples=2000, q_min=None):
    """Empirical sup of Q rho(Q) / H(Q) over a geometric scan (Q = 0 excluded)."""
    lo = d.q_domain[0] if q_min is None else float(q_min)
    _check_scan(d, lo, q_max)
    Q = scan_points(lo, q_max, samples)
    Q = Q[Q > 0]
    H = d.H(Q)
    if np.any(H <= 0):
        raise EvaluationError(f"H vanishes at Q = {Q[H <= 0][0]!r} for the {d.family} density")
    return float(np.max(Q * d.rho(Q) / H))


def check_hypotheses(d, q_max, samples=2000, q_min=None):
    """Empirical ellipticity and growth constants of a density over a Q scan."""
    lo = d.q_domain[0] if q_min is None else float(q_min)
    _check_scan(d, lo, q_max)
    Q = scan_points(lo, q_max, samples)
    r = d.rho(Q)
    dr = d.drho(Q)
    kappa = r + 2.0 * Q * dr
    ratio = (0.5 * r + Q * dr) / r
    pos, neg = bool(np.any(dr > 0)), bool(np.any(dr < 0))
    binding = {(True, True): "both", (True, False): "hypo_pos",
               (False, True): "hypo_neg", (False, False): "none"}[(pos, neg)]
    try:
        l2 = lemma2_constant(d, q_max, samples, q_min=lo)
    except EvaluationError:
        l2 = None
    rho_min = float(np.min(r))
    return DensityReport(
        family=d.family,
        q_range=(lo, float(q_max)),
        samples=int(Q.size),
        sonic_Q=sonic_q(d, q_max),
        kappa_bounds=(float(np.min(kappa)), float(np.max(kappa))),
        lemma2_C=l2,
        hypo_pos_C=float(np.max(ratio)),
        hypo_neg_C=float(np.min(ratio)),
        binding=binding,
        cavitates=rho_min < d.cavitation_threshold,
        rho_min=rho_min,
    )
