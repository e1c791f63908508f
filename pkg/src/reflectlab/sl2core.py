"""Group, Lie algebra, cone and semigroup calculus for SL(2, R).

The involution is ``tau(g) = s g s`` with ``s = [[0, 1], [1, 0]]``, so that
``tau([[a, b], [c, d]]) = [[d, c], [b, a]]``.  Its fixed group is
``H = {+-h_t}`` with ``h_t = [[cosh t, sinh t], [sinh t, cosh t]]`` and the
(-1)-eigenspace of its differential is ``q = {q(r, s)}``,
``q(r, s) = [[r, s], [-s, -r]]``.  The cone
``C = {q(r, s) : r + s >= 0, r - s >= 0, r >= 0}`` generates the contraction
semigroup ``S = H exp C`` of the interval ``I = (-1, 1)``.

Points of ``I`` are identified with ``nbar_y = [[1, 0], [y, 1]]``; the left
action reads ``g . y = (c + d y) / (a + b y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ChartError, DomainError, PoleError

DET_RTOL = 1e-12
H_TOL = 1e-10
RENORMALIZE_AFTER = 100


@dataclass(frozen=True)
class GroupElement:
    """A real unimodular 2x2 matrix ``[[a, b], [c, d]]``."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, float(getattr(self, name)))
        det = self.a * self.d - self.b * self.c
        scale = max(1.0, abs(self.a * self.d) + abs(self.b * self.c))
        if not abs(det - 1.0) <= DET_RTOL * scale:
            raise DomainError(f"determinant {det!r} is not 1")

    @classmethod
    def from_matrix(cls, m, renormalize=False):
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise DomainError("expected a 2x2 matrix")
        if renormalize:
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            if det <= 0:
                raise DomainError("cannot renormalize a matrix with det <= 0")
            m = m / math.sqrt(det)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def inverse(self):
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return GroupElement.from_matrix(self.matrix @ other.matrix, renormalize=True)

    def __neg__(self):
        return GroupElement(-self.a, -self.b, -self.c, -self.d)

    def allclose(self, other, tol=1e-12):
        return bool(np.max(np.abs(self.matrix - other.matrix)) <= tol)


@dataclass(frozen=True)
class LieElement:
    """A traceless real 2x2 matrix ``[[x11, x12], [x21, -x11]]``."""

    x11: float
    x12: float
    x21: float

    def __post_init__(self):
        for name in ("x11", "x12", "x21"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_matrix(cls, m, tol=1e-12):
        m = np.asarray(m, dtype=float)
        if abs(m[0, 0] + m[1, 1]) > tol * max(1.0, np.abs(m).max()):
            raise DomainError("matrix is not traceless")
        return cls(0.5 * (m[0, 0] - m[1, 1]), m[0, 1], m[1, 0])

    @property
    def matrix(self):
        return np.array([[self.x11, self.x12], [self.x21, -self.x11]])

    def __add__(self, other):
        return LieElement(self.x11 + other.x11, self.x12 + other.x12, self.x21 + other.x21)

    def __sub__(self, other):
        return LieElement(self.x11 - other.x11, self.x12 - other.x12, self.x21 - other.x21)

    def __mul__(self, t):
        return LieElement(t * self.x11, t * self.x12, t * self.x21)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def norm(self):
        return float(np.max(np.abs(self.matrix)))

    def hq_split(self):
        """Return ``(H-part, Q-part)`` with ``dtau(H) = H`` and ``dtau(Q) = -Q``."""
        sym = 0.5 * (self.x12 + self.x21)
        anti = 0.5 * (self.x12 - self.x21)
        return LieElement(0.0, sym, sym), LieElement(self.x11, anti, -anti)


@dataclass(frozen=True)
class NbarFactorization:
    """``g = nbar_y . p(a, x)`` with ``p(a, x) = [[a, a x], [0, 1/a]]``."""

    y: float
    a: float
    x: float

    @property
    def a_nbar(self):
        return abs(self.a)

    def reassemble(self):
        return nbar(self.y) @ p_element(self.a, self.x)


# -- named elements -----------------------------------------------------------

def h_t(t):
    return GroupElement(math.cosh(t), math.sinh(t), math.sinh(t), math.cosh(t))


def a_t(t):
    """``diag(e^t, e^-t) = exp(2 t X0)``."""
    return GroupElement(math.exp(t), 0.0, 0.0, math.exp(-t))


def nbar(y):
    return GroupElement(1.0, 0.0, y, 1.0)


def n_element(x):
    return GroupElement(1.0, x, 0.0, 1.0)


def p_element(a, x):
    return GroupElement(a, a * x, 0.0, 1.0 / a)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return GroupElement(c, s, -s, c)


W = GroupElement(0.0, 1.0, -1.0, 0.0)


def q(r, s):
    return LieElement(r, s, -s)


X0 = LieElement(0.5, 0.0, 0.0)
X1 = LieElement(0.0, 1.0, 0.0)
X_1 = LieElement(0.0, 0.0, 1.0)
H1 = LieElement(1.0, 0.0, 0.0)


def bracket(x, y):
    m = x.matrix @ y.matrix - y.matrix @ x.matrix
    return LieElement.from_matrix(m)


# -- involutions ----------------------------------------------------------------

def tau(g):
    return GroupElement(g.d, g.c, g.b, g.a)


def tau_lie(x):
    return LieElement(-x.x11, x.x21, x.x12)


def theta(g):
    """Cartan involution, inverse transpose."""
    return GroupElement(g.d, -g.c, -g.b, g.a)


def is_in_H(g, tol=H_TOL):
    return bool(np.max(np.abs(tau(g).matrix - g.matrix)) <= tol)


# -- exponential ---------------------------------------------------------------

def exp_parts(x):
    """Return ``(cm1, sh)`` with ``exp(X) = I + cm1 * I + sh * X``.

    Uses ``X^2 = -det(X) I``; ``cm1`` is computed without cancellation so that
    ``exp(X) - I`` is accurate for small ``X``.
    """
    m2 = x.x11 * x.x11 + x.x12 * x.x21
    if m2 > 0:
        m = math.sqrt(m2)
        return 2.0 * math.sinh(0.5 * m) ** 2, math.sinh(m) / m
    if m2 < 0:
        m = math.sqrt(-m2)
        return -2.0 * math.sin(0.5 * m) ** 2, math.sin(m) / m
    return 0.0, 1.0


def exp_minus_identity(x):
    cm1, sh = exp_parts(x)
    return cm1 * np.eye(2) + sh * x.matrix


def exp_lie(x):
    return GroupElement.from_matrix(np.eye(2) + exp_minus_identity(x), renormalize=True)


def product(*elements):
    """Ordered product; long words are renormalised to keep ``det = 1``."""
    if not elements:
        return GroupElement.identity()
    m = np.eye(2)
    for k, g in enumerate(elements, 1):
        m = m @ g.matrix
        if k % RENORMALIZE_AFTER == 0:
            m = m / math.sqrt(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    return GroupElement.from_matrix(m, renormalize=True)


# -- cone and semigroup ---------------------------------------------------------

def cone_contains(y, tol=1e-12):
    hpart, qpart = y.hq_split()
    if hpart.norm() > tol:
        return False
    r, s = qpart.x11, qpart.x12
    return r + s >= -tol and r - s >= -tol and r >= -tol


def point_action(g, x):
    den = g.a + g.b * x
    if den == 0.0 or abs(den) <= 1e-15 * (abs(g.a) + abs(g.b * x)):
        raise PoleError(f"a + b x vanishes at x = {x!r}")
    return (g.c + g.d * x) / den


def moebius(g, x):
    """Vectorised ``g . x`` without pole checks."""
    return (g.c + g.d * x) / (g.a + g.b * x)


def semigroup_contains(g, tol=1e-9):
    # a + b x keeps one sign on [-1, 1] iff |a| > |b|
    if not abs(g.a) > abs(g.b):
        return False
    lo, hi = sorted((point_action(g, -1.0), point_action(g, 1.0)))
    return lo >= -1.0 - tol and hi <= 1.0 + tol


# -- N-bar chart -----------------------------------------------------------------

def nbar_factor(g):
    if g.a == 0.0 or abs(g.a) <= 1e-15 * max(abs(g.b), abs(g.c), abs(g.d)):
        raise ChartError("g is not in N-bar P (upper-left entry vanishes)")
    return NbarFactorization(y=g.c / g.a, a=g.a, x=g.b / g.a)


def zeta(h):
    if not is_in_H(h):
        raise DomainError("zeta is defined on H = G^tau only")
    return nbar_factor(h).y


def a_nbar_character(g, exponent):
    return nbar_factor(g).a_nbar ** exponent


def random_cone_element(rng, interior=True, scale=1.0):
    """Sample ``q(r, s)`` in C (in the interior when ``interior``)."""
    r = scale * rng.uniform(0.05 if interior else 0.0, 1.0)
    lim = r * (0.95 if interior else 1.0)
    return q(r, rng.uniform(-lim, lim))


def random_semigroup_element(rng, t_max=1.5, scale=1.0):
    """``h_t exp(Y)`` with ``Y`` in the interior of C."""
    return h_t(rng.uniform(-t_max, t_max)) @ exp_lie(random_cone_element(rng, scale=scale))


def random_group_element(rng, scale=1.0):
    x = LieElement(*rng.normal(scale=scale, size=3))
    return rotation(rng.uniform(0, 2 * math.pi)) @ exp_lie(x)


def compose_all(elements):
    return reduce(lambda u, v: u @ v, elements, GroupElement.identity())
