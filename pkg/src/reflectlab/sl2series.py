"""Discretised complementary series of SL(2, R) on the interval (-1, 1).

The representation is

    [pi_s(g) f](x) = |-b x + d|^{-(s+1)} f((a x - c) / (-b x + d)),

and the J-form has kernel ``|1 - x y|^{s-1}``.  Moved forms are never
computed by evaluating ``pi_s(g) phi`` on a grid.  Instead the integral is
pulled back through ``x = g . u``.  Since ``dx = du / (a + b u)^2`` and
``-b x + d = 1 / (a + b u)``, the moved forms become

    <pi(g) phi_i, J pi(g) phi_j> = iint phi_i(u) phi_j(v)
                                   |(a + b u)(a + b v) - (c + d u)(c + d v)|^{s-1}
    <pi(g) phi_i, J phi_j>       = iint phi_i(u) phi_j(y) |a + b u - (c + d u) y|^{s-1}

so the quadrature always lives on the original bump supports.  Writing
``g = I + E``, the first kernel differs from ``1 - u v`` by a bilinear
polynomial in ``E``.  This lets ``F(g) - F(I)`` be formed without
cancellation, which is what makes small-step generator estimates reliable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import sl2core as core
from .errors import DomainError, PoleError
from .oskernel import (
    BasisFunctionSet,
    FormMatrix,
    QuadratureRule,
    gram_form,
    kernel_J,
    kernel_J_handle,
)
from .osquotient import GeneratorSpectrum, contraction_check, generator_spectrum, semigroup_law_check

JFORM_TOL = 1e-13
DUAL_DELTA = 1e-8


@dataclass(frozen=True)
class SeriesParameter:
    s: float

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))

    @property
    def complementary(self):
        return 0.0 < self.s < 1.0

    @property
    def nu(self):
        return self.s


def _s(s):
    return s.s if isinstance(s, SeriesParameter) else float(s)


@dataclass(frozen=True)
class MovedForm:
    group_element: core.GroupElement
    form: FormMatrix
    basis_tag: str


def _basis(basis):
    return BasisFunctionSet.default() if basis is None else basis


def _tag(basis):
    return f"bumps[{basis.count}]@{basis.support[0]:.3g},{basis.support[1]:.3g}/o{basis.order}"


def _grids(basis, quad):
    """Per-function (nodes, weighted values) pairs."""
    if quad is not None:
        E = basis.evaluate_all(quad.nodes) * quad.weights[None, :]
        return [(quad.nodes, E[k]) for k in range(basis.count)]
    out = []
    for k in range(basis.count):
        r = basis.rule(k)
        out.append((r.nodes, basis.evaluate(k, r.nodes) * r.weights))
    return out


def _assemble(basis, quad, kfun, symmetric):
    g = _grids(basis, quad)
    n = len(g)
    F = np.empty((n, n))
    for i in range(n):
        for j in range(i if symmetric else 0, n):
            K = kfun(g[i][0][:, None], g[j][0][None, :])
            F[i, j] = g[i][1] @ K @ g[j][1]
            if symmetric:
                F[j, i] = F[i, j]
    return F


# ---------------------------------------------------------------------------
# representation


def pi_eval(g, s, phi, x):
    """``[pi_s(g) phi](x)`` for a closed-form ``phi``."""
    s = _s(s)
    den = -g.b * x + g.d
    if np.any(den == 0.0):
        raise PoleError("-b x + d vanishes")
    return np.abs(den) ** (-(s + 1.0)) * phi((g.a * x - g.c) / den)


def jform(s, basis=None, quad=None):
    basis = _basis(basis)
    return gram_form(basis, kernel_J_handle(_s(s)), quad, tol=JFORM_TOL)


def _require_S(g):
    if not core.semigroup_contains(g):
        raise DomainError("g is not in the contraction semigroup S")


def moved_jform(g, s, basis=None, quad=None):
    """Two-sided form ``<pi(g) phi_i, J pi(g) phi_j>``."""
    _require_S(g)
    basis = _basis(basis)
    e = _s(s) - 1.0
    a, b, c, d = g.a, g.b, g.c, g.d

    def k(u, v):
        return np.abs((a + b * u) * (a + b * v) - (c + d * u) * (c + d * v)) ** e

    return MovedForm(g, FormMatrix(_assemble(basis, quad, k, True), JFORM_TOL), _tag(basis))


def one_sided_form(g, s, basis=None, quad=None):
    """``G[i, j] = <pi(g) phi_i, J phi_j>`` (not symmetric in general)."""
    _require_S(g)
    basis = _basis(basis)
    e = _s(s) - 1.0
    a, b, c, d = g.a, g.b, g.c, g.d
    return _assemble(basis, quad, lambda u, y: np.abs(a + b * u - (c + d * u) * y) ** e, False)


def cross_form(g1, g2, s, basis=None, quad=None):
    """``C[i, j] = <pi(g2) phi_i, J pi(g1) phi_j>``."""
    _require_S(g1)
    _require_S(g2)
    basis = _basis(basis)
    e = _s(s) - 1.0

    def k(u, v):
        return np.abs((g2.a + g2.b * u) * (g1.a + g1.b * v) - (g2.c + g2.d * u) * (g1.c + g1.d * v)) ** e

    return _assemble(basis, quad, k, False)


def moved_increment(E, s, basis=None, quad=None):
    """``F(I + E) - F(I)`` for the two-sided form, free of cancellation."""
    basis = _basis(basis)
    E = np.asarray(E, dtype=float)
    al, be, ga, de = E[0, 0], E[0, 1], E[1, 0], E[1, 1]
    k0 = 2 * al + al * al - ga * ga
    k1 = (1 + al) * be - ga * (1 + de)
    k2 = be * be - 2 * de - de * de
    e = _s(s) - 1.0

    def k(u, v):
        base = 1.0 - u * v
        dP = k0 + k1 * (u + v) + k2 * u * v
        return np.abs(base) ** e * np.expm1(e * np.log1p(dP / base))

    return _assemble(basis, quad, k, True)


def selfadjoint_residual(g, s, basis=None, quad=None):
    """``max |<pi(g) phi_i, J phi_j> - <phi_i, J pi(g) phi_j>|``."""
    G = one_sided_form(g, s, basis, quad)
    return float(np.max(np.abs(G - G.T)))


def contraction_norm(g, s, basis=None, quad=None):
    F0 = jform(s, basis, quad)
    return contraction_check(F0, moved_jform(g, s, basis, quad).form)


def semigroup_law_residual(g1, g2, s, basis=None, quad=None):
    """Semigroup-law residual for ``g1, g2`` in ``exp C`` via one-sided forms."""
    F0 = jform(s, basis, quad)
    G1 = one_sided_form(g1, s, basis, quad)
    G2 = one_sided_form(g2, s, basis, quad)
    G12 = one_sided_form(g1 @ g2, s, basis, quad)
    C = cross_form(g1, g2, s, basis, quad)
    return semigroup_law_check(F0, G1, G2, G12, C)


def dual_spectrum(Y, s, basis=None, quad=None, delta=DUAL_DELTA, tol=1e-5) -> GeneratorSpectrum:
    """Spectrum of the form family ``t -> F(exp t Y)`` for ``Y`` in C."""
    if not core.cone_contains(Y):
        raise DomainError("Y is not in the cone C")
    if not SeriesParameter(_s(s)).complementary:
        raise DomainError("dual_spectrum needs 0 < s < 1")
    basis = _basis(basis)
    F0 = jform(s, basis, quad)

    def family(t):
        if t == 0.0:
            return F0
        return moved_increment(core.exp_minus_identity(t * Y), s, basis, quad)

    return generator_spectrum(family, delta, tol=tol, increment=True)


# ---------------------------------------------------------------------------
# intertwiner


def _panel_rule(order, panels):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    nodes = np.concatenate([0.5 * (edges[k + 1] - edges[k]) * (x + 1) + edges[k] for k in range(panels)])
    weights = np.concatenate([0.5 * (edges[k + 1] - edges[k]) * w for k in range(panels)])
    return nodes, weights


def intertwiner_apply(s, f, x, support=(-1.0, 1.0), order=40, panels=12):
    """``A_s f(x) = int f(y) |x - y|^{s-1} dy`` over ``support``.

    Each side of ``x`` is mapped by ``w = |x - y|^s``.  This turns
    ``|x - y|^{s-1} dy`` into ``dw / s``, so only the smooth factor ``f`` is
    left to integrate.
    """
    s = _s(s)
    if s <= 0:
        raise DomainError("A_s needs s > 0")
    lo, hi = support
    nodes, weights = _panel_rule(order, panels)
    total = 0.0
    if x > lo:
        L = (x - lo) ** s if x < hi else None
        if L is None:  # x right of the support: no singularity inside
            wlo, whi = (x - hi) ** s, (x - lo) ** s
        else:
            wlo, whi = 0.0, L
        wv = wlo + (whi - wlo) * nodes
        total += (whi - wlo) * float(np.dot(weights, f(x - wv ** (1.0 / s)))) / s
    if x < hi:
        if x > lo:
            wlo, whi = 0.0, (hi - x) ** s
        else:
            wlo, whi = (lo - x) ** s, (hi - x) ** s
        wv = wlo + (whi - wlo) * nodes
        total += (whi - wlo) * float(np.dot(weights, f(x + wv ** (1.0 / s)))) / s
    return total


def moved_support(g, support):
    lo, hi = sorted((core.point_action(g, support[0]), core.point_action(g, support[1])))
    return lo, hi


def intertwining_residual(s, f, support, g, xs):
    """``max |A_s pi_s(g) f - pi_{-s}(g) A_s f|`` at the sample points."""
    s = _s(s)
    _require_S(g)
    gsupp = moved_support(g, support)
    moved = lambda y: pi_eval(g, s, f, y)
    res = 0.0
    for x in xs:
        lhs = intertwiner_apply(s, moved, x, gsupp)
        den = -g.b * x + g.d
        inner = (g.a * x - g.c) / den
        rhs = abs(den) ** (s - 1.0) * intertwiner_apply(s, f, inner, support)
        res = max(res, abs(lhs - rhs))
    return res


# ---------------------------------------------------------------------------
# exact identities


def kernel_identity_check(s, samples):
    s = _s(s)
    worst = 0.0
    for x, y in samples:
        g = core.tau(core.nbar(x)).inverse() @ core.nbar(y)
        lhs = core.a_nbar_character(g, s - 1.0)
        worst = max(worst, abs(lhs - kernel_J(x, y, s)))
    return worst


def positive_kernel_certificate(s, h_grid):
    s = _s(s)
    for h in h_grid:
        if not core.is_in_H(h):
            raise DomainError("grid element outside H")
    n = len(h_grid)
    G = np.empty((n, n))
    for i, hi in enumerate(h_grid):
        for j, hj in enumerate(h_grid):
            G[i, j] = core.a_nbar_character(hi.inverse() @ hj, s - 1.0)
    return FormMatrix(0.5 * (G + G.T))


def pr_fixture(s, basis=None):
    """Finite-dimensional data for ``pr_axiom_check`` on the bump space.

    Returns ``(F0, moved_forms)`` where the J-form is the PR3 object and
    ``moved_forms`` lists ``(g, Fg)`` for a few cone elements.
    """
    basis = _basis(basis)
    F0 = jform(s, basis)
    Ys = [core.q(1.0, 0.0) * 0.3, core.q(1.0, 1.0) * 0.2, core.q(1.0, -1.0) * 0.2]
    return F0, [(core.exp_lie(Y), moved_jform(core.exp_lie(Y), s, basis).form) for Y in Ys]
