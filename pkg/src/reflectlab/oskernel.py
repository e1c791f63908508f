"""Kernels, quadrature, Gram forms, PSD diagnostics and Cayley-type tables.

The central object is the J-form

    <f, g>_J = \\iint f(x) g(y) |1 - x y|^{s-1} dx dy

discretised on a basis of closed-form C^infinity bumps.  Because every bump
has a compact support, the tensor quadrature is done *per support*: each
bump carries its own Gauss--Legendre rule, which resolves the steep edges of
``exp(-1/(1-u^2))`` far better than a single global grid of the same order.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, SingularityError

DEFAULT_ORDER = 80
DEFAULT_TOL = 1e-9
ZERO_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# kernels


def kernel_J(x, y, s):
    """``|1 - x y|^{s-1}`` (vectorised)."""
    base = 1.0 - np.multiply(x, y)
    if s < 1 and np.any(base == 0.0):
        raise SingularityError("kernel_J evaluated on x y = 1")
    out = np.abs(base) ** (s - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def kernel_A(x, y, s):
    """``|x - y|^{s-1}`` (vectorised)."""
    diff = np.subtract(x, y)
    if s < 1 and np.any(diff == 0.0):
        raise SingularityError("kernel_A evaluated on the diagonal")
    out = np.abs(diff) ** (s - 1.0)
    return float(out) if np.ndim(out) == 0 else out


def kernel_J_handle(s):
    return lambda x, y: kernel_J(x, y, s)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple

    def __post_init__(self):
        lo, hi = self.interval
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape:
            raise DomainError("nodes and weights differ in length")
        if nodes.size and (nodes[0] <= lo or nodes[-1] >= hi or np.any(np.diff(nodes) <= 0)):
            raise DomainError("nodes must be strictly increasing inside the interval")
        if np.any(weights <= 0):
            raise DomainError("weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "interval", (float(lo), float(hi)))

    @classmethod
    def gauss_legendre(cls, order=DEFAULT_ORDER, interval=(-1.0, 1.0)):
        lo, hi = interval
        if not hi > lo:
            raise DomainError("empty interval")
        x, w = np.polynomial.legendre.leggauss(int(order))
        half = 0.5 * (hi - lo)
        return cls(lo + half * (x + 1.0), half * w, (lo, hi))

    @property
    def order(self):
        return self.nodes.size

    def integrate(self, values):
        return float(np.dot(self.weights, values))


# ---------------------------------------------------------------------------
# basis


def bump(u):
    """``exp(-1/(1-u^2))`` on ``|u| < 1`` and 0 elsewhere (vectorised)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


@dataclass(frozen=True)
class BasisFunctionSet:
    """Bumps ``phi_k(x) = bump((x - c_k) / w_k)``."""

    centers: np.ndarray
    widths: np.ndarray
    order: int = DEFAULT_ORDER
    _rules: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.centers, dtype=float))
        w = np.broadcast_to(np.asarray(self.widths, dtype=float), c.shape).copy()
        if np.any(w <= 0):
            raise DomainError("widths must be positive")
        if np.any(c - w <= -1.0) or np.any(c + w >= 1.0):
            raise DomainError("bump supports must lie inside (-1, 1)")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)
        rules = tuple(
            QuadratureRule.gauss_legendre(self.order, (ck - wk, ck + wk)) for ck, wk in zip(c, w)
        )
        object.__setattr__(self, "_rules", rules)

    @classmethod
    def default(cls, count=12, lo=-0.8, hi=0.8, width=0.15, order=DEFAULT_ORDER):
        return cls(np.linspace(lo, hi, count), np.full(count, width), order)

    @property
    def count(self):
        return self.centers.size

    @property
    def support(self):
        return float(np.min(self.centers - self.widths)), float(np.max(self.centers + self.widths))

    def supports(self):
        return [(c - w, c + w) for c, w in zip(self.centers, self.widths)]

    def rule(self, k):
        return self._rules[k]

    def evaluate(self, k, x):
        return bump((np.asarray(x, dtype=float) - self.centers[k]) / self.widths[k])

    def evaluate_all(self, x):
        """Matrix ``E[k, n] = phi_k(x_n)``."""
        x = np.asarray(x, dtype=float)
        return bump((x[None, :] - self.centers[:, None]) / self.widths[:, None])

    def subset(self, idx):
        idx = np.atleast_1d(idx)
        return BasisFunctionSet(self.centers[idx], self.widths[idx], self.order)

    def moments(self, weight=None):
        """``int phi_k(x) weight(x) dx`` by the per-support rules."""
        out = np.empty(self.count)
        for k, r in enumerate(self._rules):
            v = self.evaluate(k, r.nodes)
            if weight is not None:
                v = v * weight(r.nodes)
            out[k] = r.integrate(v)
        return out


# ---------------------------------------------------------------------------
# forms


@dataclass(frozen=True)
class FormMatrix:
    entries: np.ndarray
    tolerance: float = DEFAULT_TOL
    eig_min: float = field(init=False)
    eig_max: float = field(init=False)
    radical_dim: int = field(init=False)
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.entries))
        if m.shape[0] != m.shape[1]:
            raise DomainError("form matrix must be square")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if m.size and np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
            raise DomainError("form matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        if not np.iscomplexobj(m) or np.all(m.imag == 0):
            m = m.real
        ev = np.linalg.eigvalsh(m) if m.size else np.zeros(0)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "eig_min", float(ev[0]) if ev.size else 0.0)
        object.__setattr__(self, "eig_max", float(ev[-1]) if ev.size else 0.0)
        cut = self.tolerance * self.spectral_scale
        object.__setattr__(self, "radical_dim", int(np.sum(np.abs(ev) <= cut)))

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def spectral_scale(self):
        return max(abs(self.eig_max), abs(self.eig_min))

    @property
    def verdict(self):
        return psd_report(self)[2]


def psd_report(F):
    """Return ``(eig_min, eig_max, verdict)`` with verdict in {PSD, indefinite, zero}."""
    if not isinstance(F, FormMatrix):
        F = FormMatrix(F)
    scale = F.spectral_scale
    if scale <= ZERO_FLOOR:
        verdict = "zero"
    elif F.eig_min >= -F.tolerance * scale:
        verdict = "PSD"
    else:
        verdict = "indefinite"
    return F.eig_min, F.eig_max, verdict


def bergman_gram(points, lam, tol=DEFAULT_TOL):
    """Gram matrix of ``(1 - z conj(w))^{-lambda}`` (principal branch)."""
    z = np.asarray(points, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("points must lie in the open unit disk")
    G = (1.0 - z[:, None] * z[None, :].conj()) ** (-float(lam))
    return FormMatrix(G, tol)


def gram_form(basis, kernel, quad=None, tol=DEFAULT_TOL):
    """``F_ij = iint phi_i(x) phi_j(y) K(x, y) dx dy``.

    With ``quad=None`` each bump is integrated by its own Gauss rule; given a
    ``QuadratureRule`` the global tensor grid is used instead.
    """
    n = basis.count
    if quad is not None:
        lo, hi = quad.interval
        slo, shi = basis.support
        if slo < lo or shi > hi:
            raise DomainError("basis support exceeds quadrature interval")
        E = basis.evaluate_all(quad.nodes) * quad.weights[None, :]
        K = kernel(quad.nodes[:, None], quad.nodes[None, :])
        return FormMatrix(E @ K @ E.T, tol)
    nodes = [basis.rule(k).nodes for k in range(n)]
    vals = [basis.evaluate(k, nodes[k]) * basis.rule(k).weights for k in range(n)]
    F = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            K = kernel(nodes[i][:, None], nodes[j][None, :])
            F[i, j] = F[j, i] = vals[i] @ K @ vals[j]
    return FormMatrix(F, tol)


# ---------------------------------------------------------------------------
# Cayley-type constants

_SPACE_RE = re.compile(
    r"^\s*(?P<fam>SU|SOstar|SO\*|Sp|SO0|SO_0|SO|E7)\s*(?:\((?P<args>[^)]*)\))?\s*$", re.IGNORECASE
)
FAMILIES = ("SU", "SOstar", "Sp", "SO", "E7")


def parse_space(space):
    """Normalise a space tag to ``(family, n)``.

    Accepts tuples ``("SU", 3)`` or strings ``"SU(3,3)"``, ``"SOstar(8)"``
    (the argument is ``4n``), ``"Sp(3,R)"``, ``"SO(5,2)"`` and ``"E7"``.
    """
    if isinstance(space, tuple):
        fam, n = space
        fam = {"SO*": "SOstar", "SO0": "SO", "SO_0": "SO"}.get(fam, fam)
        if fam not in FAMILIES:
            raise DomainError(f"unknown family {fam!r}")
        if fam == "E7":
            return fam, None
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise DomainError("n must be a positive integer")
        return fam, int(n)
    m = _SPACE_RE.match(str(space))
    if not m:
        raise DomainError(f"unrecognised space tag {space!r}")
    fam = m.group("fam").upper()
    args = [a.strip() for a in (m.group("args") or "").split(",") if a.strip()]
    try:
        if fam == "E7":
            if args not in ([], ["-25"]):
                raise DomainError("E7 takes no parameter other than the real form (-25)")
            return "E7", None
        if fam == "SU":
            if len(args) != 2 or args[0] != args[1]:
                raise DomainError("expected SU(n,n)")
            n = int(args[0])
            fam = "SU"
        elif fam in ("SOSTAR", "SO*"):
            if len(args) != 1 or int(args[0]) % 4:
                raise DomainError("expected SOstar(4n)")
            n = int(args[0]) // 4
            fam = "SOstar"
        elif fam == "SP":
            if len(args) != 2 or args[1].upper() not in ("R", "IR"):
                raise DomainError("expected Sp(n,R)")
            n = int(args[0])
            fam = "Sp"
        else:
            if len(args) != 2 or args[1] != "2":
                raise DomainError("expected SO(n,2)")
            n = int(args[0])
            fam = "SO"
    except ValueError as exc:
        raise DomainError(f"malformed parameter in {space!r}") from exc
    if n < 1:
        raise DomainError("n must be positive")
    return fam, n


def cayley_R(space):
    fam, n = parse_space(space)
    if fam == "SU":
        return float(n if n % 2 else 0)
    if fam == "SOstar":
        return float(n)
    if fam == "Sp":
        return n / 2.0 if n % 2 == 0 else 0.0
    if fam == "SO":
        return float({0: 0, 1: 1, 2: 2, 3: 1}[n % 4])
    return 3.0


def cayley_Lpos(space):
    fam, n = parse_space(space)
    if fam == "E7":
        value = 3.0
    else:
        value = float({"SU": n, "SOstar": 2 * n, "Sp": n, "SO": 2}[fam])
    assert value >= cayley_R(space), "highest-weight range must contain [-R, R]"
    return value


def lpos_formula(gamma, r, d):
    if r < 1 or d < 0:
        raise DomainError("need r >= 1 and d >= 0")
    return -gamma * (r - 1) * d / 2.0


def cayley_table(n_values: Sequence[int] = (1, 2, 3, 4, 5, 6, 7, 8)):
    """Rows ``(tag, R, L_pos)`` for every family and the given ``n``."""
    rows = []
    for fam in ("SU", "SOstar", "Sp", "SO"):
        for n in n_values:
            tag = (fam, n)
            rows.append((format_space(tag), cayley_R(tag), cayley_Lpos(tag)))
    rows.append(("E7(-25)", cayley_R(("E7", None)), cayley_Lpos(("E7", None))))
    return rows


def format_space(space):
    fam, n = parse_space(space)
    return {
        "SU": f"SU({n},{n})",
        "SOstar": f"SO*({4 * n})",
        "Sp": f"Sp({n},R)",
        "SO": f"SO0({n},2)",
        "E7": "E7(-25)",
    }[fam]


KernelHandle = Callable[[np.ndarray, np.ndarray], np.ndarray]
