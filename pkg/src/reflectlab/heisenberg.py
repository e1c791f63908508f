"""Heisenberg-group models.

* The Schroedinger representation ``pi_hbar(a, b, c) f(x) = e^{i hbar (c + b x)} f(x + a)``
  on periodic grids and on closed-form functions.
* The uncorrelated-subspace theorem on finite two-component models.
* The reflection-positive kernel

      F(x, y) = \\iint e^{i(x xi + y eta)} / (xi^2 + eta^2 + 1) dxi deta = 2 pi K_0(r)

  on the n = 1 group.  ``F`` does not depend on ``c``, so every c-integral in
  the positivity forms factors out as ``\\int f dc``.
* A random probe showing that ``2 Re <A_+ h_+, A_- h_->`` is indefinite on
  Hardy-space pairs.
"""
from __future__ import annotations

import hashlib
import functools
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.linalg import orth

from .errors import DomainError, GridError, HypothesisError, SupportError


# ---------------------------------------------------------------------------
# group


@dataclass(frozen=True)
class HeisenbergElement:
    a: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != b.shape or a.ndim != 1:
            raise DomainError("a and b must be vectors of equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def identity(cls, n=1):
        return cls(np.zeros(n), np.zeros(n), 0.0)

    @property
    def n(self):
        return self.a.size

    def __mul__(self, other):
        return HeisenbergElement(self.a + other.a, self.b + other.b, self.c + other.c + float(self.a @ other.b))

    def inverse(self):
        return HeisenbergElement(-self.a, -self.b, -self.c + float(self.a @ self.b))

    def allclose(self, other, tol=1e-12):
        return (
            np.allclose(self.a, other.a, atol=tol, rtol=0)
            and np.allclose(self.b, other.b, atol=tol, rtol=0)
            and abs(self.c - other.c) <= tol
        )


def tau(g):
    return HeisenbergElement(g.a, -g.b, -g.c)


@dataclass(frozen=True)
class PeriodicGrid:
    """Points ``x0 + k h``, ``k = 0..N-1`` on a circle of length ``N h``."""

    x0: float
    h: float
    N: int

    @property
    def points(self):
        return self.x0 + self.h * np.arange(self.N)

    @property
    def length(self):
        return self.h * self.N

    def inner(self, f, g):
        return complex(self.h * np.vdot(f, g))

    def norm(self, f):
        return math.sqrt(max(self.inner(f, f).real, 0.0))


def _shift_steps(grid, a, tol=1e-9):
    m = a / grid.h
    k = round(m)
    if abs(m - k) > tol:
        raise GridError(f"shift {a!r} is not a multiple of the grid step")
    return int(k)


def pi_hbar(g, hbar, f, grid=None):
    """Apply ``pi_hbar(g)`` to samples on a periodic grid or to a callable."""
    if g.n != 1:
        raise DomainError("only n = 1 is implemented")
    a, b, c = float(g.a[0]), float(g.b[0]), g.c
    if grid is None:
        if not callable(f):
            raise DomainError("sampled input needs a grid")
        return lambda x: np.exp(1j * hbar * (c + b * np.asarray(x))) * f(np.asarray(x) + a)
    k = _shift_steps(grid, a)
    turns = hbar * b * grid.length / (2 * math.pi)
    if abs(turns - round(turns)) > 1e-9:
        raise GridError("b is not compatible with the grid period (hbar b L must be in 2 pi Z)")
    x = grid.points
    return np.exp(1j * hbar * (c + b * x)) * np.roll(np.asarray(f, dtype=complex), -k)


def compatible_b(grid, hbar, m):
    """The ``m``-th momentum compatible with the grid period."""
    return 2 * math.pi * m / (hbar * grid.length)


# ---------------------------------------------------------------------------
# uncorrelated subspaces


@dataclass(frozen=True)
class TwoComponentVector:
    """Coordinates ``(plus, minus)`` of a vector in ``H_+ + H_-``."""

    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "plus", np.asarray(self.plus, dtype=complex))
        object.__setattr__(self, "minus", np.asarray(self.minus, dtype=complex))

    @classmethod
    def from_stacked(cls, v):
        v = np.asarray(v)
        if v.shape[0] % 2:
            raise DomainError("stacked vector must have even length")
        k = v.shape[0] // 2
        return cls(v[:k], v[k:])

    def stacked(self):
        return np.concatenate([self.plus, self.minus])

    def swap(self):
        """The reflection ``J = [[0, T], [T^*, 0]]`` with ``T = I``."""
        return TwoComponentVector(self.minus, self.plus)

    def norm(self):
        return float(np.linalg.norm(self.stacked()))


def _phases(x, hbar, b, a, beta):
    arg = hbar * beta * b * (a + x)
    return np.concatenate([np.exp(1j * arg), np.exp(-1j * arg)])


def _orth(V, tol):
    V = np.asarray(V, dtype=complex)
    if V.size == 0 or V.shape[1] == 0:
        return np.zeros((V.shape[0], 0), dtype=complex)
    U, sv, _ = np.linalg.svd(V, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros((V.shape[0], 0), dtype=complex)
    return U[:, sv > tol * max(1.0, sv[0])]


def _projector(Q):
    return Q @ Q.conj().T


def default_a_grid(hbar, b, beta, N=16):
    """Period-aligned grid: ``sum_j exp(-2 i hbar beta b a_j) = 0`` exactly."""
    return np.arange(N) * math.pi / (hbar * beta * b * N)


def invariant_hull(V, diagonals, tol=1e-10, digits=10):
    """Smallest subspace containing ``V`` and invariant under the diagonal operators.

    The unital algebra generated by commuting diagonals consists of the
    diagonals constant on joint level sets.  The hull is therefore the
    direct sum over level sets of ``V`` restricted to each set.  Iterating
    ``Q -> span(Q, d Q)`` instead is numerically unstable, because nearby
    phases make the Krylov blocks almost collinear.
    """
    V = np.asarray(V, dtype=complex)
    rows = np.round(np.stack([np.asarray(d) for d in diagonals], axis=1), digits) if diagonals else None
    groups = {}
    for k in range(V.shape[0]):
        key = () if rows is None else tuple(rows[k].tolist())
        groups.setdefault(key, []).append(k)
    blocks = []
    for idx in groups.values():
        B = np.zeros_like(V)
        B[idx] = V[idx]
        blocks.append(_orth(B, tol))
    return _orth(np.hstack(blocks), tol)


@dataclass(frozen=True)
class UncorrelateResult:
    Dplus: np.ndarray
    Dminus: np.ndarray
    residual: float
    violation: float
    enlarged: bool
    K0: np.ndarray


def _operators(x, hbar, b, beta_grid, a_grid):
    ops = []
    for beta in beta_grid:
        grid_a = default_a_grid(hbar, b, beta) if a_grid is None else np.asarray(a_grid, dtype=float)
        ops.append((beta, grid_a, [_phases(x, hbar, b, a, beta) for a in grid_a]))
    return ops


def uncorrelate(K0, hbar, x, b=1.0, beta_grid=(1.0,), a_grid=None, tol=1e-10, enlarge=False):
    """Split an invariant subspace of ``H_+ + H_-`` into ``D_+ + D_-``.

    ``K0`` has columns ``(f_+, f_-)`` stacked as vectors of length ``2 K``.
    The operators ``pi(a) pi(beta b) pi(-a)`` act by the diagonal phases
    ``exp(+- i hbar beta b (a + x_k))``.  Averaging against
    ``exp(-+ i hbar beta b a)`` over a period-aligned a-grid kills one
    component exactly.  Undoing the ``a = 0`` phase, which is legitimate
    because K0 is invariant under it, then returns ``(f_+, 0)`` and
    ``(0, f_-)``.
    """
    x = np.asarray(x, dtype=float)
    K = x.size
    K0 = np.asarray(K0, dtype=complex)
    if K0.ndim == 1:
        K0 = K0[:, None]
    if K0.shape[0] != 2 * K:
        raise DomainError("K0 rows must equal 2 * len(x)")
    ops = _operators(x, hbar, b, beta_grid, a_grid)
    Q = _orth(K0, tol)
    P = _projector(Q)
    violation = 0.0
    for _, _, diags in ops:
        for d in diags:
            MQ = d[:, None] * Q
            violation = max(violation, float(np.linalg.norm(MQ - P @ MQ, 2)))
    enlarged = False
    if violation > tol * 1e2:
        if not enlarge:
            raise HypothesisError(f"K0 is not invariant (violation {violation:.3e})", violation)
        Q = invariant_hull(Q, [d for _, _, ds in ops for d in ds], tol)
        enlarged = True
    plus, minus = [], []
    for beta, grid_a, diags in ops:
        w = hbar * beta * b * grid_a
        M0inv = np.conj(_phases(x, hbar, b, 0.0, beta))
        Ap = sum(np.exp(-1j * wj) * d for wj, d in zip(w, diags)) / len(diags)
        Am = sum(np.exp(1j * wj) * d for wj, d in zip(w, diags)) / len(diags)
        plus.append((M0inv * Ap)[:, None] * Q)
        minus.append((M0inv * Am)[:, None] * Q)
    Vp = np.hstack(plus)
    Vm = np.hstack(minus)
    Dp = _orth(Vp[:K], tol)
    Dm = _orth(Vm[K:], tol)
    D = np.zeros((2 * K, Dp.shape[1] + Dm.shape[1]), dtype=complex)
    D[:K, : Dp.shape[1]] = Dp
    D[K:, Dp.shape[1]:] = Dm
    residual = float(np.linalg.norm(_projector(Q) - _projector(D), 2))
    return UncorrelateResult(Dp, Dm, residual, violation, enlarged, Q)


def random_invariant_subspace(rng, K=64, clusters=8, hbar=1.0, b=1.0, n_vectors=3, tol=1e-10):
    """Clustered x-grid and the invariant hull of a few random vectors.

    The x-values repeat inside clusters.  The phases then coincide there, so
    the hull stays a proper subspace.
    """
    centres = np.sort(rng.uniform(-1.0, 1.0, size=clusters))
    x = centres[rng.integers(0, clusters, size=K)]
    V = np.zeros((2 * K, n_vectors), dtype=complex)
    for j in range(n_vectors):
        mask = rng.uniform(size=2 * K) < 0.5
        V[mask, j] = rng.normal(size=mask.sum()) + 1j * rng.normal(size=mask.sum())
    ops = _operators(x, hbar, b, (1.0, 0.7), None)
    hull = invariant_hull(V, [d for _, _, ds in ops for d in ds], tol)
    return x, hull


# ---------------------------------------------------------------------------
# positive-definite and reflection-positive forms


def pd_form(F, f, points, weights, inverse=None, product=None):
    """``sum_{u, v} F(u v^{-1}) conj f(u) f(v) w_u w_v`` on a finite group sample.

    ``points`` is a list of group elements (default ``HeisenbergElement``);
    ``F`` is evaluated on ``u * v.inverse()``.  Hermitian symmetry
    ``F(g^{-1}) = conj F(g)`` is enforced by symmetrising the kernel matrix.
    """
    inverse = inverse or (lambda g: g.inverse())
    product = product or (lambda g, h: g * h)
    n = len(points)
    Kmat = np.empty((n, n), dtype=complex)
    for i, u in enumerate(points):
        for j, v in enumerate(points):
            Kmat[i, j] = F(product(u, inverse(v)))
    Kmat = 0.5 * (Kmat + Kmat.conj().T)
    fw = np.asarray(f, dtype=complex) * np.asarray(weights, dtype=float)
    val = np.vdot(fw, Kmat @ fw)
    return float(val.real)


@functools.lru_cache(maxsize=8)
def _bandlimit_nodes(cutoff, order):
    k, w = np.polynomial.legendre.leggauss(order)
    k = 0.5 * cutoff * (k + 1)
    w = 0.5 * cutoff * w * k / (1 + k * k)
    return k, w


def bandlimited_F(r, cutoff=20.0, order=400):
    """``2 pi int_0^cutoff J0(k r) k / (1 + k^2) dk``: a finite, exactly PD proxy of ``2 pi K0``."""
    from scipy.special import j0

    k, w = _bandlimit_nodes(float(cutoff), int(order))
    r = np.asarray(r, dtype=float)
    return 2 * math.pi * (j0(np.multiply.outer(r, k)) @ w)


def sublaplacian_F_exact(r):
    from scipy.special import k0

    return 2 * math.pi * k0(r)


def _F_radial_quad(r, tol=1e-12):
    """``2 pi int_0^inf e^{-r lambda} / lambda dxi``, ``lambda = sqrt(1 + xi^2)``.

    With ``xi = sinh t`` this is ``2 pi int_0^inf e^{-r cosh t} dt``.  The
    cutoff ``T`` doubles until the integral is stable.
    """
    T = 1.0
    prev = None
    while True:
        val, _ = integrate.quad(lambda t: math.exp(-r * math.cosh(t)), 0.0, T, epsabs=0.0, epsrel=tol, limit=200)
        if prev is not None and abs(val - prev) <= 1e-8 * max(abs(val), 1e-300):
            return 2 * math.pi * val
        prev = val
        T *= 2.0
        if T > 1e3:
            return 2 * math.pi * val


def F_hankel(r, zeros=4000):
    """Independent reduction ``2 pi int_0^inf J0(k r) k / (1 + k^2) dk``.

    The integral runs between consecutive zeros of ``J0(k r)``.  The
    alternating tail is accelerated by averaging successive partial sums.
    """
    from scipy.special import j0, jn_zeros

    z = np.concatenate([[0.0], jn_zeros(0, zeros)]) / r
    x, w = np.polynomial.legendre.leggauss(24)
    a, bnd = z[:-1, None], z[1:, None]
    k = 0.5 * (bnd - a) * (x[None, :] + 1) + a
    pieces = (0.5 * (bnd - a) * w[None, :] * j0(k * r) * k / (1 + k * k)).sum(axis=1)
    partial = np.cumsum(pieces)
    for _ in range(4):
        partial = 0.5 * (partial[1:] + partial[:-1])
    return 2 * math.pi * partial[-1]


_MAGIC = b"RLFTAB01"


def _default_cache_dir():
    return Path(os.environ.get("REFLECTLAB_CACHE", Path.home() / ".cache" / "reflectlab"))


@dataclass(frozen=True)
class FTable:
    """``F(r) = 2 pi K0(r)`` tabulated on a log grid with a cubic spline in ``log r``."""

    rmin: float
    rmax: float
    n: int
    tol: float
    values: np.ndarray

    @property
    def radii(self):
        return np.geomspace(self.rmin, self.rmax, self.n)

    def __post_init__(self):
        spline = CubicSpline(np.log(self.radii), np.log(self.values))
        object.__setattr__(self, "_spline", spline)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.rmin):
            raise DomainError("radius below the tabulated range")
        out = np.zeros_like(r)
        inside = r <= self.rmax
        out[inside] = np.exp(self._spline(np.log(r[inside])))
        return out

    @classmethod
    def build(cls, rmin=1e-4, rmax=60.0, n=600, tol=1e-12):
        radii = np.geomspace(rmin, rmax, n)
        return cls(rmin, rmax, n, tol, np.array([_F_radial_quad(r, tol) for r in radii]))

    def key(self):
        return cache_key(self.rmin, self.rmax, self.n, self.tol)

    def to_bytes(self):
        header = _MAGIC + struct.pack("<q3d", self.n, self.rmin, self.rmax, self.tol)
        return header + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        if data[:8] != _MAGIC:
            raise DomainError("not an F-table file")
        n, rmin, rmax, tol = struct.unpack("<q3d", data[8:40])
        values = np.frombuffer(data[40:], dtype="<f8")
        if values.size != n:
            raise DomainError("truncated F-table file")
        return cls(rmin, rmax, n, tol, values.copy())


def cache_key(rmin, rmax, n, tol):
    spec = f"{rmin!r}:{rmax!r}:{n}:{tol!r}".encode()
    return hashlib.sha256(spec).hexdigest()[:16]


def load_or_build_table(cache_dir=None, rmin=1e-4, rmax=60.0, n=600, tol=1e-12):
    cache_dir = Path(cache_dir) if cache_dir is not None else _default_cache_dir()
    path = cache_dir / f"ftable-{cache_key(rmin, rmax, n, tol)}.bin"
    if path.exists():
        try:
            return FTable.from_bytes(path.read_bytes())
        except DomainError:
            pass
    table = FTable.build(rmin, rmax, n, tol)
    try:
        cache_dir.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=cache_dir)
        with os.fdopen(fd, "wb") as fh:
            fh.write(table.to_bytes())
        os.replace(tmp, path)
    except OSError:
        pass
    return table


@dataclass(frozen=True)
class ProductTestFunction:
    """``f(x, y, c) = bump_x(x) bump_y(y) bump_c(c) (1 + eps p(x, y))``, ``p`` a random trig modulation."""

    x_support: tuple
    y_support: tuple
    c_support: tuple
    freqs: np.ndarray
    coeffs: np.ndarray
    amplitude: complex = 1.0

    def xy(self, x, y):
        from .oskernel import bump

        cx, wx = _mid(self.x_support)
        cy, wy = _mid(self.y_support)
        base = bump((x - cx) / wx) * bump((y - cy) / wy)
        mod = 1.0 + sum(c * np.exp(1j * (kx * x + ky * y)) for (kx, ky), c in zip(self.freqs, self.coeffs))
        return self.amplitude * base * mod

    def c_integral(self):
        from .oskernel import QuadratureRule, bump

        cc, wc = _mid(self.c_support)
        r = QuadratureRule.gauss_legendre(40, self.c_support)
        return r.integrate(bump((r.nodes - cc) / wc))

    def __call__(self, x, y, c):
        from .oskernel import bump

        cc, wc = _mid(self.c_support)
        return self.xy(x, y) * bump((np.asarray(c) - cc) / wc)

    @classmethod
    def random(cls, rng, terms=3):
        x0 = rng.uniform(-1.0, 1.0)
        y0 = rng.uniform(0.1, 0.6)
        c0 = rng.uniform(-1.0, 1.0)
        freqs = rng.uniform(-3.0, 3.0, size=(terms, 2))
        coeffs = 0.4 * (rng.normal(size=terms) + 1j * rng.normal(size=terms))
        return cls(
            (x0 - rng.uniform(0.3, 1.0), x0 + rng.uniform(0.3, 1.0)),
            (y0, y0 + rng.uniform(0.3, 1.0)),
            (c0 - 0.5, c0 + 0.5),
            freqs,
            coeffs,
        )

    @classmethod
    def zero(cls):
        return cls((-1.0, 1.0), (0.5, 1.0), (-1.0, 1.0), np.zeros((0, 2)), np.zeros(0), 0.0)


def _mid(support):
    lo, hi = support
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


def _xy_grid(f, order):
    from .oskernel import QuadratureRule

    rx = QuadratureRule.gauss_legendre(order, f.x_support)
    ry = QuadratureRule.gauss_legendre(order, f.y_support)
    X, Y = np.meshgrid(rx.nodes, ry.nodes, indexing="ij")
    Wt = np.outer(rx.weights, ry.weights)
    g = f.xy(X, Y) * Wt * f.c_integral()
    return X.ravel(), Y.ravel(), g.ravel()


def _check_support(f):
    if f.y_support[0] <= 0.0:
        raise SupportError("test function has mass at y <= 0")


def rp_form_direct(f, table=None, order=48):
    """``iint F(tau(u) v^{-1}) conj f(u) f(v) du dv`` by 4-D tensor quadrature.

    ``tau(z, c) = (conj z, -c)`` makes the kernel argument
    ``(x - x', -(y + y'))``.  With ``F`` radial this is ``F(sqrt((x-x')^2 + (y+y')^2))``.
    """
    _check_support(f)
    table = table or load_or_build_table()
    X, Y, g = _xy_grid(f, order)
    R = np.hypot(X[:, None] - X[None, :], Y[:, None] + Y[None, :])
    val = np.vdot(g, table(R) @ g)
    return float(val.real)


def rp_form_reduced(f, order=48, weight="derived", t_order=400):
    """Reduced form ``int |L(xi)|^2 w(xi) dxi``.

    Here ``L(xi) = iint e^{-i x xi} e^{-y lambda} (int f dc) dx dy`` and
    ``lambda = sqrt(1 + xi^2)``.  ``weight="derived"`` uses ``pi / lambda``,
    which is what the eta-integral of the direct form produces; it is
    computed as ``pi int |L(sinh t)|^2 dt``.  ``weight="as_displayed"``
    uses ``1 / (1 + xi^2)``.
    """
    _check_support(f)
    X, Y, g = _xy_grid(f, order)
    y0 = f.y_support[0]
    T = math.acosh(max(80.0 / (2 * y0), 1.0)) + 1.0
    t, w = np.polynomial.legendre.leggauss(t_order)
    t = T * t
    w = T * w
    xi = np.sinh(t)
    lam = np.cosh(t)
    L = np.exp(-1j * np.outer(xi, X) - np.outer(lam, Y)) @ g
    if weight == "derived":
        return float(math.pi * np.dot(w, np.abs(L) ** 2))
    if weight == "as_displayed":
        return float(np.dot(w * lam / (1 + xi * xi), np.abs(L) ** 2))
    raise DomainError(f"unknown weight {weight!r}")


def F_tau_symmetry(table, xs, ys):
    """``max |F(x, y) - F(x, -y)|`` for the radial kernel (exact by construction)."""
    X, Y = np.meshgrid(xs, ys)
    return float(np.max(np.abs(table(np.hypot(X, Y)) - table(np.hypot(X, -Y)))))


# ---------------------------------------------------------------------------
# Hardy probe


def hardy_positivity_probe(Aplus, Aminus, trial_count=200, n_freq=64, rng=None, minus_zero=False):
    """Minimum of ``Re <A_+ h_+, A_- h_->`` over random Hardy-space pairs.

    ``h_+`` uses frequencies ``0..n_freq-1`` and ``h_-`` uses
    ``-(n_freq-1)..0`` on a periodic grid of ``4 n_freq`` points.  Every
    trial is also evaluated with ``h_-`` rotated to the opposite phase, so a
    nonzero pairing always produces a negative value.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    N = 4 * n_freq
    theta = 2 * math.pi * np.arange(N) / N
    Ap = np.asarray(Aplus(theta), dtype=complex) * np.ones(N)
    Am = np.asarray(Aminus(theta), dtype=complex) * np.ones(N)
    if np.max(np.abs(np.abs(Ap) - 1)) > 1e-12 or np.max(np.abs(np.abs(Am) - 1)) > 1e-12:
        raise DomainError("symbols must be unimodular")
    k = np.arange(n_freq)
    Ep = np.exp(1j * np.outer(theta, k))
    Em = np.exp(-1j * np.outer(theta, k))
    best = 0.0
    for _ in range(trial_count):
        cp = rng.normal(size=n_freq) + 1j * rng.normal(size=n_freq)
        cm = np.zeros(n_freq) if minus_zero else rng.normal(size=n_freq) + 1j * rng.normal(size=n_freq)
        hp, hm = Ep @ cp, Em @ cm
        val = np.vdot(Ap * hp, Am * hm) / N
        if abs(val) > 0:
            best = min(best, val.real, -abs(val))
    return float(best)
