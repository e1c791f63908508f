"""(ax+b)-group models.

Covered here:

* the representations ``(pi_+- (s, b) f)(x) = e^{+- i e^x b} f(x + s)``;
* the projection field ``Q(xi)`` classifying translation-invariant subspaces
  of ``H_+ + H_-``;
* J-forms on graph subspaces ``f_1^ = lambda f_0^``;
* escape times of the classical flow for the operator
  ``L = (d/dx)^2 + e^{2x}``, and a numerical deficiency probe for ``L``;
* an invariance harness that exhibits the no-go dichotomy: graph subspaces
  with a positive J-form are not invariant, and invariant ones carry a
  zero form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, StiffnessError

J2 = np.array([[0.0, 1.0], [1.0, 0.0]])

# Invariant cones listed alongside the (ax+b) discussion, kept verbatim as data.
INVARIANT_CONES = {
    "C1+": "{(0, 0, t) | t >= 0}",
    "C1-": "{(0, 0, t) | t <= 0}",
    "C2+": "{(0, x, y) | x in R, y >= 0}",
    "C2-": "{(0, x, y) | x in R, y <= 0}",
}


# ---------------------------------------------------------------------------
# group and representations


@dataclass(frozen=True)
class AxbElement:
    """``(s, b)`` with matrix ``[[e^s, b], [0, 1]]``."""

    s: float
    b: float

    def __mul__(self, other):
        return AxbElement(self.s + other.s, self.b + math.exp(self.s) * other.b)

    def inverse(self):
        return AxbElement(-self.s, -math.exp(-self.s) * self.b)

    @property
    def matrix(self):
        return np.array([[math.exp(self.s), self.b], [0.0, 1.0]])

    @classmethod
    def identity(cls):
        return cls(0.0, 0.0)


def tau(g):
    return AxbElement(g.s, -g.b)


def pi_pm(g, sign, f, x):
    if sign not in (1, -1, "+", "-"):
        raise DomainError("sign must be +1 or -1")
    sgn = 1 if sign in (1, "+") else -1
    x = np.asarray(x, dtype=float)
    return np.exp(sgn * 1j * np.exp(x) * g.b) * f(x + g.s)


def pi_pm_op(g, sign):
    """``pi_+-(g)`` as a map on callables."""
    return lambda f: (lambda x: pi_pm(g, sign, f, x))


# ---------------------------------------------------------------------------
# Q-field


def q_from_mu(mu):
    mu = complex(mu)
    if mu.real < 0:
        raise DomainError("Re mu must be >= 0")
    n = 1.0 + abs(mu) ** 2
    return np.array([[1.0, mu], [mu.conjugate(), abs(mu) ** 2]], dtype=complex) / n


def q_degenerate(case):
    Q = {
        "zero": np.zeros((2, 2)),
        "plus": np.diag([1.0, 0.0]),
        "minus": np.diag([0.0, 1.0]),
    }.get(case)
    if Q is None:
        raise DomainError(f"unknown case {case!r}")
    Q = Q.astype(complex)
    assert np.all(Q @ J2 @ Q == 0)
    return Q


def qfield_residuals(Q):
    """Residuals of ``Q^2 = Q``, ``Q = Q^*`` and ``|Q12|^2 = Q11 Q22``."""
    Q = np.asarray(Q)
    return {
        "idempotent": float(np.max(np.abs(Q @ Q - Q))),
        "hermitian": float(np.max(np.abs(Q - Q.conj().T))),
        "modulus": float(abs(abs(Q[0, 1]) ** 2 - (Q[0, 0] * Q[1, 1]).real)),
    }


def qjq_trace(Q):
    return float(np.trace(Q @ J2 @ Q).real)


@dataclass(frozen=True)
class ProjectionField:
    xi_grid: np.ndarray
    mu: np.ndarray
    Q: np.ndarray
    cases: tuple = ()

    @classmethod
    def from_mu(cls, mu_fn, xi_grid=None):
        xi = default_xi_grid() if xi_grid is None else np.asarray(xi_grid, dtype=float)
        mu = np.array([complex(mu_fn(x)) for x in xi])
        return cls(xi, mu, np.stack([q_from_mu(m) for m in mu]), ("mu",) * xi.size)

    def residuals(self):
        worst = {"idempotent": 0.0, "hermitian": 0.0, "modulus": 0.0}
        for Q in self.Q:
            for k, v in qfield_residuals(Q).items():
                worst[k] = max(worst[k], v)
        return worst

    def form_density(self):
        """``Tr(Q J Q) = 2 Re mu / (1 + |mu|^2)`` per node."""
        return np.array([qjq_trace(Q) for Q in self.Q])


def default_xi_grid(n=256, lim=20.0):
    return np.linspace(-lim, lim, n)


def graph_jform(lambda_samples, f0_hat, weights):
    lam = np.asarray(lambda_samples, dtype=complex)
    f = np.asarray(f0_hat, dtype=complex)
    return float(2.0 * np.sum(lam.real * np.abs(f) ** 2 * np.asarray(weights, dtype=float)))


# ---------------------------------------------------------------------------
# escape times


@dataclass(frozen=True)
class EscapeResult:
    status: str  # "FINITE" or "DIVERGES"
    value: float | None
    estimates: tuple
    cutoffs: tuple
    slope: float | None = None


def escape_time_closed_form(E, x0):
    """``int_{x0}^inf dx / sqrt(E + e^{2x})`` for ``E >= 0``."""
    if E < 0:
        raise DomainError("closed form implemented for E >= 0")
    if E == 0:
        return math.exp(-x0)
    rE = math.sqrt(E)
    return math.atanh(rE / math.sqrt(E + math.exp(2 * x0))) / rE


def escape_time(E, x0=0.0, direction=1, cutoffs=None, tol=1e-8):
    """Travel time ``int dx / sqrt(E + e^{2x})`` from ``x0`` to ``+-inf``.

    The integral is evaluated on ``[x0, x0 +- L]`` for growing lengths ``L``.
    The result is ``FINITE`` once successive estimates agree to ``tol``;
    otherwise it is ``DIVERGES``, and the last increment per unit length is
    reported as the growth slope.
    """
    direction = 1 if direction in (1, "+", "+inf", math.inf) else -1
    cutoffs = tuple(cutoffs) if cutoffs is not None else (5.0, 10.0, 20.0, 40.0, 80.0, 160.0)
    start = float(x0)
    lo_sing = False
    if E < 0:
        xt = 0.5 * math.log(-E)
        if direction < 0:
            raise DomainError("E < 0: the path toward -inf crosses the turning point")
        if start < xt:
            start, lo_sing = xt, True
    elif E == 0 and direction < 0:
        pass

    def integrand(x):
        v = E + math.exp(2 * x)
        if v <= 0:
            raise DomainError("E + e^{2x} <= 0 on the path")
        return 1.0 / math.sqrt(v)

    estimates = []
    ends = []
    for L in cutoffs:
        end = start + direction * L
        a, b = (start, end) if direction > 0 else (end, start)
        if lo_sing:
            # sqrt singularity at the turning point: substitute x = xt + w^2
            xt = start
            val, _ = integrate.quad(
                lambda w: 2 * w / math.sqrt(E + math.exp(2 * (xt + w * w))) if w > 0 else 2 / math.sqrt(2 * math.exp(2 * xt)),
                0.0, math.sqrt(b - xt), limit=400, epsabs=0.0, epsrel=1e-13,
            )
        else:
            val, _ = integrate.quad(integrand, a, b, limit=400, epsabs=0.0, epsrel=1e-13)
        estimates.append(val)
        ends.append(end)
        if len(estimates) >= 2 and abs(estimates[-1] - estimates[-2]) < tol:
            return EscapeResult("FINITE", estimates[-1], tuple(estimates), tuple(ends))
    slope = (estimates[-1] - estimates[-2]) / (cutoffs[-1] - cutoffs[-2])
    return EscapeResult("DIVERGES", None, tuple(estimates), tuple(ends), slope)


# ---------------------------------------------------------------------------
# deficiency probe


@dataclass(frozen=True)
class DeficiencyResult:
    count_L2: int
    per_end: dict
    dims: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def contributions(self):
        """Per-end excess ``d - 1`` (1 for limit circle, 0 for limit point)."""
        return {k: v - 1 for k, v in self.dims.items()}


def _pack(y):
    return np.concatenate([y.real, y.imag])


def _unpack(v):
    n = v.size // 2
    return v[:n] + 1j * v[n:]


def _solve(rhs, t0, t1, y0, t_eval, rtol):
    sol = integrate.solve_ivp(
        lambda t, v: _pack(rhs(t, _unpack(v))), (t0, t1), _pack(np.asarray(y0, dtype=complex)),
        method="DOP853", rtol=rtol, atol=rtol * 1e-3, t_eval=t_eval,
    )
    if not sol.success:
        raise StiffnessError(f"integration failed: {sol.message}")
    return np.array([_unpack(sol.y[:, k]) for k in range(sol.y.shape[1])])


def _gram_x(z, potential, x_end, x_ends, rtol):
    """Gram matrices ``int_0^{x} f_i conj f_j`` of the fundamental system at each end point."""
    V = (lambda x: math.exp(2 * x)) if potential else (lambda x: 0.0)

    def rhs(x, y):
        f1, d1, f2, d2, g11, g22, g12 = y
        q = z - V(x)
        return np.array([d1, q * f1, d2, q * f2, abs(f1) ** 2, abs(f2) ** 2, f1 * np.conj(f2)])

    ys = _solve(rhs, 0.0, x_end, [1, 0, 0, 1, 0, 0, 0], x_ends, rtol)
    sign = 1.0 if x_end > 0 else -1.0  # integrating toward -inf accumulates -G
    return [sign * np.array([[y[4].real, y[6]], [np.conj(y[6]), y[5].real]]) for y in ys]


def _gram_tau(z, X_values, T, rtol):
    """Certified Gram upper bounds on ``[0, X]`` for the true potential.

    Uses ``u = sqrt(tau) f`` with ``tau = e^x``, which satisfies
    ``u'' + (1 - (z - 1/4)/tau^2) u = 0`` and ``int |f|^2 dx = int |u|^2 / tau^2 dtau``.
    Past ``T`` the energy ``|u|^2 + |u'|^2`` grows at most by
    ``exp(|z - 1/4| / T)``, so the tail is bounded by
    ``E_max (1/T - e^{-X})``.
    """
    c = z - 0.25

    def rhs(t, y):
        u1, d1, u2, d2, g11, g22, g12 = y
        q = -(1.0 - c / (t * t))
        return np.array([d1, q * u1, d2, q * u2, abs(u1) ** 2 / t ** 2, abs(u2) ** 2 / t ** 2, u1 * np.conj(u2) / t ** 2])

    # at tau = 1: u = f, u' = f / 2 + f'
    y0 = [1.0, 0.5, 0.0, 1.0, 0, 0, 0]
    y = _solve(rhs, 1.0, T, y0, [T], rtol)[-1]
    G = np.array([[y[4].real, y[6]], [np.conj(y[6]), y[5].real]])
    E_max = max(abs(y[0]) ** 2 + abs(y[1]) ** 2, abs(y[2]) ** 2 + abs(y[3]) ** 2) * math.exp(abs(c) / T)
    # both solutions' energies bound any combination with unit coefficients up to a factor 2
    out = []
    for X in X_values:
        tail = 2.0 * E_max * max(1.0 / T - math.exp(-X), 0.0) if math.exp(X) > T else 0.0
        out.append(G + tail * np.eye(2))
    return out, {"T": T, "E_max": E_max}


def _inward_norm(z, potential, X_end, side, rtol):
    """Norm on ``[0, X_end]`` (or ``[-X_end, 0]``) of the solution decaying toward the end.

    The solution is started at the far end in the decaying frozen-coefficient
    state ``(1, -+ omega)``, ``omega = sqrt(z - V)`` with ``Re omega > 0``.
    It is then integrated inward, where it grows, which is the stable
    direction.  The result is normalised by the state size at 0.
    """
    V = (lambda x: math.exp(2 * x)) if potential else (lambda x: 0.0)
    x_far = side * X_end
    omega = np.sqrt(complex(z - V(x_far)))
    if omega.real < 0:
        omega = -omega

    def rhs(x, y):
        f, d, g = y
        return np.array([d, (z - V(x)) * f, abs(f) ** 2])

    y = _solve(rhs, x_far, 0.0, [1.0, -side * omega, 0.0], [0.0], rtol)[-1]
    scale = abs(y[0]) ** 2 + abs(y[1]) ** 2
    return abs(y[2].real) / scale


def _end_dim_x(z, potential, side, Xs, rtol, growth=1.5):
    """L^2 dimension at one end from outward Gram growth plus the inward decaying solution."""
    G = _gram_x(z, potential, side * Xs[-1], [side * X for X in Xs], rtol)
    top = [float(np.linalg.eigvalsh(g)[-1]) for g in G]
    decay = [_inward_norm(z, potential, X, side, rtol) for X in Xs]
    if top[1] <= growth * top[0]:
        d = 2
    elif decay[1] <= growth * decay[0]:
        d = 1
    else:
        d = 0
    return d, {"gram_top": top, "decaying_norm": decay}


def _l2_dim(G1, G2, growth=1.5):
    """Number of Gram eigenvalues that stay bounded from ``G1`` to ``G2``."""
    e1 = np.linalg.eigvalsh(G1)
    e2 = np.linalg.eigvalsh(G2)
    return int(np.sum(e2 <= growth * np.maximum(e1, np.finfo(float).tiny)))


def deficiency_probe(z=1j, X=20.0, potential=True, rtol=1e-9, T=400.0, extend=5.0):
    """Classify the ends of ``f'' + V f = z f`` with ``V = e^{2x}`` (or ``V = 0``).

    ``dims[end]`` counts the independent solutions that are square-integrable
    near that end.  ``count_L2 = max(0, d_+ + d_- - 2)`` is the dimension of
    the solutions lying in ``L^2(R)``.  Each end is classified by comparing
    the cut-offs ``X`` and ``X + extend``.
    """
    z = complex(z)
    if z.imag == 0:
        raise DomainError("z must be non-real")
    if X < 20:
        raise DomainError("X must be at least 20")
    Xs = [X, X + extend]
    d_minus, diag_minus = _end_dim_x(z, potential, -1, Xs, rtol)
    if potential:
        Gp, diag_plus = _gram_tau(z, Xs, T, rtol)
        d_plus = _l2_dim(*Gp)
        diag_plus["gram_eigs"] = [np.linalg.eigvalsh(G).tolist() for G in Gp]
    else:
        d_plus, diag_plus = _end_dim_x(z, potential, 1, Xs, rtol)
    kind = {2: "limit_circle", 1: "limit_point", 0: "limit_point"}
    return DeficiencyResult(
        count_L2=max(0, d_plus + d_minus - 2),
        per_end={"+inf": kind[d_plus], "-inf": kind[d_minus]},
        dims={"+inf": d_plus, "-inf": d_minus},
        diagnostics={"+inf": diag_plus, "-inf": diag_minus},
    )


# ---------------------------------------------------------------------------
# no-go harness


@dataclass(frozen=True)
class XGrid:
    lo: float = -4.0
    hi: float = 2.0
    N: int = 128

    @property
    def points(self):
        return np.linspace(self.lo, self.hi, self.N, endpoint=False)

    @property
    def step(self):
        return (self.hi - self.lo) / self.N

    @property
    def frequencies(self):
        return 2 * math.pi * np.fft.fftfreq(self.N, d=self.step)


def _lambda_samples(lam, grid):
    xi = grid.frequencies
    vals = lam(xi) if callable(lam) else lam
    return np.asarray(vals, dtype=complex) * np.ones(grid.N)


def graph_basis(lam, grid):
    """Orthonormal columns ``(F^{-1} e_k, lambda_k F^{-1} e_k) / sqrt(1 + |lambda_k|^2)``."""
    lamk = _lambda_samples(lam, grid)
    Finv = np.fft.ifft(np.eye(grid.N), axis=0, norm="ortho")
    nrm = np.sqrt(1.0 + np.abs(lamk) ** 2)
    return np.vstack([Finv / nrm[None, :], Finv * (lamk / nrm)[None, :]])


def form_eigenvalues(lam, grid):
    """J-form of the graph in its orthonormal basis: ``2 Re lambda / (1 + |lambda|^2)``."""
    lamk = _lambda_samples(lam, grid)
    return 2.0 * lamk.real / (1.0 + np.abs(lamk) ** 2)


def invariance_probe(lam, b_samples=(0.5, 1.0, 2.0), grid=None):
    """Largest ``||(I - P_G) gamma_b Q||`` over the sampled ``b``."""
    grid = grid or XGrid()
    Q = graph_basis(lam, grid)
    x = grid.points
    worst = 0.0
    for b in b_samples:
        D = np.exp(1j * b * np.exp(x))
        gamma = np.concatenate([D, D.conj()])
        GQ = gamma[:, None] * Q
        R = GQ - Q @ (Q.conj().T @ GQ)
        worst = max(worst, float(np.linalg.norm(R, 2)))
    return worst


NOGO_FAMILY = {
    "zero": lambda xi: np.zeros_like(xi),
    "one": lambda xi: np.ones_like(xi),
    "half_plus_half_i": lambda xi: (0.5 + 0.5j) * np.ones_like(xi),
    "i_tanh": lambda xi: 1j * np.tanh(xi),
    "cauchy": lambda xi: 1.0 / (1.0 + 1j * xi),
}


@dataclass(frozen=True)
class NogoRow:
    name: str
    violation: float
    form_margin: float
    form_norm: float

    @property
    def form_zero(self):
        return self.form_norm <= 1e-12

    @property
    def consistent(self):
        positive = self.form_margin > 0.1 * self.form_norm and self.form_norm > 0
        ok_pos = (not positive) or self.violation > 0.05
        ok_inv = (self.violation >= 1e-8) or self.form_zero
        return ok_pos and ok_inv


def nogo_dichotomy(family=None, b_samples=(0.5, 1.0, 2.0), grid=None):
    family = NOGO_FAMILY if family is None else family
    grid = grid or XGrid()
    rows = []
    for name, lam in family.items():
        ev = form_eigenvalues(lam, grid)
        rows.append(NogoRow(
            name,
            invariance_probe(lam, b_samples, grid),
            float(max(ev.max(), 0.0)),
            float(np.max(np.abs(ev))),
        ))
    return rows
