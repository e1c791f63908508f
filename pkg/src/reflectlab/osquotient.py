"""Osterwalder--Schrader quotient engine.

Everything here works on *form data*: a positive semidefinite matrix
``F0[i, j] = <phi_i, J phi_j>`` on a finite family ``phi`` spanning a slice
of K0, together with forms describing how an operator moves the family.
The quotient ``K0 / N`` is realised on the eigenvectors of ``F0`` above a
relative cut; whitening by ``F0^{-1/2}`` on that block turns the induced
Hilbert metric into the identity, and operator norms in the quotient become
ordinary spectral norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ConvergenceError, InvarianceError, PartitionError, RadicalError, DomainError
from .oskernel import FormMatrix, psd_report

RADICAL_TOL = 1e-9
INVARIANCE_TOL = 1e-3


def _as_array(F):
    return F.entries if isinstance(F, FormMatrix) else np.asarray(F)


def _split(F, tol):
    """Eigen-split of a PSD form into (radical basis, quotient basis, kept eigenvalues)."""
    m = _as_array(F)
    m = 0.5 * (m + m.conj().T)
    ev, V = np.linalg.eigh(m)
    scale = max(abs(ev[-1]), abs(ev[0])) if ev.size else 0.0
    if ev.size and ev[0] < -tol * scale:
        raise RadicalError(f"form is indefinite (eig_min = {ev[0]:.3e}, eig_max = {ev[-1]:.3e})")
    keep = ev > tol * scale if scale > 0 else np.zeros(ev.shape, dtype=bool)
    return V[:, ~keep], V[:, keep], ev[keep], ev


def radical(F, tol=RADICAL_TOL):
    """Orthonormal basis of the (numerical) radical of a PSD form."""
    return _split(F, tol)[0]


class QuotientModel(TransformerMixin, BaseEstimator):
    """GNS quotient of a PSD form.

    ``fit(F)`` computes the radical, an orthonormal complement and the
    induced metric on it; ``transform(C)`` maps coefficient rows to quotient
    coordinates.
    """

    def __init__(self, tol=RADICAL_TOL):
        self.tol = tol

    def fit(self, F, y=None):
        N, Q, kept, ev = _split(F, self.tol)
        self.ambient_dim_ = ev.size
        self.radical_basis_ = N
        self.quotient_basis_ = Q
        self.induced_metric_ = np.diag(kept)
        self.eigenvalues_ = ev
        dropped = ev[: N.shape[1]]
        lo_kept = kept[0] if kept.size else 0.0
        hi_drop = float(abs(dropped).max()) if dropped.size else 0.0
        # an exactly zero radical block gives an infinite gap
        self.spectral_gap_ = lo_kept / hi_drop if hi_drop > 0 and lo_kept < hi_drop * 1e300 else math.inf
        self.jform_ = F if isinstance(F, FormMatrix) else FormMatrix(F)
        return self

    @property
    def quotient_dim(self):
        check_is_fitted(self, "quotient_basis_")
        return self.quotient_basis_.shape[1]

    @property
    def whitener(self):
        """Columns ``w_k = v_k / sqrt(e_k)``: an induced-orthonormal basis of K."""
        check_is_fitted(self, "quotient_basis_")
        return self.quotient_basis_ / np.sqrt(np.diag(self.induced_metric_))[None, :]

    def transform(self, X):
        check_is_fitted(self, "quotient_basis_")
        return np.asarray(X) @ self.quotient_basis_.conj()

    def compress(self, G):
        """Whitened matrix ``W^* G W`` of a form ``G`` on the ambient family."""
        W = self.whitener
        return W.conj().T @ _as_array(G) @ W


# ---------------------------------------------------------------------------
# contraction (the basic lemma)


class ContractionResult(NamedTuple):
    gamma_norm: float
    verdict: bool


def contraction_check(F0, Fg, tol=1e-6, increment=False, radical_tol=RADICAL_TOL):
    """Squared quotient norm of an operator from ``(F0, Fg)``.

    ``gamma_norm`` is the largest generalized eigenvalue of ``Fg`` against
    ``F0`` on the quotient, i.e. ``sup <gv, Jgv> / <v, Jv>``.  With
    ``increment=True`` the second argument is ``Fg - F0`` (computed without
    cancellation by the caller) and ``1 + max eig`` is returned.
    """
    model = QuotientModel(radical_tol).fit(F0)
    if model.quotient_dim == 0:
        return ContractionResult(0.0, True)
    M = model.compress(Fg)
    mu = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    g = float(1.0 + mu[-1]) if increment else float(mu[-1])
    return ContractionResult(g, g <= 1.0 + tol)


def _invariance_violation(model, G):
    """Relative size of ``<gamma n, J phi_j>`` for radical vectors ``n``."""
    N = model.radical_basis_
    if N.shape[1] == 0:
        return 0.0
    G = _as_array(G)
    scale = max(np.linalg.norm(G, 2), np.finfo(float).tiny)
    return float(np.linalg.norm(N.conj().T @ G, 2) / scale)


def induced_operator(F0, G, radical_tol=RADICAL_TOL):
    """Least-squares matrix of the induced operator in whitened quotient coordinates.

    ``G[i, j] = <gamma phi_i, J phi_j>``; the returned ``T`` satisfies
    ``<w_k, gamma~ w_l>_K = T[k, l]`` for the induced-orthonormal basis ``w``.
    """
    model = QuotientModel(radical_tol).fit(F0)
    return model.compress(_as_array(G).T)


def semigroup_law_check(F0, Fg1, Fg2, Fg1g2, cross, radical_tol=RADICAL_TOL, invariance_tol=INVARIANCE_TOL):
    """Residual of ``(g1 g2)~ = g1~ g2~`` in the induced operator norm.

    The forms are one-sided, ``Fg[i, j] = <g phi_i, J phi_j>``, and
    ``cross[i, j] = <g2 phi_i, J g1 phi_j>``.  For ``g1`` selfadjoint in the
    J-form, ``cross`` represents ``<phi_j, g1~ g2~ phi_i>_K`` and is compared
    with the compression of ``(g1 g2)~``.
    """
    model = QuotientModel(radical_tol).fit(F0)
    for name, G in (("g1", Fg1), ("g2", Fg2), ("g1g2", Fg1g2)):
        v = _invariance_violation(model, G)
        if v > invariance_tol:
            raise InvarianceError(f"{name} does not preserve the radical", v)
    if model.quotient_dim == 0:
        return 0.0
    D = model.compress(_as_array(Fg1g2) - _as_array(cross))
    return float(np.linalg.norm(D, 2))


# ---------------------------------------------------------------------------
# generator spectra


@dataclass(frozen=True)
class GeneratorSpectrum:
    """Eigenvalues of a contraction-form family together with their eigenbasis.

    ``eigenvalues`` are the Richardson estimates ``2 l(delta) - l(2 delta)``.
    ``vectors`` holds the eigenvectors in induced-orthonormal quotient
    coordinates, where the induced metric is the identity.  ``basis`` holds the
    same vectors as coefficient columns on the ambient family, and ``metric``
    is ``F0``.
    """

    eigenvalues: np.ndarray
    raw: np.ndarray
    raw_2delta: np.ndarray
    gap: float
    delta: float
    vectors: np.ndarray
    basis: np.ndarray
    metric: np.ndarray = field(repr=False)

    def __iter__(self):
        return iter(self.eigenvalues.tolist())

    def __len__(self):
        return self.eigenvalues.size

    def __getitem__(self, k):
        return self.eigenvalues[k]

    @property
    def max(self):
        return float(self.eigenvalues.max()) if self.eigenvalues.size else 0.0

    @property
    def induced_metric(self):
        """The induced metric in the coordinates used by ``dual_unitary``."""
        return np.eye(self.eigenvalues.size)


def _log_eigs(model, D, delta, increment):
    M = model.compress(D)
    vals, vecs = np.linalg.eigh(0.5 * (M + M.conj().T))
    if not increment:
        vals = vals - 1.0
    if np.any(vals <= -1.0):
        raise DomainError("form family is not positive at the requested step")
    return np.log1p(vals) / delta, vecs


def generator_spectrum(family, delta=1e-2, tol=1e-5, increment=False, radical_tol=RADICAL_TOL):
    """Exponents ``l_k`` of ``F(t) ~ e^{l t} F(0)`` on the quotient.

    ``family(t)`` returns ``F(t)``; with ``increment=True`` it returns
    ``F(t) - F(0)`` for ``t > 0`` (``family(0)`` still returns ``F(0)``).
    The eigenproblem is solved at ``delta`` and ``2 delta``; a gap above
    ``10 * tol`` raises ``ConvergenceError``.
    """
    F0 = _as_array(family(0.0))
    model = QuotientModel(radical_tol).fit(F0)
    if model.quotient_dim == 0:
        empty = np.zeros(0)
        return GeneratorSpectrum(empty, empty, empty, 0.0, delta, np.zeros((0, 0)), np.zeros((F0.shape[0], 0)), F0)
    l1, vecs = _log_eigs(model, family(delta), delta, increment)
    l2, _ = _log_eigs(model, family(2 * delta), 2 * delta, increment)
    gap = float(np.max(np.abs(l1 - l2)))
    if gap > 10 * tol:
        raise ConvergenceError(f"Richardson gap {gap:.3e} exceeds {10 * tol:.1e}")
    est = 2 * l1 - l2
    order = np.argsort(est)
    vecs = vecs[:, order]
    return GeneratorSpectrum(est[order], l1[order], l2[order], gap, delta, vecs, model.whitener @ vecs, F0)


def dual_unitary(spectrum, t):
    """``U(t) = exp(i t A)`` on the quotient, ``A`` the generator.

    The matrix acts in induced-orthonormal quotient coordinates, where the
    induced metric is ``spectrum.induced_metric`` (the identity).
    """
    V = spectrum.vectors
    return (V * np.exp(1j * t * spectrum.eigenvalues)[None, :]) @ V.conj().T


def metric_defect(U, M):
    """``max |U^* M U - M|`` relative to ``max |M|``."""
    return float(np.max(np.abs(U.conj().T @ M @ U - M)) / max(np.max(np.abs(M)), np.finfo(float).tiny))


# ---------------------------------------------------------------------------
# Phillips construction


@dataclass(frozen=True)
class FiniteReflectionSpace:
    weights: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        th = np.asarray(self.theta, dtype=int)
        n = w.size
        if th.shape != (n,) or sorted(th.tolist()) != list(range(n)):
            raise DomainError("theta must be a permutation of the points")
        if np.any(th[th] != np.arange(n)):
            raise DomainError("theta is not an involution")
        if np.any(w <= 0):
            raise DomainError("weights must be positive")
        if np.any(w[th] != w):
            raise DomainError("weights are not theta-invariant")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "theta", th)

    @property
    def point_count(self):
        return self.weights.size

    def J(self):
        """Matrix of ``f -> f o theta``."""
        n = self.point_count
        P = np.zeros((n, n))
        P[np.arange(n), self.theta] = 1.0
        return P

    def jform(self, vectors):
        """``<f, J g> = sum m(x) f(x) g(theta x)`` on the columns of ``vectors``."""
        V = np.asarray(vectors)
        return V.conj().T @ (self.weights[:, None] * (self.J() @ V))

    @classmethod
    def random(cls, rng, max_points=32, fixed_fraction=None):
        n = int(rng.integers(1, max_points + 1))
        if fixed_fraction == 0.0:  # a fixed-point-free involution needs an even count
            n = max(2, n - n % 2)
        perm = rng.permutation(n)
        theta = np.arange(n)
        frac = rng.uniform() if fixed_fraction is None else fixed_fraction
        n_pairs = min(int(round((1.0 - frac) * n / 2)), n // 2)
        for k in range(n_pairs):
            i, j = perm[2 * k], perm[2 * k + 1]
            theta[i], theta[j] = j, i
        w = rng.uniform(0.1, 2.0, size=n)
        w = np.where(theta < np.arange(n), w[theta], w)
        return cls(w, theta)


@dataclass(frozen=True)
class PhillipsSubspace:
    M0: tuple
    A: tuple
    K0: np.ndarray
    jform: FormMatrix
    quotient_dim: int


def phillips_subspace(space, signs=None):
    """Maximal positive theta-compatible subspace ``L^2(M0 u A)``."""
    th = space.theta
    idx = np.arange(space.point_count)
    M0 = tuple(int(i) for i in idx[th == idx])
    pairs = [(int(i), int(th[i])) for i in idx if th[i] > i]
    if signs is None:
        A = tuple(p for p, _ in pairs)
    else:
        chosen = set(int(x) for x in signs)
        A = []
        for p, q in pairs:
            if (p in chosen) == (q in chosen):
                raise PartitionError(f"exactly one of {p}, {q} must be selected")
            A.append(p if p in chosen else q)
        if chosen - set(A):
            raise PartitionError("selection contains fixed points or unknown points")
        A = tuple(sorted(A))
    cols = list(M0) + list(A)
    K0 = np.zeros((space.point_count, len(cols)))
    K0[cols, np.arange(len(cols))] = 1.0
    F = FormMatrix(space.jform(K0))
    qdim = QuotientModel().fit(F).quotient_dim if len(cols) else 0
    return PhillipsSubspace(M0, A, K0, F, qdim)


def subspace_violation(K0, T):
    """``||(I - P) T K0|| / ||T K0||`` with ``P`` the orthogonal projector onto ``span K0``."""
    Q, _ = np.linalg.qr(np.asarray(K0))
    TK = np.asarray(T) @ K0
    R = TK - Q @ (Q.conj().T @ TK)
    return float(np.linalg.norm(R, 2) / max(np.linalg.norm(TK, 2), np.finfo(float).tiny))


def orbit_multiplier(space, rng):
    """Random diagonal operator constant on theta-orbits."""
    vals = rng.normal(size=space.point_count)
    vals = np.where(space.theta < np.arange(space.point_count), vals[space.theta], vals)
    return np.diag(vals)


# ---------------------------------------------------------------------------
# axiom report


@dataclass(frozen=True)
class PRReport:
    r1_defect: float
    r2_defect: float
    pr3_eig_min: float
    pr3_eig_max: float
    invariance_defect: float
    tol: float

    @property
    def R1(self):
        return self.r1_defect <= self.tol

    @property
    def R2(self):
        return self.r2_defect <= self.tol

    @property
    def PR3(self):
        return self.pr3_eig_min >= -self.tol * max(1.0, abs(self.pr3_eig_max))

    @property
    def invariance(self):
        return self.invariance_defect <= self.tol

    @property
    def all_pass(self):
        return self.R1 and self.R2 and self.PR3 and self.invariance

    def as_dict(self):
        return {
            "R1": self.R1, "R2": self.R2, "PR3": self.PR3, "invariance": self.invariance,
            "r1_defect": self.r1_defect, "r2_defect": self.r2_defect,
            "pr3_eig_min": self.pr3_eig_min, "invariance_defect": self.invariance_defect,
        }


def pr_axiom_check(J, pi, tau, K0, C_sample, exp=None, g_sample=(), tol=1e-8, metric=None):
    """Check R1, R2, PR3 and K0-invariance under ``exp(C_sample)``.

    ``pi`` maps group elements to matrices, ``tau`` is the group involution
    and ``exp`` the exponential on the Lie elements of ``C_sample``.  The
    Hilbert inner product is ``metric`` (identity by default).
    """
    J = np.asarray(J)
    n = J.shape[0]
    G = np.eye(n) if metric is None else np.asarray(metric)
    r1 = float(np.max(np.abs(J @ J - np.eye(n))))
    semigroup = [exp(Y) for Y in C_sample] if exp is not None else list(C_sample)
    r2 = 0.0
    for g in list(g_sample) + semigroup:
        r2 = max(r2, float(np.max(np.abs(J @ pi(g) - pi(tau(g)) @ J))))
    K0 = np.asarray(K0)
    F = K0.conj().T @ G @ J @ K0
    F = 0.5 * (F + F.conj().T)
    ev = np.linalg.eigvalsh(F) if F.size else np.zeros(1)
    inv = 0.0
    for g in semigroup:
        inv = max(inv, subspace_violation(K0, pi(g)))
    return PRReport(r1, r2, float(ev[0]), float(ev[-1]), inv, tol)
