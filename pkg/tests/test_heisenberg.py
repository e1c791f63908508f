import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import k0

from reflectlab import heisenberg as hb
from reflectlab.errors import DomainError, GridError, HypothesisError, SupportError

H = hb.HeisenbergElement
small = st.floats(-3, 3, allow_nan=False)
# dyadic rationals keep the product law exact in floating point
dyadic = st.integers(-64, 64).map(lambda k: k / 8)


@pytest.fixture(scope="module")
def table(tmp_path_factory):
    return hb.load_or_build_table(tmp_path_factory.mktemp("ftable"))


# -- group ----------------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(*[dyadic] * 9)
def test_product_law_associative_and_tau_automorphism(a1, b1, c1, a2, b2, c2, a3, b3, c3):
    g1, g2, g3 = H(a1, b1, c1), H(a2, b2, c2), H(a3, b3, c3)
    lhs, rhs = (g1 * g2) * g3, g1 * (g2 * g3)
    assert lhs.allclose(rhs, 0.0)
    assert hb.tau(g1 * g2).allclose(hb.tau(g1) * hb.tau(g2), 0.0)
    assert hb.tau(hb.tau(g1)).allclose(g1, 0.0)
    assert (g1 * g1.inverse()).allclose(H.identity(), 0.0)


def test_element_validation():
    with pytest.raises(DomainError):
        H([1.0, 2.0], [1.0], 0.0)


def test_two_component_vector_swap_is_isometry():
    rng = np.random.default_rng(0)
    v = hb.TwoComponentVector(rng.normal(size=5) + 1j * rng.normal(size=5), rng.normal(size=5))
    assert v.swap().norm() == pytest.approx(v.norm(), rel=1e-15)
    assert np.array_equal(v.swap().swap().stacked(), v.stacked())
    assert np.array_equal(hb.TwoComponentVector.from_stacked(v.stacked()).plus, v.plus)


# -- Schroedinger representation ------------------------------------------------------------

GRID = hb.PeriodicGrid(-4.0, 8.0 / 128, 128)
HBAR = 1.3


def sample(rng):
    return rng.normal(size=GRID.N) + 1j * rng.normal(size=GRID.N)


def test_pi_hbar_examples():
    f = sample(np.random.default_rng(1))
    assert np.allclose(hb.pi_hbar(H(0, 0, 0.7), HBAR, f, GRID), np.exp(1j * HBAR * 0.7) * f)
    assert np.array_equal(hb.pi_hbar(H.identity(), HBAR, f, GRID), f)


def test_pi_hbar_closed_form():
    f = lambda x: np.exp(-np.asarray(x) ** 2)
    g = H(0.3, 0.5, -0.2)
    x = np.linspace(-2, 2, 9)
    expect = np.exp(1j * HBAR * (-0.2 + 0.5 * x)) * np.exp(-((x + 0.3) ** 2))
    assert np.allclose(hb.pi_hbar(g, HBAR, f)(x), expect, rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(-5, 5), st.integers(-5, 5), small, small,
       st.integers(0, 2**31 - 1))
def test_pi_hbar_grid_representation(k1, k2, m1, m2, c1, c2, seed):
    f = sample(np.random.default_rng(seed))
    g1 = H(k1 * GRID.h, hb.compatible_b(GRID, HBAR, m1), c1)
    g2 = H(k2 * GRID.h, hb.compatible_b(GRID, HBAR, m2), c2)
    lhs = hb.pi_hbar(g1, HBAR, hb.pi_hbar(g2, HBAR, f, GRID), GRID)
    rhs = hb.pi_hbar(g1 * g2, HBAR, f, GRID)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(f)) * max(1, abs(k1) + abs(k2))
    assert GRID.norm(hb.pi_hbar(g1, HBAR, f, GRID)) == pytest.approx(GRID.norm(f), rel=1e-12)


def test_pi_hbar_grid_errors():
    f = np.ones(GRID.N)
    with pytest.raises(GridError):
        hb.pi_hbar(H(0.5 * GRID.h, 0, 0), HBAR, f, GRID)
    with pytest.raises(GridError):
        hb.pi_hbar(H(0, 0.123, 0), HBAR, f, GRID)
    with pytest.raises(DomainError):
        hb.pi_hbar(H([0, 0], [0, 0], 0), HBAR, f, GRID)


# -- uncorrelated subspaces -------------------------------------------------------------------


def test_uncorrelate_direct_sum_is_fixed():
    rng = np.random.default_rng(2)
    K = 16
    x = rng.uniform(-1, 1, K)
    P = np.zeros((2 * K, 3), dtype=complex)
    P[:K, 0] = np.eye(K)[0]
    P[:K, 1] = np.eye(K)[5]
    P[K:, 2] = np.eye(K)[3]
    res = hb.uncorrelate(P, 1.0, x)
    assert res.residual <= 1e-12
    assert res.Dplus.shape[1] == 2 and res.Dminus.shape[1] == 1


def test_uncorrelate_graph_violates_hypothesis():
    rng = np.random.default_rng(3)
    K = 8
    x = np.sort(rng.uniform(-1, 1, K))
    v = rng.normal(size=K)
    M = np.diag(rng.uniform(1, 2, K))
    graph = np.concatenate([v, M @ v])[:, None]
    with pytest.raises(HypothesisError) as exc:
        hb.uncorrelate(graph, 1.0, x)
    assert exc.value.violation > 1e-3
    # enlarging to the invariant hull forces the graph apart
    res = hb.uncorrelate(graph, 1.0, x, enlarge=True)
    assert res.enlarged and res.residual <= 1e-10


def test_uncorrelate_two_point_model():
    x = np.array([0.3])
    e = np.array([[1.0], [1.0]])  # (e1, e1) in H_+ + H_-
    res = hb.uncorrelate(e, 1.0, x, enlarge=True)
    assert res.enlarged
    assert res.Dplus.shape[1] == 1 and res.Dminus.shape[1] == 1
    assert abs(abs(res.Dplus[0, 0]) - 1) < 1e-12 and abs(abs(res.Dminus[0, 0]) - 1) < 1e-12
    assert res.residual <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_uncorrelate_random_invariant(seed):
    rng = np.random.default_rng(seed)
    x, K0 = hb.random_invariant_subspace(rng, K=64)
    res = hb.uncorrelate(K0, 1.0, x, beta_grid=(1.0, 0.7))
    assert res.violation <= 1e-8
    assert res.residual <= 1e-8
    # idempotent: running on the output reproduces it
    D = np.zeros((128, res.Dplus.shape[1] + res.Dminus.shape[1]), dtype=complex)
    D[:64, : res.Dplus.shape[1]] = res.Dplus
    D[64:, res.Dplus.shape[1]:] = res.Dminus
    again = hb.uncorrelate(D, 1.0, x, beta_grid=(1.0, 0.7))
    assert again.residual <= 1e-10
    assert again.Dplus.shape == res.Dplus.shape and again.Dminus.shape == res.Dminus.shape


def test_uncorrelate_shape_check():
    with pytest.raises(DomainError):
        hb.uncorrelate(np.ones((5, 1)), 1.0, np.zeros(3))


def test_default_a_grid_cancels_phases():
    a = hb.default_a_grid(1.3, 0.8, 0.5)
    assert abs(np.exp(-2j * 1.3 * 0.5 * 0.8 * a).sum()) < 1e-12


# -- F kernel ---------------------------------------------------------------------------------


def test_table_matches_bessel(table):
    r = np.geomspace(1e-3, 40, 300)
    assert np.max(np.abs(table(r) / (2 * math.pi * k0(r)) - 1)) < 1e-6


@pytest.mark.parametrize("r", [0.3, 1.0, 2.5])
def test_table_matches_hankel_reduction(table, r):
    assert table(np.array([r]))[0] == pytest.approx(hb.F_hankel(r), rel=1e-5)


def test_table_cache_round_trip(tmp_path):
    t1 = hb.load_or_build_table(tmp_path, n=50)
    files = list(tmp_path.glob("ftable-*.bin"))
    assert len(files) == 1
    data = files[0].read_bytes()
    assert data[:8] == b"RLFTAB01" and len(data) == 40 + 8 * 50
    t2 = hb.load_or_build_table(tmp_path, n=50)
    assert np.array_equal(t1.values, t2.values)
    assert hb.FTable.from_bytes(t1.to_bytes()).key() == t1.key()
    with pytest.raises(DomainError):
        hb.FTable.from_bytes(b"garbage" + data[7:])


def test_F_tau_symmetry(table):
    assert hb.F_tau_symmetry(table, np.linspace(-3, 3, 13), np.linspace(0.1, 2, 7)) == 0.0


# -- positive-definite form ------------------------------------------------------------------------


def _group_sample(rng, n=40):
    pts = [H(a, b, c) for a, b, c in rng.uniform(-1, 1, size=(n, 3))]
    return pts, np.full(n, 1.0 / n)


def test_pd_form_constant_kernel():
    rng = np.random.default_rng(4)
    pts, w = _group_sample(rng)
    f = rng.normal(size=len(pts)) + 1j * rng.normal(size=len(pts))
    val = hb.pd_form(lambda g: 1.0, f, pts, w)
    assert val == pytest.approx(abs(np.sum(f * w)) ** 2, rel=1e-12)


def test_pd_form_narrow_gaussian():
    rng = np.random.default_rng(5)
    pts, w = _group_sample(rng)
    f = rng.normal(size=len(pts))
    F = lambda g: math.exp(-1e4 * (g.a[0] ** 2 + g.b[0] ** 2 + g.c**2))
    assert hb.pd_form(F, f, pts, w) == pytest.approx(np.sum((f * w) ** 2), rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_pd_form_sublaplacian_kernel(seed):
    rng = np.random.default_rng(seed)
    pts, w = _group_sample(rng)
    f = rng.normal(size=len(pts)) + 1j * rng.normal(size=len(pts))
    F = lambda g: float(hb.bandlimited_F(math.hypot(g.a[0], g.b[0])))
    assert hb.pd_form(F, f, pts, w) >= -1e-8


def test_bandlimited_F_approaches_bessel():
    r = np.array([0.5, 1.0, 3.0])
    assert np.allclose(hb.bandlimited_F(r, cutoff=200, order=1500), 2 * math.pi * k0(r), rtol=2e-3)


# -- reflection-positive forms ----------------------------------------------------------------------


def test_rp_forms_zero(table):
    z = hb.ProductTestFunction.zero()
    assert hb.rp_form_direct(z, table) == 0.0
    assert hb.rp_form_reduced(z) == 0.0


def test_rp_support_error(table):
    f = hb.ProductTestFunction((-1, 1), (-0.5, 0.5), (-1, 1), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(SupportError):
        hb.rp_form_direct(f, table)
    with pytest.raises(SupportError):
        hb.rp_form_reduced(f)


def test_rp_reduced_separable_matches_1d_transforms():
    f = hb.ProductTestFunction((-0.5, 0.7), (0.2, 0.9), (0.0, 1.0), np.zeros((0, 2)), np.zeros(0))
    from reflectlab.oskernel import bump

    gx = lambda x: bump((x - 0.1) / 0.6)
    gy = lambda y: bump((y - 0.55) / 0.35)
    x, wx = np.polynomial.legendre.leggauss(300)
    xs, wxs = 0.1 + 0.6 * x, 0.6 * wx
    ys, wys = 0.55 + 0.35 * x, 0.35 * wx
    t, wt = np.polynomial.legendre.leggauss(600)
    T = 7.0
    t, wt = T * t, T * wt
    Xh = np.exp(-1j * np.outer(np.sinh(t), xs)) @ (gx(xs) * wxs)
    Yh = np.exp(-np.outer(np.cosh(t), ys)) @ (gy(ys) * wys)
    ref = math.pi * np.dot(wt, np.abs(Xh * Yh) ** 2) * f.c_integral() ** 2
    assert hb.rp_form_reduced(f) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_rp_direct_matches_reduced(table, seed):
    f = hb.ProductTestFunction.random(np.random.default_rng(seed))
    d, r = hb.rp_form_direct(f, table), hb.rp_form_reduced(f)
    assert r >= 0
    assert abs(d - r) <= 1e-4 * (1 + abs(r))
    assert d >= -1e-6 * (1 + abs(r))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rp_reduced_nonnegative(seed):
    f = hb.ProductTestFunction.random(np.random.default_rng(seed))
    assert hb.rp_form_reduced(f, order=24) >= 0.0


def test_rp_displayed_weight_differs():
    # the two weights agree only up to the factor pi / sqrt(1 + xi^2) vs 1 / (1 + xi^2)
    f = hb.ProductTestFunction.random(np.random.default_rng(9))
    a = hb.rp_form_reduced(f, weight="derived")
    b = hb.rp_form_reduced(f, weight="as_displayed")
    assert a > 0 and b > 0 and abs(a - b) > 1e-3 * a
    with pytest.raises(DomainError):
        hb.rp_form_reduced(f, weight="other")


# -- Hardy probe ------------------------------------------------------------------------------------


def test_hardy_probe_zero_minus():
    one = lambda t: 1.0
    assert hb.hardy_positivity_probe(one, one, 50, minus_zero=True) == 0.0


def test_hardy_probe_indefinite():
    one = lambda t: 1.0
    assert hb.hardy_positivity_probe(one, one, 200, 64, rng=np.random.default_rng(0)) < 0


def test_hardy_probe_phase_rotation():
    # rotating h_- by a phase can always make the real part equal to -|<.,.>|
    rng = np.random.default_rng(1)
    sym = lambda t: np.exp(1j * np.sin(t))
    assert hb.hardy_positivity_probe(sym, lambda t: 1.0, 20, 16, rng=rng) < 0


def test_hardy_probe_requires_unimodular():
    with pytest.raises(DomainError):
        hb.hardy_positivity_probe(lambda t: 2.0, lambda t: 1.0, 5)
