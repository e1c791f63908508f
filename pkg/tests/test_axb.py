import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflectlab import axb
from reflectlab.errors import DomainError

A = axb.AxbElement
real = st.floats(-2, 2, allow_nan=False)


# -- group and representations ----------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(real, real, real, real, real, real)
def test_product_matches_matrix_model(s1, b1, s2, b2, s3, b3):
    g1, g2, g3 = A(s1, b1), A(s2, b2), A(s3, b3)
    assert np.allclose((g1 * g2).matrix, g1.matrix @ g2.matrix, rtol=1e-14, atol=1e-14)
    lhs, rhs = ((g1 * g2) * g3).matrix, (g1 * (g2 * g3)).matrix
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13)
    assert np.allclose((g1 * g1.inverse()).matrix, np.eye(2), atol=1e-13)
    assert axb.tau(g1 * g2) == axb.tau(g1) * axb.tau(g2)


def gauss(x):
    return np.exp(-(x - 0.3) ** 2) * (1 + 0.5j * x)


def test_pi_pm_examples():
    x = np.linspace(-3, 3, 11)
    assert np.array_equal(axb.pi_pm(A.identity(), 1, gauss, x), gauss(x))
    b = 0.7
    for sign in (1, -1):
        assert np.allclose(axb.pi_pm(A(0, b), sign, gauss, x), np.exp(sign * 1j * b * np.exp(x)) * gauss(x))
    with pytest.raises(DomainError):
        axb.pi_pm(A.identity(), 0, gauss, x)


@settings(max_examples=100, deadline=None)
@given(real, real, real, real, st.sampled_from([1, -1]))
def test_pi_pm_composition(s1, b1, s2, b2, sign):
    g1, g2 = A(s1, b1), A(s2, b2)
    x = np.linspace(-2, 2, 17)
    lhs = axb.pi_pm_op(g1, sign)(axb.pi_pm_op(g2, sign)(gauss))(x)
    rhs = axb.pi_pm(g1 * g2, sign, gauss, x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


# -- Q-field -------------------------------------------------------------------------------------


def test_q_from_mu_examples():
    assert np.allclose(axb.q_from_mu(1), 0.5 * np.ones((2, 2)), atol=1e-15)
    Q = axb.q_from_mu(1j)
    assert np.allclose(Q, 0.5 * np.array([[1, 1j], [-1j, 1]]), atol=1e-15)
    assert axb.qjq_trace(Q) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        axb.q_from_mu(-1)


@pytest.mark.parametrize("case, diag", [("zero", [0, 0]), ("plus", [1, 0]), ("minus", [0, 1])])
def test_q_degenerate(case, diag):
    Q = axb.q_degenerate(case)
    assert np.array_equal(Q, np.diag(diag).astype(complex))
    assert np.all(Q @ axb.J2 @ Q == 0)


def test_q_degenerate_unknown():
    with pytest.raises(DomainError):
        axb.q_degenerate("other")


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1e3), st.floats(-1e3, 1e3))
def test_qfield_identities(re, im):
    Q = axb.q_from_mu(complex(re, im))
    res = axb.qfield_residuals(Q)
    assert max(res.values()) <= 1e-12
    mu = complex(re, im)
    assert axb.qjq_trace(Q) == pytest.approx(2 * re / (1 + abs(mu) ** 2), abs=1e-15)
    assert axb.qjq_trace(Q) >= 0
    QJQ = Q @ axb.J2 @ Q
    assert np.linalg.det(QJQ).real <= 1e-12
    assert abs(np.linalg.det(Q)) <= 1e-12


def test_projection_field_from_mu():
    field = axb.ProjectionField.from_mu(lambda xi: 1 / (1 + 1j * xi))
    assert field.xi_grid.size == 256 and field.xi_grid[0] == -20 and field.xi_grid[-1] == 20
    assert max(field.residuals().values()) <= 1e-12
    assert np.all(field.form_density() >= 0)


# -- graph J-form ---------------------------------------------------------------------------------


def test_graph_jform_examples():
    rng = np.random.default_rng(0)
    xi = axb.default_xi_grid()
    w = np.full(xi.size, xi[1] - xi[0])
    f = rng.normal(size=xi.size) + 1j * rng.normal(size=xi.size)
    assert axb.graph_jform(np.full(xi.size, 1j), f, w) == 0.0
    assert axb.graph_jform(np.ones(xi.size), f, w) == pytest.approx(2 * np.sum(np.abs(f) ** 2 * w), rel=1e-14)


def test_graph_jform_indefinite_for_mixed_sign():
    xi = axb.default_xi_grid()
    w = np.full(xi.size, xi[1] - xi[0])
    lam = np.tanh(xi)
    bump = lambda c: np.exp(-((xi - c) ** 2))
    assert axb.graph_jform(lam, bump(5.0), w) > 0
    assert axb.graph_jform(lam, bump(-5.0), w) < 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_graph_jform_nonneg_iff_real_part_nonneg(seed):
    rng = np.random.default_rng(seed)
    n = 16
    lam = rng.normal(size=n) + 1j * rng.normal(size=n)
    w = np.full(n, 0.5)
    # a finite grid form is diagonal, so its minimum over unit vectors is attained on a node
    node_values = [axb.graph_jform(lam, np.eye(n)[k], w) for k in range(n)]
    assert (min(node_values) >= 0) == bool(np.all(lam.real >= 0))
    f = rng.normal(size=n)
    if np.all(lam.real >= 0):
        assert axb.graph_jform(lam, f, w) >= 0


# -- escape times ----------------------------------------------------------------------------------


def test_escape_E0():
    res = axb.escape_time(0.0, 0.0, +1)
    assert res.status == "FINITE"
    assert res.value == pytest.approx(1.0, abs=1e-8)


def test_escape_E1_diverges():
    res = axb.escape_time(1.0, 0.0, -1)
    assert res.status == "DIVERGES" and res.value is None
    assert res.slope == pytest.approx(1.0, abs=1e-6)


def test_escape_E1_finite():
    res = axb.escape_time(1.0, 0.0, +1)
    assert res.status == "FINITE"
    assert max(res.cutoffs) <= 40
    assert res.value == pytest.approx(axb.escape_time_closed_form(1.0, 0.0), abs=1e-8)


@pytest.mark.parametrize("E", [0.25, 1.0, 4.0, 9.0])
@pytest.mark.parametrize("x0", [-1.0, 0.0, 2.0])
def test_escape_dichotomy(E, x0):
    plus, minus = axb.escape_time(E, x0, +1), axb.escape_time(E, x0, -1)
    assert plus.status == "FINITE" and minus.status == "DIVERGES"
    assert plus.value == pytest.approx(axb.escape_time_closed_form(E, x0), abs=1e-8)
    assert minus.slope == pytest.approx(1 / math.sqrt(E), rel=1e-4)


def test_escape_negative_energy():
    # the turning point x_t = log(-E)/2 is the start of the path
    res = axb.escape_time(-1.0, -5.0, +1)
    assert res.status == "FINITE"
    # int_0^inf dx / sqrt(e^{2x} - 1) = pi / 2
    assert res.value == pytest.approx(math.pi / 2, abs=1e-7)
    with pytest.raises(DomainError):
        axb.escape_time(-1.0, 1.0, -1)


# -- deficiency probe ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def true_potential():
    return axb.deficiency_probe(1j, X=20.0)


def test_deficiency_true_potential(true_potential):
    res = true_potential
    assert res.per_end == {"+inf": "limit_circle", "-inf": "limit_point"}
    assert res.dims == {"+inf": 2, "-inf": 1}
    assert res.contributions == {"+inf": 1, "-inf": 0}
    assert res.count_L2 == 1


def test_deficiency_conjugate_symmetry(true_potential):
    res = axb.deficiency_probe(-1j, X=20.0)
    assert res.per_end == true_potential.per_end
    assert res.count_L2 == true_potential.count_L2


def test_deficiency_stable_under_refinement(true_potential):
    ext = axb.deficiency_probe(1j, X=25.0)
    fine = axb.deficiency_probe(1j, X=20.0, rtol=1e-11)
    assert ext.per_end == true_potential.per_end == fine.per_end


def test_deficiency_control():
    res = axb.deficiency_probe(1j, X=20.0, potential=False)
    assert res.dims == {"+inf": 1, "-inf": 1}
    assert res.count_L2 == 0


@pytest.mark.parametrize("kw", [dict(z=1.0), dict(z=1j, X=10.0)])
def test_deficiency_domain(kw):
    with pytest.raises(DomainError):
        axb.deficiency_probe(**kw)


# -- no-go harness ------------------------------------------------------------------------------------


def test_invariance_examples():
    grid = axb.XGrid()
    assert axb.invariance_probe(axb.NOGO_FAMILY["zero"], grid=grid) <= 1e-12
    assert np.all(axb.form_eigenvalues(axb.NOGO_FAMILY["zero"], grid) == 0)
    assert axb.invariance_probe(axb.NOGO_FAMILY["one"], (1.0,), grid) > 0.1
    assert np.all(axb.form_eigenvalues(axb.NOGO_FAMILY["i_tanh"], grid) == 0)


def test_graph_basis_orthonormal():
    grid = axb.XGrid(N=32)
    Q = axb.graph_basis(axb.NOGO_FAMILY["cauchy"], grid)
    assert np.allclose(Q.conj().T @ Q, np.eye(32), atol=1e-13)


def test_nogo_dichotomy():
    rows = {r.name: r for r in axb.nogo_dichotomy()}
    assert all(r.consistent for r in rows.values())
    assert rows["zero"].form_zero and rows["zero"].violation <= 1e-12
    assert rows["one"].violation > 0.1 and rows["one"].form_margin == pytest.approx(1.0)


def test_invariant_cones_stored():
    assert set(axb.INVARIANT_CONES) == {"C1+", "C1-", "C2+", "C2-"}
