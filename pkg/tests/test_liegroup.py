import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg as sla

from diracred import linalg as la
from diracred.liegroup import (
    bracket_closure,
    catalogue_automorphism,
    chart_derivative,
    get_group,
    graph_subalgebra,
    recover_automorphism,
    subalgebra_from_spec,
)

GROUPS = ["su2", "so3", "sl2r", "abelian:2"]


@pytest.mark.parametrize("name", GROUPS)
def test_exp_of_zero_is_identity(name):
    G = get_group(name)
    np.testing.assert_allclose(G.exp(np.zeros(G.dim)), G.identity(), atol=1e-15)


@pytest.mark.parametrize("name", ["su2", "so3", "sl2r"])
def test_adjoint_matches_series_exponential(name):
    G = get_group(name)
    rng = np.random.default_rng(0)
    for _ in range(5):
        X = G.algebra.random(rng, scale=0.9)
        np.testing.assert_allclose(G.Ad(G.exp(X)), sla.expm(G.ad(X)), atol=1e-12)


def test_su2_adjoint_is_rodrigues_rotation():
    G = get_group("su2")
    X = np.array([0.3, -0.4, 1.2])
    th = np.linalg.norm(X)
    K = np.array([[0, -X[2], X[1]], [X[2], 0, -X[0]], [-X[1], X[0], 0]]) / th
    R = np.eye(3) + np.sin(th) * K + (1 - np.cos(th)) * K @ K
    # ad X acts as a cross product up to the basis normalisation
    sign = np.sign(G.ad(X)[2, 1] * K[2, 1])
    if sign < 0:
        R = R.T
    np.testing.assert_allclose(G.Ad(G.exp(X)), R, atol=1e-12)


@pytest.mark.parametrize("name", GROUPS)
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_metric_is_ad_invariant(name, seed):
    G = get_group(name)
    rng = np.random.default_rng(seed)
    g = G.random_element(rng, 0.7)
    x, y = G.algebra.random(rng), G.algebra.random(rng)
    assert G.inner(G.Ad(g) @ x, G.Ad(g) @ y) == pytest.approx(G.inner(x, y), abs=1e-10)


@pytest.mark.parametrize("name", ["su2", "so3", "sl2r"])
def test_maurer_cartan_forms(name):
    G = get_group(name)
    rng = np.random.default_rng(1)
    g = G.random_element(rng, 0.7)
    X = G.algebra.random(rng)
    left, right = G.maurer_cartan(g, g @ G.matrix(X))
    np.testing.assert_allclose(left, X, atol=1e-12)
    np.testing.assert_allclose(right, G.Ad(g) @ X, atol=1e-12)
    left, right = G.maurer_cartan(g, G.matrix(X) @ g)
    np.testing.assert_allclose(right, X, atol=1e-12)


@pytest.mark.parametrize("name", ["su2", "so3", "sl2r"])
def test_log_inverts_exp(name):
    G = get_group(name)
    rng = np.random.default_rng(2)
    for _ in range(10):
        X = G.algebra.random(rng, scale=0.8)
        np.testing.assert_allclose(G.log(G.exp(X)), X, atol=1e-10)
        assert G.membership_residual(G.exp(X)) < 1e-12


def test_log_returns_principal_branch():
    G = get_group("so3")
    X = G.log(G.exp(np.array([0.0, 0.0, 3.5])))
    assert np.linalg.norm(X) == pytest.approx(2 * np.pi - 3.5)


def test_log_without_real_logarithm_raises():
    G = get_group("sl2r")
    with pytest.raises(ValueError):
        G.log(np.diag([-2.0, -0.5]))


@pytest.mark.parametrize("name", ["su2", "so3", "sl2r"])
def test_graph_of_identity_is_diagonal(name):
    G = get_group(name)
    s = graph_subalgebra(G.double, np.eye(G.dim))
    assert s.subspace.equals(G.double.diagonal())


@pytest.mark.parametrize("name", ["su2", "so3", "sl2r"])
@pytest.mark.parametrize("which", ["ad", "conj"])
def test_catalogue_graphs_are_lagrangian_subalgebras(name, which):
    G = get_group(name)
    kappa = catalogue_automorphism(G, which, seed=4)
    s = graph_subalgebra(G.double, kappa)
    assert la.classify(s.subspace) == "lagrangian"
    assert bracket_closure(G.double, s.subspace) < 1e-12
    np.testing.assert_allclose(recover_automorphism(s), kappa, atol=1e-12)


def test_su2_conjugation_preserves_trace_form():
    G = get_group("su2")
    kappa = catalogue_automorphism(G, "conj")
    B = G.algebra.metric
    np.testing.assert_allclose(kappa.T @ B @ kappa, B, atol=1e-15)
    # metric is -2 tr(XY) on the 2 x 2 complex representatives
    X, Y = np.array([0.2, 0.5, -0.3]), np.array([1.0, -0.1, 0.4])
    x = G.matrix(X)[:2, :2] + 1j * G.matrix(X)[2:, :2]
    y = G.matrix(Y)[:2, :2] + 1j * G.matrix(Y)[2:, :2]
    assert G.inner(X, Y) == pytest.approx(-2 * np.trace(x @ y).real)


def test_graph_rejects_non_automorphism():
    G = get_group("su2")
    with pytest.raises(ValueError):
        graph_subalgebra(G.double, 2 * np.eye(3))


def test_subalgebra_spec_dimensions():
    G = get_group("sl2r")
    assert subalgebra_from_spec(G, "zero").dim == 0
    assert subalgebra_from_spec(G, "full").dim == 6
    assert subalgebra_from_spec(G, "random:2", seed=3).dim == 2
    with pytest.raises(ValueError):
        subalgebra_from_spec(G, "bogus")


def test_chart_derivative_constant_and_linear():
    G = get_group("su2")
    g = G.exp(np.array([0.3, 0.1, -0.2]))
    X = np.array([0.5, -1.0, 0.2])
    np.testing.assert_allclose(chart_derivative(lambda a: 1.0, G, g, X), 0.0)
    # f(a) = <Y, log(g0^-1 a)> near g0: derivative along X is <Y, X>
    Y = np.array([1.0, 2.0, 3.0])
    f = lambda a: G.inner(Y, G.log(np.linalg.inv(g) @ a))
    assert chart_derivative(f, G, g, X, step=1e-4) == pytest.approx(G.inner(Y, X), rel=1e-7)


def test_chart_derivative_second_order():
    G = get_group("su2")
    g = G.exp(np.array([0.3, 0.1, -0.2]))
    X = np.array([0.5, -1.0, 0.2])
    f = lambda a: np.trace(a @ a @ a.T).real
    exact = chart_derivative(f, G, g, X, step=1e-3, richardson=True)
    e1 = abs(chart_derivative(f, G, g, X, step=2e-2) - exact)
    e2 = abs(chart_derivative(f, G, g, X, step=1e-2) - exact)
    assert 3.5 < e1 / e2 < 4.5
