import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracred import cartan
from diracred import linalg as la
from diracred.liegroup import get_group, subalgebra_from_spec


@pytest.fixture(params=["su2", "so3", "sl2r"])
def G(request):
    return get_group(request.param)


def test_eta_constant_is_one_half():
    assert cartan.ETA_CONSTANT == 0.5


def test_anchor_examples(G):
    rng = np.random.default_rng(0)
    X = G.algebra.random(rng)
    e = G.identity()
    np.testing.assert_allclose(cartan.anchor(G, e, G.double.join(X, X)), 0.0, atol=1e-15)
    g = G.random_element(rng, 0.7)
    np.testing.assert_allclose(cartan.anchor(G, g, G.double.join(0 * X, X)), g @ G.matrix(X), atol=1e-14)


def test_anchor_kernel_on_diagonal_is_centralizer(G):
    rng = np.random.default_rng(1)
    for g in (G.identity(), G.random_element(rng, 0.7)):
        A = cartan.anchor_left(G, g) @ G.double.diagonal().basis
        kernel = G.dim - np.linalg.matrix_rank(A, tol=1e-9)
        fixed = G.dim - np.linalg.matrix_rank(G.Ad(g) - np.eye(G.dim), tol=1e-9)
        assert kernel == fixed


def test_alpha_on_diagonal_at_identity_is_full_pairing(G):
    rng = np.random.default_rng(2)
    X, V = G.algebra.random(rng), G.algebra.random(rng)
    val = cartan.alpha(G, G.identity(), G.double.join(X, X), G.matrix(V))
    assert val == pytest.approx(G.inner(V, X), abs=1e-12)
    assert cartan.alpha(G, G.identity(), np.zeros(2 * G.dim), G.matrix(V)) == 0.0


def test_rho_is_isometry(G):
    rng = np.random.default_rng(3)
    g = G.random_element(rng, 0.7)
    R = cartan.rho_matrix(G, g)
    M = cartan.tangent_cotangent_space(G.dim).metric
    np.testing.assert_allclose(R.T @ M @ R, G.double.space.metric, atol=1e-12)
    # brute force through the pointwise maps
    for Y in np.eye(2 * G.dim)[:2]:
        u = G.maurer_cartan(g, cartan.anchor(G, g, Y))[0]
        c = [cartan.alpha(G, g, Y, g @ G.matrix(e)) for e in np.eye(G.dim)]
        np.testing.assert_allclose(R @ Y, np.r_[u, c], atol=1e-12)


def test_three_form_alternating_and_abelian():
    G = get_group("su2")
    rng = np.random.default_rng(4)
    g = G.random_element(rng)
    v1, v2 = (g @ G.matrix(G.algebra.random(rng)) for _ in range(2))
    assert cartan.cartan_three_form(G, g, v1, v1, v2) == pytest.approx(0.0, abs=1e-14)
    assert cartan.cartan_three_form(G, g, v1, v2, v1) == pytest.approx(0.0, abs=1e-14)
    A = get_group("abelian:3")
    a = A.random_element(rng)
    vs = [a @ A.matrix(A.algebra.random(rng)) for _ in range(3)]
    assert cartan.cartan_three_form(A, a, *vs) == 0.0


def test_three_form_matches_bracket_oracle(G):
    rng = np.random.default_rng(5)
    g = G.random_element(rng, 0.5)
    assert cartan.fit_eta_constant(G, g, rng, h=1e-4) == pytest.approx(cartan.ETA_CONSTANT, abs=1e-7)


def test_constant_closed_forms_bracket_to_zero():
    G = get_group("su2")
    rng = np.random.default_rng(6)
    g = G.random_element(rng)
    c1, c2 = rng.standard_normal((2, 3))
    s1 = lambda p: np.r_[np.zeros(3), c1]
    s2 = lambda p: np.r_[np.zeros(3), c2]
    np.testing.assert_allclose(cartan.courant_bracket(G, s1, s2, g, eta=False), 0.0, atol=1e-10)


def test_generators_preserve_brackets(G):
    rng = np.random.default_rng(7)
    g = G.random_element(rng, 0.5)
    Y, Z = rng.standard_normal((2, 2 * G.dim))
    s1 = lambda p: cartan.rho_matrix(G, p) @ Y
    s2 = lambda p: cartan.rho_matrix(G, p) @ Z
    ref = cartan.rho_matrix(G, g) @ G.double.bracket(Y, Z)
    errs = [np.abs(cartan.courant_bracket(G, s1, s2, g, h=h) - ref).max() for h in (2e-2, 1e-2)]
    assert errs[1] < 1e-3
    assert 3.0 < errs[0] / errs[1] < 5.0
    # without the 3-form the generators fail to close
    bad = np.abs(cartan.courant_bracket(G, s1, s2, g, h=1e-3, eta=False) - ref).max()
    assert bad > 1e-2


def test_symmetric_bracket_axiom():
    # [[s, s]] = a* d<s, s> / 2 for the action algebroid
    G = get_group("su2")
    rng = np.random.default_rng(8)
    g = G.random_element(rng)
    Y0, M = rng.standard_normal(6), rng.standard_normal((6, 8))
    s = lambda p: Y0 + M @ np.r_[p.ravel()[:4], p.ravel()[4:8]]
    h = 1e-4
    lhs = cartan.action_bracket(G, s, s, g, h)
    q = lambda p: 0.5 * G.double.inner(s(p), s(p))
    c = np.array([(q(g @ G.exp(h * e)) - q(g @ G.exp(-h * e))) / (2 * h) for e in np.eye(3)])
    rhs = np.linalg.solve(G.double.space.metric, cartan.anchor_left(G, g).T @ c)
    np.testing.assert_allclose(lhs, rhs, atol=1e-7)


def test_dirac_fibers(G):
    rng = np.random.default_rng(9)
    g = G.random_element(rng, 0.7)
    diag = G.double.diagonal()
    E = cartan.dirac_fiber_exact(G, diag, g)
    assert la.classify(E) == "lagrangian"
    # anchor image of the diagonal is the conjugation orbit tangent
    img = la.Subspace(G.algebra.space, cartan.anchor_left(G, g) @ diag.basis)
    orbit = la.Subspace(G.algebra.space, np.eye(G.dim) - G.Ad(np.linalg.inv(g)))
    assert img.equals(orbit)
    for spec in ("graph:ad", "graph:conj"):
        s = subalgebra_from_spec(G, spec, seed=2)
        assert la.classify(cartan.dirac_fiber_exact(G, s, g)) == "lagrangian"


def test_diagonal_at_identity_meets_cotangent_fully(G):
    E = cartan.dirac_fiber_exact(G, G.double.diagonal(), G.identity())
    n = G.dim
    cot = la.Subspace(cartan.tangent_cotangent_space(n), np.vstack([np.zeros((n, n)), np.eye(n)]))
    assert (E & cot).equals(cot)


def test_leaf_two_form_skew_and_zero_at_identity():
    G = get_group("su2")
    rng = np.random.default_rng(10)
    diag = G.double.diagonal()
    a = G.exp(np.array([0.4, -0.9, 0.3]))
    X, Y = rng.standard_normal((2, 3))
    vX = G.matrix(X) @ a - a @ G.matrix(X)
    vY = G.matrix(Y) @ a - a @ G.matrix(Y)
    w = cartan.leaf_two_form(G, diag, a, vX, vY)
    assert w == pytest.approx(-cartan.leaf_two_form(G, diag, a, vY, vX), abs=1e-12)
    ref = 0.5 * G.inner(X, (G.Ad(a) - G.Ad(np.linalg.inv(a))) @ Y)
    assert w == pytest.approx(ref, abs=1e-12)
    zero = np.zeros_like(a)
    assert cartan.leaf_two_form(G, diag, G.identity(), zero, zero) == 0.0


def test_leaf_two_form_rejects_transverse_vectors():
    G = get_group("su2")
    a = G.exp(np.array([0.0, 0.0, 0.8]))
    v = a @ G.matrix(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        cartan.leaf_two_form(G, G.double.diagonal(), a, v, v)


def test_multiplication_and_inversion(G):
    M, I = cartan.mult_relation(G), cartan.inv_relation(G)
    assert M.is_lagrangian() and I.is_lagrangian()
    D = G.double
    diag = D.diagonal()
    d = diag.basis
    Z = np.zeros_like(d)
    EE = la.Subspace(D.space * D.space, np.block([[d, Z], [Z, d]]))
    assert M.forward(EE).equals(diag)
    assert la.dirac_morphism_class(M, EE, diag) in ("weak", "strong")


def test_fusion_form_at_identity():
    G = get_group("su2")
    rng = np.random.default_rng(11)
    X1, X2, Y1, Y2 = rng.standard_normal((4, 3))
    e = G.identity()
    m = G.matrix
    val = cartan.fusion_two_form(G, e, e, (m(X1), m(Y1)), (m(X2), m(Y2)))
    assert val == pytest.approx(-0.5 * G.inner(X1, Y2) + 0.5 * G.inner(X2, Y1))


def test_fusion_matrix_matches_pointwise_form(G):
    rng = np.random.default_rng(12)
    g, h = G.random_element(rng, 0.6), G.random_element(rng, 0.6)
    a, b = rng.standard_normal((2, 2 * G.dim))
    d = G.dim
    W = cartan.fusion_matrix(G, g, h)
    tang = lambda x: (g @ G.matrix(x[:d]), h @ G.matrix(x[d:]))
    assert a @ W @ b == pytest.approx(cartan.fusion_two_form(G, g, h, tang(a), tang(b)), abs=1e-12)


def test_abelian_fusion_form_is_closed():
    G = get_group("abelian:2")
    P = cartan.ProductManifold([G, G])
    rng = np.random.default_rng(13)
    pt = P.random_point(rng)
    form = lambda p, a, b: float(a @ cartan.fusion_matrix(G, p[0], p[1]) @ b)
    us = rng.standard_normal((3, 4))
    assert cartan.exterior_derivative_2form(P, form, pt, *us) == pytest.approx(0.0, abs=1e-12)


def test_exact_morphism_identity_and_composition():
    rng = np.random.default_rng(14)
    I = cartan.exact_morphism(np.eye(3), np.zeros((3, 3)))
    assert I.equals(la.LinearRelation.identity(cartan.tangent_cotangent_space(3)))
    assert cartan.is_exact(I)
    T1, T2 = rng.standard_normal((2, 3)), rng.standard_normal((4, 2))
    W1 = rng.standard_normal((3, 3))
    W1 = W1 - W1.T
    W2 = rng.standard_normal((2, 2))
    W2 = W2 - W2.T
    R1, R2 = cartan.exact_morphism(T1, W1), cartan.exact_morphism(T2, W2)
    comp, _ = la.compose_relations(R2, R1)
    direct = cartan.exact_morphism(T2 @ T1, W1 + T1.T @ W2 @ T1)
    assert comp.equals(direct)
    assert cartan.anchor_compatibility_residual(comp, T2 @ T1) < 1e-12


@settings(max_examples=20, deadline=None)
@given(n1=st.integers(1, 4), n2=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_exact_morphisms_are_lagrangian_and_anchor_compatible(n1, n2, seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((n2, n1))
    W = rng.standard_normal((n1, n1))
    R = cartan.exact_morphism(T, W - W.T)
    assert R.is_lagrangian()
    assert cartan.is_exact(R)
    assert cartan.anchor_compatibility_residual(R, T) < 1e-12
