import numpy as np
import pytest
import scipy.linalg as sla

from diracred import holonomy as ho
from diracred import linalg as la
from diracred import reduction as red
from diracred.liegroup import get_group, subalgebra_from_spec


def smooth(G, N, seed=0, scale=1.0):
    c = scale * np.random.default_rng(seed).standard_normal((3, G.dim))
    return ho.DiscreteConnection.from_function(
        G, lambda t: c[0] + c[1] * np.cos(2 * np.pi * t) + c[2] * np.sin(2 * np.pi * t), N)


@pytest.mark.parametrize("name", ["su2", "so3", "sl2r", "abelian:2"])
@pytest.mark.parametrize("N", [3, 6])
def test_reduced_fiber_dimensions_and_residuals(name, N):
    G = get_group(name)
    F = red.reduce_fiber(smooth(G, N, seed=N))
    d = G.dim
    assert F.dims == ((N + 1) * d, (N - 1) * d, 2 * d)
    for key, tol in (("isometry", 1e-9), ("cperp", 1e-8), ("well_defined", 1e-9), ("anchor", 1e-9)):
        assert F.residuals[key] < tol, key


def test_abelian_zero_connection_quotient_is_boundary_form():
    G = get_group("abelian:2")
    A = ho.DiscreteConnection.zero(G, 5)
    F = red.reduce_fiber(A)
    B = G.algebra.metric
    # the pairing on labels (xi_0, xi_N) is -B on the first slot and +B on the second
    np.testing.assert_allclose(G.double.space.metric, sla.block_diag(-B, B), atol=0)
    assert F.residuals["isometry"] == pytest.approx(0.0, abs=1e-13)
    np.testing.assert_allclose(F.hol, np.eye(F.hol.shape[0]), atol=1e-15)


def test_su2_fine_lattice_isometry():
    G = get_group("su2")
    F = red.reduce_fiber(smooth(G, 16, seed=3))
    assert F.residuals["isometry"] < 1e-10


def test_labels_of_generators_are_endpoint_values():
    G = get_group("so3")
    A = smooth(G, 4, seed=1)
    F = red.reduce_fiber(A)
    xi = np.random.default_rng(2).standard_normal((5, 3))
    lab = F.label(ho.generator(A, xi))
    np.testing.assert_allclose(lab, np.concatenate([xi[0], xi[-1]]), atol=1e-10)


@pytest.mark.parametrize("spec", ["diagonal", "graph:ad", "graph:conj", "zero", "full"])
def test_reduce_dirac_recovers_subalgebra(spec):
    G = get_group("su2")
    A = smooth(G, 5, seed=4)
    s = subalgebra_from_spec(G, spec, seed=2)
    assert red.dirac_residual(A, s) < 1e-8
    if spec == "zero":
        assert red.reduce_dirac(A, s).dim == 0


def test_gauge_related_labels_transform_by_endpoint_action():
    G = get_group("su2")
    rng = np.random.default_rng(5)
    A = smooth(G, 6, seed=5)
    k = ho.GaugeElement.random(G, 6, rng, scale=0.3)
    r = red.gauge_equivariance_residual(A, k, rng)
    assert r["holonomy"] < 1e-12
    assert r["labels"] < 1e-10


@pytest.mark.parametrize("name", ["su2", "abelian:1"])
def test_twisted_splitting_is_exact(name):
    G = get_group(name)
    for N in (4, 9):
        assert red.reduce_splitting(smooth(G, N, seed=N), "linear", "twisted").error < 1e-12


def test_left_splitting_converges_to_first_order():
    G = get_group("su2")
    ns = [8, 16, 32]
    errs = [red.reduce_splitting(smooth(G, N, seed=7), "linear", "left").error for N in ns]
    assert 0.9 < red.estimate_order(ns, errs) < 1.2


def test_beta_closed_form_values():
    # twisted trapezoid telescopes to 1/2 exactly; left sums are 1/2 - 1/(2N)
    for N in (3, 10):
        assert red.beta_closed_form(N, "linear", "twisted") == pytest.approx(0.5, abs=1e-15)
        assert red.beta_closed_form(N, "linear", "left") == pytest.approx(0.5 - 0.5 / N)
    with pytest.raises(ValueError):
        red.beta_closed_form(4, "linear", "simpson")


def test_beta_limit_is_profile_independent():
    ns = [16, 32, 64]
    lim = lambda chi: red.richardson_limit([red.beta_closed_form(N, chi, "left") for N in ns])
    assert lim("linear") == pytest.approx(0.5, abs=1e-12)
    assert lim("smoothstep") == pytest.approx(0.5, abs=1e-3)


def test_identity_relation_reduces_to_identity():
    G = get_group("su2")
    A = smooth(G, 4, seed=8)
    V = ho.fiber_space(A)
    Dsp = G.double.space
    m = red.reduce_morphism(la.LinearRelation.identity(V), A, A, lambda xi: xi,
                            expected=la.LinearRelation.identity(Dsp), s=G.double.diagonal())
    assert m.square_residual < 1e-8
    assert m.expected_residual < 1e-8
    assert m.classes["upstairs"] == m.classes["reduced"] == "strong"
    assert m.exact == {"upstairs": True, "reduced": True}


@pytest.mark.parametrize("boundary", ["fixed", "free"])
def test_gauge_graph_reduces_to_endpoint_adjoint(boundary):
    G = get_group("su2")
    rng = np.random.default_rng(9)
    A = smooth(G, 4, seed=9)
    k = ho.GaugeElement.random(G, 4, rng, 0.3, boundary=boundary).nodes
    A2, R = red.gauge_graph(A, k)
    Dsp = G.double.space
    exp = la.LinearRelation.from_map(Dsp, Dsp, sla.block_diag(G.Ad(k[0]), G.Ad(k[-1])))
    f = lambda xi: np.array([G.Ad(kk) @ x for kk, x in zip(k, xi)])
    m = red.reduce_morphism(R, A, A2, f, expected=exp)
    assert m.square_residual < 1e-8
    assert m.expected_residual < 1e-8
    assert all(m.exact.values())


def test_non_intertwining_relation_is_rejected():
    G = get_group("su2")
    rng = np.random.default_rng(10)
    A = smooth(G, 3, seed=10)
    k = ho.GaugeElement.random(G, 3, rng, 0.5).nodes
    A2, R = red.gauge_graph(A, k)
    with pytest.raises(red.IntertwiningError) as info:
        red.reduce_morphism(R, A, A2, lambda xi: xi)
    assert info.value.witness.shape == (4, 3)


@pytest.mark.parametrize("name", ["su2", "sl2r"])
def test_equivariant_extension_identities(name):
    G = get_group(name)
    A = smooth(G, 5, seed=11, scale=0.6)
    r = red.equivariant_extension_check(A, "linear", np.random.default_rng(11))
    assert r["boundary"] < 1e-12
    assert r["twisted_alpha"] < 1e-12
    assert r["cocycle"] < 1e-7


def test_estimate_order_and_richardson():
    ns = [4, 8, 16]
    assert red.estimate_order(ns, [1.0 / n**2 for n in ns]) == pytest.approx(2.0)
    assert red.estimate_order(ns, [0.0, 0.0, 0.0]) == float("inf")
    assert np.isnan(red.estimate_order(ns, [1.0, 0.0, 0.0]))
    vals = [1.0 + 3.0 / n for n in ns]
    assert red.richardson_limit(vals, 1.0) == pytest.approx(1.0)


def test_dimension_failure_raises(monkeypatch):
    G = get_group("su2")
    A = smooth(G, 3, seed=12)
    # a generator matrix that loses a column breaks the dimension count
    real = red.generator_matrix
    monkeypatch.setattr(red, "generator_matrix", lambda A: real(A)[:, 1:])
    with pytest.raises(red.ReductionInvariantError):
        red.reduce_fiber(A)
