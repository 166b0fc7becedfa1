import numpy as np
import pytest

from diracred import holonomy as ho
from diracred import qham
from diracred.liegroup import get_group


@pytest.fixture(scope="module")
def G():
    return get_group("su2")


def test_identity_and_central_classes_have_zero_form(G):
    rng = np.random.default_rng(0)
    for spec in ("identity", "central"):
        M = qham.conjugacy_class(G, qham.class_from_spec(G, spec))
        p = M.random_point(rng)
        np.testing.assert_allclose(M.omega(p), 0.0, atol=1e-12)
        np.testing.assert_allclose(M.dphi(p), 0.0, atol=1e-12)
    np.testing.assert_allclose(qham.conjugacy_class(G, qham.class_from_spec(G, "central")).phi((G.identity(),)),
                               -G.identity(), atol=1e-12)


def test_generic_class_matches_leaf_form(G):
    rng = np.random.default_rng(1)
    M = qham.space_from_spec(G, "conjugacy:random", seed=1)
    worst = max(qham.leaf_oracle_residual(M, M.random_point(rng)) for _ in range(64))
    assert worst < 1e-9


@pytest.mark.parametrize("spec", ["conjugacy:random", "conjugacy:exp:0.4,-0.2,0.9",
                                  "fusion:random+exp:0.3,0.9,-0.4"])
def test_axioms_hold(G, spec):
    M = qham.space_from_spec(G, spec, seed=4)
    rep = qham.check_axioms(M, samples=16, rng=np.random.default_rng(2))
    assert rep.ok, rep.residuals
    if spec.startswith("fusion"):
        assert 1.5 < rep.orders["a"] < 2.5


def test_scaled_form_fails_moment_axiom(G):
    M = qham.space_from_spec(G, "conjugacy:random", seed=3)
    rep = qham.check_axioms(M.scaled(2.0), samples=4, rng=np.random.default_rng(3))
    assert rep.failures == {"c"}
    assert rep.witnesses["c"]["residual"] > 1e-3


def test_translated_moment_map_fails_moment_axiom(G):
    M = qham.space_from_spec(G, "conjugacy:random", seed=3)
    bad = M.translated(G.exp(np.array([0.3, -0.2, 0.5])))
    assert "c" in qham.check_axioms(bad, samples=4, rng=np.random.default_rng(4)).failures


def test_fusion_with_point_class_is_trivial(G):
    rng = np.random.default_rng(5)
    M1 = qham.space_from_spec(G, "conjugacy:random", seed=5)
    M0 = qham.conjugacy_class(G, np.zeros(3))
    F = qham.fuse(M1, M0)
    q1, q0 = M1.random_point(rng), M0.random_point(rng)
    W = F.omega(q1 + q0)
    np.testing.assert_allclose(W[:3, :3], M1.omega(q1), atol=1e-12)
    np.testing.assert_allclose(W[3:], 0.0, atol=1e-12)
    np.testing.assert_allclose(F.phi(q1 + q0), M1.phi(q1), atol=1e-12)


def test_fusion_is_associative(G):
    rng = np.random.default_rng(6)
    Ms = [qham.conjugacy_class(G, rng.standard_normal(3)) for _ in range(3)]
    left = qham.fuse(qham.fuse(Ms[0], Ms[1]), Ms[2])
    right = qham.fuse(Ms[0], qham.fuse(Ms[1], Ms[2]))
    p = left.random_point(rng)
    np.testing.assert_allclose(left.omega(p), right.omega(p), atol=1e-12)
    np.testing.assert_allclose(left.phi(p), right.phi(p), atol=1e-12)
    np.testing.assert_allclose(left.dphi(p), right.dphi(p), atol=1e-12)


def test_fusion_rejects_mixed_groups(G):
    with pytest.raises(ValueError):
        qham.fuse(qham.conjugacy_class(G, np.ones(3)), qham.conjugacy_class("so3", np.ones(3)))


def test_moment_map_is_equivariant(G):
    rng = np.random.default_rng(7)
    M = qham.space_from_spec(G, "fusion:random+exp:0.5,0,0", seed=7)
    assert qham.equivariance_residual(M, M.random_point(rng)) < 1e-8


def test_class_spec_errors(G):
    with pytest.raises(ValueError):
        qham.class_from_spec(G, "exp:1,2")
    with pytest.raises(ValueError):
        qham.space_from_spec(G, "fusion:random")
    with pytest.raises(ValueError):
        qham.class_from_spec(get_group("so3"), "central")


@pytest.mark.parametrize("spec", ["conjugacy:random", "fusion:random+exp:0.3,0.9,-0.4"])
def test_lift_then_reduce_round_trip(G, spec):
    M = qham.space_from_spec(G, spec, seed=8)
    r = qham.round_trip_residual(M, 16, np.random.default_rng(8), samples=2)
    assert max(r.values()) < 1e-8


def test_moment_condition_exact_and_by_differences(G):
    rng = np.random.default_rng(9)
    M = qham.space_from_spec(G, "conjugacy:random", seed=9)
    L = qham.lift(M, 7, rng=rng)
    q = M.random_point(rng)
    A = L.connection_at(q, rng)
    np.testing.assert_allclose(A.hol, M.phi(q), atol=1e-10)
    xi = rng.standard_normal((8, 3))
    xi[-1] = xi[0]
    assert L.moment_residual(q, A, xi) < 1e-10
    e1, e2 = (L.moment_residual(q, A, xi, h=h) for h in (1e-2, 5e-3))
    assert 1.5 < np.log2(e1 / e2) < 2.5
    with pytest.raises(ValueError):
        L.generator_chart(q, A, rng.standard_normal((8, 3)))


def test_kernel_odd_and_even_lattices(G):
    rng = np.random.default_rng(10)
    M = qham.space_from_spec(G, "conjugacy:random", seed=10)
    for N in (5, 8):
        L = qham.lift(M, N, check=False)
        q = M.random_point(rng)
        A = L.connection_at(q, rng)
        want = 0 if N % 2 else ho.staggered_mode_dimension(A, G.double.diagonal())
        assert L.kernel_excess(q, A) == want


def test_lift_refuses_bad_space(G):
    M = qham.space_from_spec(G, "conjugacy:random", seed=11).scaled(3.0)
    with pytest.raises(qham.AxiomFailure) as info:
        qham.lift(M, 6, samples=2)
    assert "c" in info.value.report.failures
