"""Fiberwise coisotropic reduction of the lattice model to the Cartan-Courant algebroid.

At a lattice connection A the coisotropic subspace is C = E^(d), spanned by the
generators of all node fields; its orthogonal is E^(0), the generators of the
node fields vanishing at both ends. The quotient C / C^perp is identified with
the double by the labelling rho(xi) -> (xi_0, xi_N), and the base point is
Hol(A).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cartan import alpha_coords, anchor_left, is_exact, rho_matrix
from .holonomy import (
    DiscreteConnection,
    _average,
    _move,
    _nodes,
    _pairing_block,
    act_on_fiber,
    connection_lift,
    covariant_derivative,
    dirac_fiber,
    fiber_space,
    generator,
    generator_matrix,
    lattice_three_form,
    lift_field,
    node_basis,
    tangent_holonomy_matrix,
    varpi_matrix,
    _chi,
)
from .linalg import (
    LinearRelation,
    MetrizedSpace,
    Reduction,
    Subspace,
    compose_relations,
    dirac_morphism_class,
    orthogonal_complement,
    reduce_space,
)

__all__ = [
    "ReductionInvariantError",
    "IntertwiningError",
    "ReducedFiber",
    "reduce_fiber",
    "reduce_dirac",
    "dirac_residual",
    "SplittingComparison",
    "reduce_splitting",
    "beta_closed_form",
    "gauge_graph",
    "quotient_relation",
    "MorphismReduction",
    "reduce_morphism",
    "gauge_equivariance_residual",
    "equivariant_extension_check",
    "estimate_order",
    "richardson_limit",
]


class ReductionInvariantError(RuntimeError):
    """An integer invariant of the reduction failed; never silently passed."""


class IntertwiningError(ValueError):
    """A fiber relation does not intertwine the generators."""

    def __init__(self, message: str, witness: np.ndarray):
        super().__init__(message)
        self.witness = witness


# -- the reduced fiber

@dataclass
class ReducedFiber:
    connection: DiscreteConnection
    hol: np.ndarray
    C: Subspace
    Cperp: Subspace
    reduction: Reduction
    labels: np.ndarray = field(repr=False)
    residuals: dict = field(default_factory=dict)

    @property
    def double(self) -> MetrizedSpace:
        return self.connection.group.double.space

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.C.dim, self.Cperp.dim, self.reduction.space.dim

    def label(self, vectors) -> np.ndarray:
        """Labels in the double of fiber vectors lying in C."""
        return self.labels @ self.reduction.project(vectors)

    def quotient_graph(self) -> LinearRelation:
        """The quotient map as a relation from the fiber to the double."""
        V = fiber_space(self.connection)
        Cb = self.C.basis
        return LinearRelation(V, self.double, np.vstack([self.label(Cb), Cb]))

    def to_exact(self) -> np.ndarray:
        """Map from the double to (u, c) coordinates at Hol(A)."""
        return rho_matrix(self.connection.group, self.hol)


def _endpoint_picker(N: int, d: int) -> np.ndarray:
    P = np.zeros((2 * d, (N + 1) * d))
    P[:d, :d] = np.eye(d)
    P[d:, N * d:] = np.eye(d)
    return P


def reduce_fiber(A: DiscreteConnection) -> ReducedFiber:
    """Reduce the fiber at A by C = E^(d) and label the quotient by the double."""
    G, N, d = A.group, A.N, A.d
    V = fiber_space(A)
    R = generator_matrix(A)
    C = Subspace(V, R)
    Cperp = orthogonal_complement(C)
    if (C.dim, Cperp.dim) != ((N + 1) * d, (N - 1) * d):
        raise ReductionInvariantError(
            f"dim C = {C.dim}, dim C^perp = {Cperp.dim}; expected {(N + 1) * d}, {(N - 1) * d}"
        )
    expected = Subspace(V, R @ node_basis(G, N, G.double.zero()))
    red = reduce_space(C)
    if red.space.dim != 2 * d:
        raise ReductionInvariantError(f"quotient has dimension {red.space.dim}, expected {2 * d}")
    P = red.project(R)
    ends = _endpoint_picker(N, d)
    labels = ends @ np.linalg.pinv(P)
    Md = G.double.space.metric
    # anchor of the quotient: T Hol on the tangent part of representatives
    anchor_up = tangent_holonomy_matrix(A) @ red.section[: N * d]
    anchor_down = anchor_left(G, A.hol) @ labels
    residuals = {
        "cperp": Cperp.distance(expected),
        "well_defined": float(np.abs(labels @ P - ends).max()),
        "isometry": float(np.abs(labels.T @ Md @ labels - red.space.metric).max()),
        "anchor": float(np.abs(anchor_up - anchor_down).max()),
    }
    return ReducedFiber(A, A.hol, C, Cperp, red, labels, residuals)


def reduce_dirac(A: DiscreteConnection, s: Subspace, fiber: ReducedFiber | None = None) -> Subspace:
    """Label image of (E^(s) meet C) / (E^(s) meet C^perp), a subspace of the double."""
    F = reduce_fiber(A) if fiber is None else fiber
    E = dirac_fiber(A, s)
    EC = E & F.C
    # EC.basis is orthonormal, so singular values of the labels are absolute
    L = F.label(EC.basis)
    if L.size == 0:
        return F.double.zero()
    U, S, _ = np.linalg.svd(L, full_matrices=False)
    keep = S > A.group.double.space.tol.rank_tol * max(1.0, np.abs(F.labels).max())
    return Subspace(F.double, U[:, keep])


def dirac_residual(A: DiscreteConnection, s: Subspace, fiber: ReducedFiber | None = None) -> float:
    return reduce_dirac(A, s, fiber).distance(Subspace(A.group.double.space, s.basis))


# -- the splitting

@dataclass
class SplittingComparison:
    """beta as a matrix from left-trivialised X to covector frame values.

    The reference is X -> B X / 2, the frame values of X . theta^L / 2.
    """

    N: int
    chi: str
    quadrature: str
    beta: np.ndarray
    reference: np.ndarray
    coefficient: float

    @property
    def error(self) -> float:
        return float(np.abs(self.beta - self.reference).max())


def beta_closed_form(N: int, chi="linear", quadrature: str = "twisted") -> float:
    """The scalar sum multiplying X . Z in beta(X)(Z)."""
    c = _chi(chi).nodes(N)
    dc = np.diff(c)
    if quadrature == "twisted":
        return float(np.sum(0.5 * (c[:-1] + c[1:]) * dc))
    if quadrature == "left":
        return float(np.sum(c[:-1] * dc))
    raise ValueError(f"unknown quadrature {quadrature!r}; use 'twisted' or 'left'")


def reduce_splitting(A: DiscreteConnection, chi="linear", quadrature: str = "twisted",
                     fiber: ReducedFiber | None = None) -> SplittingComparison:
    """Reduce the varpi-twisted splitting and extract beta.

    For each X the horizontal generator rho(l_X), with l_X the chi-weighted lift
    field, differs from the twisted splitting j'(lift X) = (lift X, i(lift X) varpi)
    by a covector that annihilates verticals. That covector lies in C; its label
    gives a covector at Hol(A), which is beta(X).

    ``quadrature="left"`` replaces the twisted trapezoid average by the left
    value m_i = xi_i. The pairing then no longer telescopes, so beta is read off
    directly as beta(X)(Z) = sum delta l_X . (D l_Z).
    """
    G, N, d = A.group, A.N, A.d
    prof = _chi(chi)
    B = G.algebra.metric
    K = _pairing_block(G, N)
    ref = 0.5 * B
    if quadrature == "left":
        beta = np.zeros((d, d))
        for j, X in enumerate(np.eye(d)):
            lX = lift_field(A, X, prof)
            for k, Z in enumerate(np.eye(d)):
                lZ = connection_lift(A, Z, prof)
                beta[k, j] = A.delta * np.einsum("ia,ab,ib->", lX[:-1], B, lZ)
        return SplittingComparison(N, prof.name, quadrature, beta, ref, beta_closed_form(N, prof, "left"))
    if quadrature != "twisted":
        raise ValueError(f"unknown quadrature {quadrature!r}; use 'twisted' or 'left'")
    F = reduce_fiber(A) if fiber is None else fiber
    W = varpi_matrix(A, prof)
    Kinv = np.linalg.inv(K)
    n = N * d
    beta = np.zeros((d, d))
    for j, X in enumerate(np.eye(d)):
        lX = lift_field(A, X, prof)
        hor = generator(A, lX)
        twist = Kinv @ W.T @ hor[:n]
        diff = np.concatenate([np.zeros(n), hor[n:] - twist])
        lab = F.label(diff)
        beta[:, j] = alpha_coords(G, A.hol) @ lab
    return SplittingComparison(N, prof.name, quadrature, beta, ref, beta_closed_form(N, prof, "twisted"))


# -- morphisms

def gauge_graph(A: DiscreteConnection, k) -> tuple[DiscreteConnection, LinearRelation]:
    """Graph of the lifted gauge action as a relation from the fiber at A to the fiber at k.A."""
    from .holonomy import gauge_act

    kn = _nodes(k)
    A2 = gauge_act(kn, A)
    G = A.group
    V1, V2 = fiber_space(A), fiber_space(A2)
    T = np.column_stack([act_on_fiber(G, kn, e) for e in np.eye(V1.dim)])
    return A2, LinearRelation.from_map(V1, V2, T)


def quotient_relation(F: ReducedFiber) -> LinearRelation:
    return F.quotient_graph()


def _check_intertwining(R: LinearRelation, A1: DiscreteConnection, A2: DiscreteConnection,
                        f: Callable[[np.ndarray], np.ndarray], tol: float):
    d, N = A1.d, A1.N
    for xi in np.eye((N + 1) * d):
        xi = xi.reshape(N + 1, d)
        v1 = generator(A1, xi)
        v2 = generator(A2, f(xi))
        res = R.graph.containment_residual(np.concatenate([v2, v1])[:, None])
        if res > tol:
            raise IntertwiningError(f"generators not intertwined (residual {res:.3e})", xi)


@dataclass
class MorphismReduction:
    relation: LinearRelation
    expected: LinearRelation | None
    square_residual: float
    expected_residual: float
    classes: dict
    exact: dict


def _relation_residual(R1: LinearRelation, R2: LinearRelation) -> float:
    return R1.graph.distance(R2.graph)


def reduce_morphism(R: LinearRelation, A1: DiscreteConnection, A2: DiscreteConnection,
                    f: Callable[[np.ndarray], np.ndarray], expected: LinearRelation | None = None,
                    s: Subspace | None = None, tol: float = 1e-8) -> MorphismReduction:
    """Reduce a fiber relation R that intertwines rho_1(xi) with rho_2(f(xi)).

    The reduced relation is the label image of gr(R) meet (C_2 x C_1). It is
    checked against q_2 o R = R_red o q_1, and against ``expected`` when given.
    With ``s`` the Dirac-morphism classes of R and R_red for E^(s) are reported.
    """
    _check_intertwining(R, A1, A2, f, tol)
    F1, F2 = reduce_fiber(A1), reduce_fiber(A2)
    n2 = R.target.dim
    CC = Subspace(R.ambient, np.block([
        [F2.C.basis, np.zeros((n2, F1.C.dim))],
        [np.zeros((R.source.dim, F2.C.dim)), F1.C.basis],
    ]))
    inter = R.graph & CC
    graph = np.vstack([F2.label(inter.basis[:n2]), F1.label(inter.basis[n2:])])
    Dspace = A1.group.double.space
    Rred = LinearRelation(Dspace, Dspace, graph)
    left, _ = compose_relations(F2.quotient_graph(), R)
    right, _ = compose_relations(Rred, F1.quotient_graph())
    square = _relation_residual(left, right)
    exp_res = _relation_residual(Rred, expected) if expected is not None else float("nan")
    classes = {}
    if s is not None:
        E1, E2 = dirac_fiber(A1, s), dirac_fiber(A2, s)
        sd = Subspace(Dspace, s.basis)
        classes = {"upstairs": dirac_morphism_class(R, E1, E2),
                   "reduced": dirac_morphism_class(Rred, sd, sd)}
    exact = {"upstairs": is_exact(_to_exact_coords(R, A1, A2)),
             "reduced": is_exact(_reduced_exact(Rred, F1, F2))}
    return MorphismReduction(Rred, expected, square, exp_res, classes, exact)


def _exact_frame(A: DiscreteConnection) -> np.ndarray:
    n = A.N * A.d
    K = _pairing_block(A.group, A.N)
    return np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), K]])


def _to_exact_coords(R: LinearRelation, A1, A2) -> LinearRelation:
    from .cartan import tangent_cotangent_space

    n2 = R.target.dim
    S2, S1 = _exact_frame(A2), _exact_frame(A1)
    g = R.graph.basis
    return LinearRelation(tangent_cotangent_space(A1.N * A1.d), tangent_cotangent_space(A2.N * A2.d),
                          np.vstack([S2 @ g[:n2], S1 @ g[n2:]]))


def _reduced_exact(Rred: LinearRelation, F1: ReducedFiber, F2: ReducedFiber) -> LinearRelation:
    from .cartan import tangent_cotangent_space

    d = F1.connection.d
    g = Rred.graph.basis
    T = tangent_cotangent_space(d)
    return LinearRelation(T, T, np.vstack([F2.to_exact() @ g[:2 * d], F1.to_exact() @ g[2 * d:]]))


def gauge_equivariance_residual(A: DiscreteConnection, k, rng: np.random.Generator,
                                samples: int = 4) -> dict:
    """Compare labels at k.A of transported vectors with the (G x G)-action on labels."""
    kn = _nodes(k)
    G = A.group
    A2, _ = gauge_graph(A, kn)
    F1, F2 = reduce_fiber(A), reduce_fiber(A2)
    hol = float(np.abs(A2.hol - kn[0] @ A.hol @ np.linalg.inv(kn[-1])).max())
    Ad0, AdN = G.Ad(kn[0]), G.Ad(kn[-1])
    worst = 0.0
    for _ in range(samples):
        c = F1.C.basis @ rng.standard_normal(F1.C.dim)
        Y0, Y1 = G.double.split(F1.label(c))
        moved = F2.label(act_on_fiber(G, kn, c))
        worst = max(worst, float(np.abs(moved - np.concatenate([Ad0 @ Y0, AdN @ Y1])).max()))
    return {"holonomy": hol, "labels": worst}


# -- equivariant extension

def equivariant_extension_check(A: DiscreteConnection, chi="linear", rng: np.random.Generator | None = None,
                                h: float = 1e-4) -> dict:
    """Residuals of the equivariant-extension identities at A.

    * ``boundary``: i(xi_A) alpha(zeta) + i(zeta_A) alpha(xi) minus the boundary
      pairing xi(1).zeta(1) - xi(0).zeta(0); exact.
    * ``twisted_alpha``: alpha(zeta) - i(D zeta) varpi for zeta vanishing at the
      ends; exact.
    * ``cocycle``: d alpha(xi) + i(D xi) eta_lat on two tangent vectors, by
      central differences; O(h^2). The lattice alpha is not closed: its
      derivative is the contraction of the link 3-form, which is O(delta^2).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    G, N, d = A.group, A.N, A.d
    B = G.algebra.metric
    K = _pairing_block(G, N)
    xi = rng.standard_normal((N + 1, d))
    zeta = rng.standard_normal((N + 1, d))

    def alpha(AA, f, a):
        return float(_average(AA, f).ravel() @ K @ np.ravel(a))

    Dxi, Dzeta = covariant_derivative(A, xi), covariant_derivative(A, zeta)
    boundary = alpha(A, zeta, Dxi) + alpha(A, xi, Dzeta) - (xi[-1] @ B @ zeta[-1] - xi[0] @ B @ zeta[0])

    z0 = zeta.copy()
    z0[0] = z0[-1] = 0.0
    W = varpi_matrix(A, chi)
    a = rng.standard_normal(N * d)
    twisted = alpha(A, z0, a) - covariant_derivative(A, z0).ravel() @ W @ a

    u = A.transitions
    move = _move(G, N)
    a1, a2 = rng.standard_normal(N * d), rng.standard_normal(N * d)

    def D(x, y):
        def at(v):
            return alpha(DiscreteConnection(G, v, check=False), xi, y)
        return (at(move(u, x, h)) - at(move(u, x, -h))) / (2 * h)

    br = (-np.einsum("kij,ni,nj->nk", G.algebra.structure, a1.reshape(N, d), a2.reshape(N, d)) / N).ravel()
    dalpha = D(a1, a2) - D(a2, a1) - alpha(A, xi, br)
    contraction = lattice_three_form(G, N, Dxi.ravel(), a1, a2)
    return {
        "boundary": abs(float(boundary)),
        "twisted_alpha": abs(float(twisted)),
        "cocycle": abs(float(dalpha + contraction)),
        "dalpha": abs(float(dalpha)),
    }


# -- convergence helpers

def estimate_order(ns: Sequence[int], errors: Sequence[float], floor: float = 1e-13) -> float:
    """Least-squares slope of -log2(error) against log2(N).

    Returns ``inf`` when every error is already below ``floor``.
    """
    ns = np.asarray(ns, dtype=float)
    e = np.asarray(errors, dtype=float)
    if np.all(e < floor):
        return float("inf")
    keep = e >= floor
    if keep.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log2(ns[keep]), np.log2(e[keep]), 1)[0]
    return float(-slope)


def richardson_limit(values: Sequence[float], order: float = 1.0) -> float:
    """Extrapolate the last two values of a sequence computed at N, 2N."""
    v1, v2 = float(values[-2]), float(values[-1])
    f = 2.0 ** order
    return (f * v2 - v1) / (f - 1.0)
