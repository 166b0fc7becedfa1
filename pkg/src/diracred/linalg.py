"""Pseudo-metric linear algebra: subspaces, Lagrangian relations, reduction.

Vectors are plain numpy arrays. A :class:`MetrizedSpace` carries a symmetric
nondegenerate matrix of any signature; a :class:`Subspace` is stored through
a Euclidean-orthonormal basis so that two subspaces can be compared with
principal angles regardless of how they were produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

__all__ = [
    "TolerancePolicy",
    "DEFAULT_TOL",
    "MetrizedSpace",
    "Subspace",
    "Classification",
    "LinearRelation",
    "Reduction",
    "orthogonal_complement",
    "classify",
    "isotropic_complement",
    "reduce_space",
    "reduce_subspace",
    "compose_relations",
    "relation_parts",
    "dirac_morphism_class",
    "backward_image",
    "random_split_space",
    "random_lagrangian",
    "random_lagrangian_complement",
    "random_isotropic",
    "random_coisotropic",
]


@dataclass(frozen=True)
class TolerancePolicy:
    """Numerical thresholds shared by every rank and equality decision."""

    rank_tol: float = 1e-9
    eq_tol: float = 1e-8
    fd_step: float = 1e-5

    def __post_init__(self):
        if min(self.rank_tol, self.eq_tol, self.fd_step) <= 0:
            raise ValueError("tolerances must be positive")
        if self.rank_tol >= self.eq_tol:
            raise ValueError("rank_tol must be smaller than eq_tol")


DEFAULT_TOL = TolerancePolicy()


def _orth(mat: np.ndarray, rank_tol: float) -> tuple[np.ndarray, float]:
    """Orthonormal basis of the column span and the rank margin.

    The margin is the ratio of the largest discarded to the smallest kept
    singular value (0 when nothing was discarded).
    """
    n = mat.shape[0]
    if mat.size == 0:
        return np.zeros((n, 0)), 0.0
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, 0)), 0.0
    keep = s > rank_tol * s[0]
    k = int(keep.sum())
    margin = float(s[k] / s[k - 1]) if k < s.size else 0.0
    return u[:, :k], margin


def _null(mat: np.ndarray, rank_tol: float) -> np.ndarray:
    """Orthonormal basis of the null space with a relative cutoff."""
    ncols = mat.shape[1]
    if mat.shape[0] == 0 or not np.any(mat):
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int((s > rank_tol * s[0]).sum())
    return vt[rank:].T.copy()


class MetrizedSpace:
    """Finite-dimensional real vector space with a nondegenerate symmetric form."""

    def __init__(self, metric, tol: TolerancePolicy = DEFAULT_TOL):
        metric = np.atleast_2d(np.asarray(metric, dtype=float))
        if metric.size == 0:
            metric = np.zeros((0, 0))
        if metric.shape[0] != metric.shape[1]:
            raise ValueError("metric must be square")
        scale = max(np.abs(metric).max(initial=0.0), 1.0)
        if np.abs(metric - metric.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("metric is not symmetric")
        metric = 0.5 * (metric + metric.T)
        if metric.shape[0]:
            s = np.linalg.svd(metric, compute_uv=False)
            if s[-1] < tol.rank_tol * s[0]:
                raise ValueError(
                    f"metric is degenerate (singular value ratio {s[-1] / s[0]:.3e})"
                )
        self.metric = metric
        self.metric.setflags(write=False)
        self.tol = tol

    @property
    def dim(self) -> int:
        return self.metric.shape[0]

    @property
    def signature(self) -> tuple[int, int]:
        if self.dim == 0:
            return (0, 0)
        ev = np.linalg.eigvalsh(self.metric)
        return int((ev > 0).sum()), int((ev < 0).sum())

    def pair(self, x, y) -> np.ndarray:
        return np.asarray(x).T @ self.metric @ np.asarray(y)

    def negated(self) -> "MetrizedSpace":
        return MetrizedSpace(-self.metric, self.tol)

    def __mul__(self, other: "MetrizedSpace") -> "MetrizedSpace":
        return MetrizedSpace(sla.block_diag(self.metric, other.metric), self.tol)

    def whole(self) -> "Subspace":
        return Subspace(self, np.eye(self.dim))

    def zero(self) -> "Subspace":
        return Subspace(self, np.zeros((self.dim, 0)))

    def same_as(self, other: "MetrizedSpace") -> bool:
        return self.dim == other.dim and np.allclose(
            self.metric, other.metric, atol=1e-12 * max(1.0, np.abs(self.metric).max(initial=0))
        )

    def __repr__(self):
        return f"MetrizedSpace(dim={self.dim}, signature={self.signature})"


class Subspace:
    """Linear subspace of a metrized space, stored by an orthonormal basis."""

    def __init__(self, ambient: MetrizedSpace, vectors, orthonormal: bool = False):
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.size == 0:
            vectors = np.zeros((ambient.dim, 0))
        if vectors.shape[0] != ambient.dim:
            raise ValueError("basis rows must match the ambient dimension")
        self.ambient = ambient
        if orthonormal:
            self.basis, self.margin = vectors, 0.0
        else:
            self.basis, self.margin = _orth(vectors, ambient.tol.rank_tol)
        self.basis.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def tol(self) -> TolerancePolicy:
        return self.ambient.tol

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def distance(self, other: "Subspace") -> float:
        """Sine of the largest principal angle; 1.0 when dimensions differ."""
        if self.dim != other.dim:
            return 1.0
        if self.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.projector() - other.projector(), 2))

    def equals(self, other: "Subspace", tol: float | None = None) -> bool:
        tol = self.tol.eq_tol if tol is None else tol
        return self.distance(other) < tol

    def contains(self, vectors, tol: float | None = None) -> bool:
        return self.containment_residual(vectors) < (self.tol.eq_tol if tol is None else tol)

    def containment_residual(self, vectors) -> float:
        """Relative distance of the given vectors from the subspace."""
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.size == 0:
            return 0.0
        norm = np.linalg.norm(vectors, 2)
        if norm == 0:
            return 0.0
        rest = vectors - self.basis @ (self.basis.T @ vectors)
        return float(np.linalg.norm(rest, 2) / norm)

    def __add__(self, other: "Subspace") -> "Subspace":
        return Subspace(self.ambient, np.hstack([self.basis, other.basis]))

    def __and__(self, other: "Subspace") -> "Subspace":
        """Intersection, computed as the null space of the stacked complements."""
        n = self.ambient.dim
        stacked = np.vstack([np.eye(n) - self.projector(), np.eye(n) - other.projector()])
        return Subspace(self.ambient, _null(stacked, self.tol.rank_tol), orthonormal=True)

    def euclidean_complement(self) -> "Subspace":
        return Subspace(self.ambient, _null(self.basis.T, self.tol.rank_tol), orthonormal=True)

    def metric_block(self) -> np.ndarray:
        return self.basis.T @ self.ambient.metric @ self.basis

    def isotropy_residual(self) -> float:
        scale = max(np.abs(self.ambient.metric).max(initial=0.0), 1e-300)
        return float(np.abs(self.metric_block()).max(initial=0.0) / scale)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient.dim})"


def orthogonal_complement(F: Subspace) -> Subspace:
    """Metric orthogonal F^perp = {v : <v, f> = 0 for all f in F}."""
    V = F.ambient
    if F.dim == 0:
        return V.whole()
    return Subspace(V, _null(F.basis.T @ V.metric, V.tol.rank_tol), orthonormal=True)


@dataclass(frozen=True)
class Classification:
    kind: str
    isotropy_residual: float
    coisotropy_residual: float
    margin: float

    def __eq__(self, other):
        if isinstance(other, str):
            return self.kind == other
        return NotImplemented

    def __hash__(self):
        return hash(self.kind)

    def __str__(self):
        return self.kind


def classify(F: Subspace) -> Classification:
    """Classify F as isotropic, coisotropic, lagrangian, symplectic-complementable or none."""
    tol = F.tol.eq_tol
    Fp = orthogonal_complement(F)
    iso_res = Fp.containment_residual(F.basis)
    coiso_res = F.containment_residual(Fp.basis)
    iso = iso_res < tol
    coiso = coiso_res < tol
    if iso and coiso:
        kind = "lagrangian"
    elif iso:
        kind = "isotropic"
    elif coiso:
        kind = "coisotropic"
    elif (F & Fp).dim == 0:
        kind = "symplectic-complementable"
    else:
        kind = "none"
    return Classification(kind, iso_res, coiso_res, max(F.margin, Fp.margin))


def _require_coisotropic(C: Subspace) -> Subspace:
    Cp = orthogonal_complement(C)
    if not C.contains(Cp.basis):
        raise ValueError(
            f"subspace is not coisotropic (residual {C.containment_residual(Cp.basis):.3e})"
        )
    return Cp


def isotropic_complement(C: Subspace) -> Subspace:
    """Isotropic complement F' of a coisotropic C.

    Start from the Euclidean complement F, let A be the projection of F to
    C^perp along F^perp, and return F' = {v - A(v)/2 : v in F}.
    """
    Cp = _require_coisotropic(C)
    F = C.euclidean_complement()
    if F.dim == 0:
        return C.ambient.zero()
    Fp = orthogonal_complement(F)
    # V = C^perp (+) F^perp; split each v in F accordingly and keep the C^perp part
    coeffs = np.linalg.lstsq(np.hstack([Cp.basis, Fp.basis]), F.basis, rcond=None)[0]
    A = Cp.basis @ coeffs[: Cp.dim]
    return Subspace(C.ambient, F.basis - 0.5 * A)


@dataclass(frozen=True)
class Reduction:
    """Coisotropic reduction V_C = C / C^perp realised on C cap (F')^perp.

    ``projection`` sends ambient vectors lying in C to coordinates of V_C; it
    annihilates C^perp. ``section`` is the ambient basis of the realising
    subspace, so ``section @ projection`` restricted to C is the projection
    along C^perp.
    """

    C: Subspace
    Cperp: Subspace
    space: MetrizedSpace
    section: np.ndarray
    projection: np.ndarray = field(repr=False)

    def project(self, vectors) -> np.ndarray:
        return self.projection @ np.asarray(vectors, dtype=float)


def reduce_space(C: Subspace) -> Reduction:
    """Quotient C / C^perp with its induced nondegenerate metric."""
    Cp = _require_coisotropic(C)
    Fprime = isotropic_complement(C)
    W = C & orthogonal_complement(Fprime)
    V = C.ambient
    if W.dim != C.dim - Cp.dim:
        raise RuntimeError(
            f"reduction dimension mismatch: {W.dim} != {C.dim} - {Cp.dim}"
        )
    space = MetrizedSpace(W.metric_block(), V.tol)
    frame = np.hstack([Cp.basis, W.basis])
    projection = np.linalg.pinv(frame)[Cp.dim:]
    return Reduction(C, Cp, space, W.basis, projection)


def reduce_subspace(
    L: Subspace, C: Subspace, reduction: Reduction | None = None, check: bool = True
) -> tuple[Subspace, bool]:
    """Reduce L to L_C = (L cap C) / (L cap C^perp).

    Returns the reduced subspace of V_C and whether L + C = V.
    """
    if check:
        kind = classify(L)
        if kind != "lagrangian":
            raise ValueError(f"L must be Lagrangian, got {kind}")
    red = reduce_space(C) if reduction is None else reduction
    LC = L & C
    image = Subspace(red.space, red.project(LC.basis))
    transverse = (L + C).dim == C.ambient.dim
    return image, transverse


class LinearRelation:
    """Linear relation V1 --> V2 stored by its graph in V2 x bar(V1).

    Graph vectors are stacked as (v2, v1).
    """

    def __init__(self, source: MetrizedSpace, target: MetrizedSpace, graph):
        self.source = source
        self.target = target
        self.ambient = target * source.negated()
        if isinstance(graph, Subspace):
            graph = graph.basis
        self.graph = Subspace(self.ambient, graph)

    @classmethod
    def from_map(cls, source: MetrizedSpace, target: MetrizedSpace, T) -> "LinearRelation":
        T = np.asarray(T, dtype=float).reshape(target.dim, source.dim)
        return cls(source, target, np.vstack([T, np.eye(source.dim)]))

    @classmethod
    def identity(cls, V: MetrizedSpace) -> "LinearRelation":
        return cls.from_map(V, V, np.eye(V.dim))

    @classmethod
    def from_subspace(cls, E: Subspace) -> "LinearRelation":
        """E viewed as a relation 0 --> V."""
        return cls(MetrizedSpace(np.zeros((0, 0))), E.ambient, E.basis)

    @classmethod
    def to_zero(cls, F: Subspace) -> "LinearRelation":
        """F viewed as a relation V --> 0."""
        return cls(F.ambient, MetrizedSpace(np.zeros((0, 0))), F.basis)

    def _split(self, vectors):
        n2 = self.target.dim
        return vectors[:n2], vectors[n2:]

    def transpose(self) -> "LinearRelation":
        v2, v1 = self._split(self.graph.basis)
        return LinearRelation(self.target, self.source, np.vstack([v1, v2]))

    def forward(self, E: Subspace) -> Subspace:
        """Image R(E) as a subspace of the target."""
        return compose_relations(self, LinearRelation.from_subspace(E))[0].as_target_subspace()

    def as_target_subspace(self) -> Subspace:
        return Subspace(self.target, self.graph.basis[: self.target.dim])

    def as_source_subspace(self) -> Subspace:
        return Subspace(self.source, self.graph.basis[self.target.dim:])

    def is_lagrangian(self) -> bool:
        return classify(self.graph) == "lagrangian"

    def equals(self, other: "LinearRelation", tol: float | None = None) -> bool:
        return self.graph.equals(other.graph, tol)

    def __repr__(self):
        return f"LinearRelation({self.source.dim} --> {self.target.dim}, graph dim {self.graph.dim})"


def relation_parts(R: LinearRelation) -> tuple[Subspace, Subspace, Subspace, Subspace]:
    """Return (ker, ran, ker*, ran*) of a relation."""
    n2 = R.target.dim
    B = R.graph.basis
    v2, v1 = B[:n2], B[n2:]
    tol = R.ambient.tol.rank_tol
    ker = Subspace(R.source, v1 @ _null(v2, tol))
    kerstar = Subspace(R.target, v2 @ _null(v1, tol))
    return ker, Subspace(R.target, v2), kerstar, Subspace(R.source, v1)


def _transversality(R2: LinearRelation, R1: LinearRelation) -> str:
    _, ran1, kerstar1, _ = relation_parts(R1)
    ker2, _, _, ranstar2 = relation_parts(R2)
    if (ran1 + ranstar2).dim == R1.target.dim:
        return "transverse"
    if (ker2 & kerstar1).dim == 0:
        return "weak"
    return "neither"


def compose_relations(R2: LinearRelation, R1: LinearRelation) -> tuple[LinearRelation, str]:
    """Composition R2 o R1 with its transversality flag.

    The graph is the reduction of gr(R2) x gr(R1) by the coisotropic
    V3 x diag(V2) x bar(V1); the quotient map is (v3, v2, v2, v1) -> (v3, v1).
    """
    if not R1.target.same_as(R2.source):
        raise ValueError("target of R1 does not match source of R2")
    n3, n2, n1 = R2.target.dim, R1.target.dim, R1.source.dim
    big = R2.ambient * R1.ambient
    G2, G1 = R2.graph.basis, R1.graph.basis
    prod = Subspace(big, sla.block_diag(G2, G1), orthonormal=True)
    dim = n3 + 2 * n2 + n1
    cvecs = np.zeros((dim, n3 + n2 + n1))
    cvecs[:n3, :n3] = np.eye(n3)
    cvecs[n3:n3 + n2, n3:n3 + n2] = np.eye(n2)
    cvecs[n3 + n2:n3 + 2 * n2, n3:n3 + n2] = np.eye(n2)
    cvecs[n3 + 2 * n2:, n3 + n2:] = np.eye(n1)
    C = Subspace(big, cvecs)
    inter = prod & C
    keep = np.r_[np.arange(n3), np.arange(n3 + 2 * n2, dim)]
    graph = inter.basis[keep]
    return LinearRelation(R1.source, R2.target, graph), _transversality(R2, R1)


def backward_image(F: Subspace, R: LinearRelation) -> Subspace:
    """F o R for F viewed as a relation target --> 0; a subspace of the source."""
    comp, _ = compose_relations(LinearRelation.to_zero(F), R)
    return comp.as_source_subspace()


def dirac_morphism_class(R: LinearRelation, E1: Subspace, E2: Subspace) -> str:
    """Classify R : (V1, E1) --> (V2, E2) as 'none', 'weak' or 'strong'."""
    for name, E in (("E1", E1), ("E2", E2)):
        if classify(E) != "lagrangian":
            raise ValueError(f"{name} must be Lagrangian")
    ker, _, _, ranstar = relation_parts(R)
    if (E1 & ker).dim != 0:
        return "none"
    if not R.forward(E1).equals(E2):
        return "none"
    if (E1 + ranstar).dim == R.source.dim:
        return "strong"
    return "weak"


# -- random generators used by property tests and the verification suite --


def random_split_space(n: int, rng: np.random.Generator, tol: TolerancePolicy = DEFAULT_TOL
                       ) -> tuple[MetrizedSpace, np.ndarray]:
    """Random metric of signature (n, n) and a frame S with S^T M S = diag(I, -I).

    S = Q1 diag(s) Q2 with Haar orthogonal factors and singular values in
    [1/2, 2], so the metric has condition number at most 16.
    """
    Q1, _ = np.linalg.qr(rng.standard_normal((2 * n, 2 * n)))
    Q2, _ = np.linalg.qr(rng.standard_normal((2 * n, 2 * n)))
    S = Q1 @ np.diag(2.0 ** rng.uniform(-1.0, 1.0, 2 * n)) @ Q2
    J = np.diag(np.r_[np.ones(n), -np.ones(n)])
    Sinv = np.linalg.inv(S)
    M = Sinv.T @ J @ Sinv
    return MetrizedSpace(0.5 * (M + M.T), tol), S


def _normal_frame(V: MetrizedSpace) -> tuple[np.ndarray, int, int]:
    """Frame S with S^T M S = diag(I_p, -I_q)."""
    ev, Q = np.linalg.eigh(V.metric)
    order = np.argsort(-ev)
    ev, Q = ev[order], Q[:, order]
    S = Q / np.sqrt(np.abs(ev))
    return S, int((ev > 0).sum()), int((ev < 0).sum())


def random_lagrangian(V: MetrizedSpace, rng: np.random.Generator) -> Subspace:
    """Random Lagrangian: graph of an orthogonal map between the two signs."""
    S, p, q = _normal_frame(V)
    if p != q:
        raise ValueError("Lagrangian subspaces need split signature")
    O, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return Subspace(V, S @ np.vstack([np.eye(p), O]))


def random_lagrangian_complement(L: Subspace, rng: np.random.Generator, tries: int = 20,
                                 margin: float = 1e-3) -> Subspace:
    """Random Lagrangian transverse to ``L``, with a transversality margin.

    Lagrangians split into two families (the components of O(p)); a pair from
    the wrong family always meets, so both families are tried on each draw.
    The margin is the smallest singular value of [L | F] in orthonormal bases;
    a draw is accepted once it exceeds ``margin``, otherwise the best one seen
    is returned. A rank test alone accepts near-coincident pairs when L
    itself is only known to a few digits.
    """
    V = L.ambient
    S, p, _ = _normal_frame(V)
    best, best_margin = None, -1.0
    for _ in range(tries):
        O, _ = np.linalg.qr(rng.standard_normal((p, p)))
        for flip in (False, True):
            if flip:
                O = O.copy()
                O[:, 0] *= -1
            F = Subspace(V, S @ np.vstack([np.eye(p), O]))
            m = float(np.linalg.svd(np.hstack([L.basis, F.basis]), compute_uv=False)[-1]) if V.dim else 1.0
            if m > best_margin:
                best, best_margin = F, m
            if m > margin:
                return F
    if best is None or (best & L).dim:
        raise ValueError("no transverse Lagrangian found")
    return best


def random_isotropic(V: MetrizedSpace, k: int, rng: np.random.Generator) -> Subspace:
    L = random_lagrangian(V, rng)
    return Subspace(V, L.basis @ rng.standard_normal((L.dim, k)))


def random_coisotropic(V: MetrizedSpace, k: int, rng: np.random.Generator) -> Subspace:
    """Random coisotropic subspace with isotropic orthogonal of dimension k."""
    return orthogonal_complement(random_isotropic(V, k, rng))
