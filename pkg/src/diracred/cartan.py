"""The Cartan-Courant algebroid G x (bar(g) + g) and its exact model TG + T*G.

Conventions used throughout:

* An element of the fiber of ``A = G x d`` is a vector ``Y = (Y0, Y1)`` in the
  double.
* Tangent vectors at ``g`` are given in left trivialisation ``u = g^{-1} v``;
  covectors by their values on the left-invariant frame, ``c_k = mu(g e_k)``.
  The exact model ``TG + T*G`` therefore has fiber coordinates ``(u, c)`` and
  metric ``<(u, c), (u', c')> = c . u' + c' . u``.
* ``rho`` is the isometry ``A -> TG + T*G``: ``Y -> a(Y) + alpha(Y)``.

The Cartan 3-form is defined by the bracket identity
``<j(v1), [[j(v2), j(v3)]]> = iota(v1) iota(v2) iota(v3) eta`` with
``iota(v1) iota(v2) iota(v3) eta = eta(v3, v2, v1)``. Evaluated in the
left-invariant frame it comes out as ``eta(u1, u2, u3) = ETA_CONSTANT *
<u1, [u2, u3]>``; with ``[theta, theta](u, v) = 2 [u, v]`` and the usual
wedge normalisation, ``theta . [theta, theta](u1, u2, u3) = 6 <u1, [u2, u3]>``,
so ``ETA_CONSTANT = 1/2`` is the statement ``eta = theta . [theta, theta] / 12``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .linalg import LinearRelation, MetrizedSpace, Subspace
from .liegroup import MatrixGroup

__all__ = [
    "ETA_CONSTANT",
    "anchor",
    "anchor_left",
    "alpha",
    "alpha_coords",
    "splitting",
    "rho_matrix",
    "tangent_cotangent_space",
    "cartan_three_form",
    "three_form_from_bracket",
    "fit_eta_constant",
    "action_bracket",
    "courant_bracket",
    "frame_courant_bracket",
    "dirac_fiber",
    "dirac_fiber_exact",
    "leaf_two_form",
    "mult_relation",
    "inv_relation",
    "fusion_two_form",
    "fusion_matrix",
    "exact_morphism",
    "is_exact",
    "anchor_compatibility_residual",
    "ProductManifold",
    "exterior_derivative_2form",
]

ETA_CONSTANT = 0.5

Section = Callable[[np.ndarray], np.ndarray]


# -- pointwise structure maps

def anchor(G: MatrixGroup, g, Y) -> np.ndarray:
    """Tangent matrix g X1 - X0 g of the action of (X0, X1) at g."""
    Y0, Y1 = G.double.split(Y)
    return g @ G.matrix(Y1) - G.matrix(Y0) @ g


def anchor_left(G: MatrixGroup, g) -> np.ndarray:
    """Matrix of the anchor in left trivialisation: Y -> Y1 - Ad_{g^-1} Y0."""
    return np.hstack([-G.Ad(np.linalg.inv(g)), np.eye(G.dim)])


def alpha(G: MatrixGroup, g, Y, v) -> float:
    """alpha(Y)(v) = (<g^{-1} v, Y1> + <v g^{-1}, Y0>) / 2 for a tangent matrix v."""
    Y0, Y1 = G.double.split(Y)
    left, right = G.maurer_cartan(g, v)
    return 0.5 * (G.inner(left, Y1) + G.inner(right, Y0))


def alpha_coords(G: MatrixGroup, g) -> np.ndarray:
    """Matrix sending Y to the frame values c_k = alpha(Y)(g e_k)."""
    B = G.algebra.metric
    return 0.5 * B @ np.hstack([G.Ad(np.linalg.inv(g)), np.eye(G.dim)])


def splitting(G: MatrixGroup, g, v) -> np.ndarray:
    """j(v) = (-v g^{-1} / 2, g^{-1} v / 2) for a tangent matrix v."""
    left, right = G.maurer_cartan(g, v)
    return G.double.join(-0.5 * right, 0.5 * left)


def splitting_left(G: MatrixGroup, g) -> np.ndarray:
    """j in left trivialisation: u -> (-Ad_g u / 2, u / 2)."""
    return 0.5 * np.vstack([-G.Ad(g), np.eye(G.dim)])


def rho_matrix(G: MatrixGroup, g) -> np.ndarray:
    """The isometry Y -> (u, c) from the double to the exact fiber at g."""
    return np.vstack([anchor_left(G, g), alpha_coords(G, g)])


def tangent_cotangent_space(n: int) -> MetrizedSpace:
    """Fiber TQ + T*Q in (u, c) coordinates with the pairing metric."""
    Z, I = np.zeros((n, n)), np.eye(n)
    return MetrizedSpace(np.block([[Z, I], [I, Z]]))


def cartan_three_form(G: MatrixGroup, g, v1, v2, v3) -> float:
    """Cartan 3-form on tangent matrices at g."""
    u1, u2, u3 = (G.maurer_cartan(g, v)[0] for v in (v1, v2, v3))
    return ETA_CONSTANT * G.inner(u1, G.bracket(u2, u3))


def _eta_left(G: MatrixGroup, u1, u2, u3) -> float:
    return ETA_CONSTANT * G.inner(u1, G.bracket(u2, u3))


# -- brackets of sections

def _deriv(G: MatrixGroup, f: Section, g, u, h: float):
    return (np.asarray(f(g @ G.exp(h * u))) - np.asarray(f(g @ G.exp(-h * u)))) / (2 * h)


def action_bracket(G: MatrixGroup, s1: Section, s2: Section, g, h: float = 1e-4) -> np.ndarray:
    """Courant bracket of two sections of G x d at g.

    [[s1, s2]] = [s1, s2]_d + L_{a(s1)} s2 - L_{a(s2)} s1 + a*<d s1, s2>,
    derivatives by central differences along left-invariant directions.
    """
    D = G.double
    A = anchor_left(G, g)
    y1, y2 = np.asarray(s1(g)), np.asarray(s2(g))
    u1, u2 = A @ y1, A @ y2
    out = D.bracket(y1, y2) + _deriv(G, s2, g, u1, h) - _deriv(G, s1, g, u2, h)
    # a* of the 1-form v -> <L_v s1, s2>
    c = np.array([D.inner(_deriv(G, s1, g, e, h), y2) for e in np.eye(G.dim)])
    out = out + np.linalg.solve(D.algebra.metric, A.T @ c)
    return out


def frame_courant_bracket(s1: Callable, s2: Callable, point, move: Callable, frame_bracket: Callable,
                          dim: int, eta: Callable | None = None, h: float = 1e-4) -> np.ndarray:
    """Twisted Courant bracket of sections of TQ + T*Q written in a global frame.

    Sections return ``(v, c)``: frame coefficients of the vector part and values
    of the covector part on the frame. ``move(point, x, t)`` flows along the
    constant-coefficient field ``x`` and ``frame_bracket(x, y)`` is the Lie
    bracket of two such fields. ``eta(x, y, z)`` evaluates the 3-form on frame
    coefficients. The bracket is

        [v1, v2] + L_{v1} m2 - i_{v2} d m1 + eta(v2, v1, .).
    """
    E = np.eye(dim)

    def D(f, x):
        return (np.asarray(f(move(point, x, h))) - np.asarray(f(move(point, x, -h)))) / (2 * h)

    x1, x2 = np.asarray(s1(point)), np.asarray(s2(point))
    u1, c1 = x1[:dim], x1[dim:]
    u2, c2 = x2[:dim], x2[dim:]
    U1 = lambda p: np.asarray(s1(p))[:dim]
    U2 = lambda p: np.asarray(s2(p))[:dim]
    C1 = lambda p: np.asarray(s1(p))[dim:]
    C2 = lambda p: np.asarray(s2(p))[dim:]
    vec = D(U2, u1) - D(U1, u2) + frame_bracket(u1, u2)
    Lv1c2 = D(C2, u1)
    Lv2c1 = D(C1, u2)
    pair12 = lambda p: np.asarray(s1(p))[dim:] @ np.asarray(s2(p))[:dim]
    cov = np.empty(dim)
    for k in range(dim):
        # [v, e_k] = -D_{e_k} v + [u, e_k]_frame
        br1 = -D(U1, E[k]) + frame_bracket(u1, E[k])
        br2 = -D(U2, E[k]) + frame_bracket(u2, E[k])
        lie = Lv1c2[k] - c2 @ br1
        dmu = Lv2c1[k] - D(pair12, E[k]) - c1 @ br2
        cov[k] = lie - dmu
        if eta is not None:
            cov[k] += eta(u2, u1, E[k])
    return np.concatenate([vec, cov])


def courant_bracket(G: MatrixGroup, s1: Section, s2: Section, g, h: float = 1e-4,
                    eta: bool = True) -> np.ndarray:
    """Twisted Courant bracket on TG + T*G for sections returning (u, c).

    [v1 + m1, v2 + m2] = [v1, v2] + L_{v1} m2 - i_{v2} d m1 + i_{v1} i_{v2} eta,
    with i_{v1} i_{v2} eta = eta(v2, v1, .), in the left-invariant frame.
    """
    return frame_courant_bracket(
        s1, s2, g,
        move=lambda p, x, t: p @ G.exp(t * x),
        frame_bracket=G.bracket,
        dim=G.dim,
        eta=(lambda x, y, z: _eta_left(G, x, y, z)) if eta else None,
        h=h,
    )


def three_form_from_bracket(G: MatrixGroup, g, fields: Sequence[Callable], h: float = 1e-4) -> float:
    """Bracket oracle for eta: eta(v1, v2, v3) = -<j(v1), [[j(v2), j(v3)]]>.

    ``fields`` are three vector fields p -> left-trivialised tangent at p; the
    expression is tensorial, so any smooth extension of the vectors works.
    """
    J = lambda p: splitting_left(G, p)
    secs = [(lambda f: (lambda p: J(p) @ f(p)))(f) for f in fields]
    br = action_bracket(G, secs[1], secs[2], g, h)
    return -G.double.inner(secs[0](g), br)


def fit_eta_constant(G: MatrixGroup, g, rng: np.random.Generator, h: float = 1e-4,
                     samples: int = 8) -> float:
    """Least-squares constant c with bracket-oracle eta = c <u1, [u2, u3]>."""
    num, den = 0.0, 0.0
    for _ in range(samples):
        us = [G.algebra.random(rng) for _ in range(3)]
        fields = [(lambda u: (lambda p: u))(u) for u in us]
        val = three_form_from_bracket(G, g, fields, h)
        ref = G.inner(us[0], G.bracket(us[1], us[2]))
        num += val * ref
        den += ref * ref
    return num / den if den else float("nan")


# -- Dirac structures and leaves

def dirac_fiber(G: MatrixGroup, s: Subspace, g=None) -> Subspace:
    """Fiber of E^(s) = G x s; the same subspace of the double at every point."""
    return Subspace(G.double.space, s.basis)


def dirac_fiber_exact(G: MatrixGroup, s: Subspace, g) -> Subspace:
    """E^(s) at g transported to the exact model by rho."""
    return Subspace(tangent_cotangent_space(G.dim), rho_matrix(G, g) @ s.basis)


def leaf_two_form(G: MatrixGroup, s: Subspace, g, v1, v2, tol: float = 1e-9) -> float:
    """omega(v1, v2) = <alpha_1, v2> where v1 + alpha_1 lies in E^(s) at g.

    v1, v2 are tangent matrices at g in the anchor image of s.
    """
    A = anchor_left(G, g) @ s.basis
    targets = []
    for v in (v1, v2):
        u = G.maurer_cartan(g, v)[0]
        coef, *_ = np.linalg.lstsq(A, u, rcond=None)
        res = np.linalg.norm(A @ coef - u) / max(1.0, np.linalg.norm(u))
        if res > tol:
            raise ValueError(f"tangent vector is not in the anchor image of s (residual {res:.3e})")
        targets.append((coef, u))
    (y1, _), (_, u2) = targets
    c = alpha_coords(G, g) @ (s.basis @ y1)
    return float(c @ u2)


# -- multiplicative structure

def mult_relation(G: MatrixGroup, g=None, h=None) -> LinearRelation:
    """Groupoid multiplication of A over (gh; g, h): ((Y0,Y1),(Y1,Y1')) -> (Y0,Y1').

    Source is A_g x A_h, target A_gh; graph vectors are (target, source).
    """
    D = G.double
    d = G.dim
    I, Z = np.eye(d), np.zeros((d, d))
    # parameters (Y0, Y1, Y1')
    target = np.block([[I, Z, Z], [Z, Z, I]])
    first = np.block([[I, Z, Z], [Z, I, Z]])
    second = np.block([[Z, I, Z], [Z, Z, I]])
    source_space = D.space * D.space
    return LinearRelation(source_space, D.space, np.vstack([target, first, second]))


def inv_relation(G: MatrixGroup, g=None) -> LinearRelation:
    """Inversion (g, (X0, X1)) -> (g^{-1}, (X1, X0)) as a relation A --> bar(A)."""
    D = G.double
    d = G.dim
    swap = np.block([[np.zeros((d, d)), np.eye(d)], [np.eye(d), np.zeros((d, d))]])
    return LinearRelation.from_map(D.space, D.space.negated(), swap)


def fusion_two_form(G: MatrixGroup, g, h, vw1, vw2) -> float:
    """-<g^{-1} v1, w2 h^{-1}>/2 + <g^{-1} v2, w1 h^{-1}>/2 on tangents at (g, h)."""
    (v1, w1), (v2, w2) = vw1, vw2
    a1 = G.maurer_cartan(g, v1)[0]
    a2 = G.maurer_cartan(g, v2)[0]
    b1 = G.maurer_cartan(h, w1)[1]
    b2 = G.maurer_cartan(h, w2)[1]
    return -0.5 * G.inner(a1, b2) + 0.5 * G.inner(a2, b1)


def fusion_matrix(G: MatrixGroup, g, h) -> np.ndarray:
    """Matrix W of the fusion form in left-trivialised coordinates (u, u') of G x G."""
    d = G.dim
    B = G.algebra.metric
    AdH = G.Ad(h)
    W = np.zeros((2 * d, 2 * d))
    W[:d, d:] = -0.5 * B @ AdH
    W[d:, :d] = -W[:d, d:].T
    return W


def exact_morphism(T, W) -> LinearRelation:
    """Fiber of T Phi_omega: (v1, c1) ~ (v2, c2) iff v2 = T v1 and c1 = T^T c2 + i(v1) omega.

    ``T`` is the tangent map and ``W`` the matrix of omega, omega(x, y) = x^T W y,
    both in the coordinates used for the two exact fibers.
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n2, n1 = T.shape
    V1, V2 = tangent_cotangent_space(n1), tangent_cotangent_space(n2)
    # parameters (v1, c2)
    top = np.block([[T, np.zeros((n2, n2))], [np.zeros((n2, n1)), np.eye(n2)]])
    bottom = np.block([[np.eye(n1), np.zeros((n1, n2))], [W.T, T.T]])
    return LinearRelation(V1, V2, np.vstack([top, bottom]))


def is_exact(R: LinearRelation) -> bool:
    """Exactness test: ran*(R) + cotangent fiber = source."""
    from .linalg import relation_parts

    n1 = R.source.dim // 2
    cot = Subspace(R.source, np.vstack([np.zeros((n1, n1)), np.eye(n1)]))
    return (relation_parts(R)[3] + cot).dim == R.source.dim


def anchor_compatibility_residual(R: LinearRelation, T) -> float:
    """Residual of a2* o T*Phi = R o a1*: (0, c2) ~ (0, T^T c2) for all c2."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    n2, n1 = T.shape
    vecs = np.vstack([np.zeros((n2, n2)), np.eye(n2), np.zeros((n1, n2)), T.T])
    return R.graph.containment_residual(vecs)


# -- exterior derivatives on products of matrix groups

class ProductManifold:
    """Product of matrix groups with left-trivialised tangent coordinates."""

    def __init__(self, groups: Sequence[MatrixGroup]):
        self.groups = list(groups)
        self.dims = [G.dim for G in self.groups]
        self.offsets = np.cumsum([0] + self.dims)

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    def parts(self, u):
        return [u[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.groups))]

    def move(self, point, u, t: float):
        return tuple(p @ G.exp(t * x) for p, G, x in zip(point, self.groups, self.parts(u)))

    def bracket(self, u, v):
        return np.concatenate([G.bracket(a, b) for G, a, b in zip(self.groups, self.parts(u), self.parts(v))])

    def random_point(self, rng, scale: float = 1.0):
        return tuple(G.random_element(rng, scale) for G in self.groups)


def exterior_derivative_2form(P: ProductManifold, form: Callable, point, u1, u2, u3,
                              h: float = 1e-4) -> float:
    """d(omega)(u1, u2, u3) for left-invariant fields, by central differences.

    ``form(point, a, b)`` evaluates the 2-form on left-trivialised tangents.
    """
    def D(u, a, b):
        fp = form(P.move(point, u, h), a, b)
        fm = form(P.move(point, u, -h), a, b)
        return (fp - fm) / (2 * h)

    val = D(u1, u2, u3) - D(u2, u1, u3) + D(u3, u1, u2)
    val -= form(point, P.bracket(u1, u2), u3)
    val += form(point, P.bracket(u1, u3), u2)
    val -= form(point, P.bracket(u2, u3), u1)
    return float(val)
