"""Lattice model of the space of connections on the interval and on the circle.

A connection is stored by its transitions ``u_i = exp(delta A_i)`` on ``N``
links of length ``delta = 1/N``. Node fields ``xi`` live on the ``N + 1``
nodes ``t_i = i delta``; gauge elements likewise.

Coordinates on the fiber of ``T + T*`` at a lattice connection:

* a tangent vector is an interval cochain ``a`` (shape ``(N, d)``), meaning
  the variation ``delta u_i = delta * a_i u_i`` of the transitions
  (right trivialisation, scaled so that ``a`` converges to a 1-form);
* a covector is a cochain ``mu`` acting by ``sum_i delta * mu_i . a_i``.

The generators are ``rho(xi) = (D_A xi, m(xi))`` with the covariant difference
``(D_A xi)_i = (Ad_{u_i} xi_{i+1} - xi_i) / delta`` and the twisted trapezoid
average ``m_i(xi) = (xi_i + Ad_{u_i} xi_{i+1}) / 2``. With this pair the
integration by parts telescopes, so the boundary pairing is exact.

On a single link these are exactly the generators of the Cartan-Courant
algebroid for the action ``u -> k_i u k_{i+1}^{-1}``, so the lattice space is a
product of ``N`` copies of it. The matching 3-form is the sum of the link
Cartan forms; it is ``O(delta^2)`` and disappears in the continuum limit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from .cartan import ETA_CONSTANT, frame_courant_bracket
from .linalg import MetrizedSpace, Subspace
from .liegroup import MatrixGroup, get_group

__all__ = [
    "LatticeRefinementError",
    "ChiProfile",
    "DiscreteConnection",
    "GaugeElement",
    "parallel_frame",
    "holonomy",
    "gauge_act",
    "gauge_formula",
    "covariant_derivative",
    "covariant_matrix",
    "average_matrix",
    "generator",
    "generator_matrix",
    "fiber_space",
    "l2_space",
    "node_basis",
    "dirac_fiber",
    "tangent_subspace",
    "staggered_mode_dimension",
    "orbit_two_form",
    "affine_poisson_bracket",
    "affine_jacobiator",
    "tangent_holonomy",
    "tangent_holonomy_matrix",
    "lift_field",
    "connection_lift",
    "caloron_lift",
    "connection_form",
    "connection_matrix",
    "varpi",
    "varpi_matrix",
    "varpi_transport",
    "varpi_transport_matrix",
    "lattice_three_form",
    "lattice_courant_bracket",
    "act_on_fiber",
    "generator_property_residual",
    "CircleFiber",
    "circle_algebroid_fiber",
    "circle_bracket_residual",
]

BRANCH_MARGIN = 1e-6


class LatticeRefinementError(ValueError):
    """A link is too long for the principal logarithm; use a finer lattice."""


# -- profiles for the standard connection

@dataclass(frozen=True)
class ChiProfile:
    """Interpolating function with chi(0) = 0 and chi(1) = 1."""

    name: str = "linear"

    def __post_init__(self):
        if self.name not in ("linear", "smoothstep"):
            raise ValueError(f"unknown chi profile {self.name!r}; use 'linear' or 'smoothstep'")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.name == "linear":
            return t
        return 3 * t**2 - 2 * t**3

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.name == "linear":
            return np.ones_like(t)
        return 6 * t - 6 * t**2

    def nodes(self, N: int) -> np.ndarray:
        return self(np.linspace(0.0, 1.0, N + 1))


def _chi(chi) -> ChiProfile:
    return chi if isinstance(chi, ChiProfile) else ChiProfile(chi)


# -- connections and gauge transformations

def _check_branch(G: MatrixGroup, x: np.ndarray, where: int):
    ev = np.linalg.eigvals(G.matrix(x))
    if np.abs(ev.imag).max(initial=0.0) >= np.pi - BRANCH_MARGIN:
        raise LatticeRefinementError(
            f"link {where}: |Im spec(delta A)| reaches pi; increase N to refine the lattice"
        )


class DiscreteConnection:
    """Lattice connection on [0, 1] given by its transitions."""

    def __init__(self, group: MatrixGroup | str, transitions, check: bool = True):
        self.group = get_group(group) if isinstance(group, str) else group
        u = np.asarray(transitions, dtype=float)
        if u.ndim != 3 or u.shape[1:] != (self.group.n, self.group.n):
            raise ValueError("transitions must have shape (N, n, n)")
        if u.shape[0] < 1:
            raise ValueError("need at least one link")
        self.transitions = u
        self.transitions.setflags(write=False)
        if check:
            for i, ui in enumerate(u):
                res = self.group.membership_residual(ui)
                if res > 1e-9:
                    raise ValueError(f"transition {i} is off the group (residual {res:.2e})")
            _ = self.samples

    # constructors

    @classmethod
    def from_samples(cls, group, samples) -> "DiscreteConnection":
        G = get_group(group) if isinstance(group, str) else group
        A = np.atleast_2d(np.asarray(samples, dtype=float))
        delta = 1.0 / A.shape[0]
        for i, x in enumerate(A):
            _check_branch(G, delta * x, i)
        return cls(G, np.array([G.exp(delta * x) for x in A]), check=False)

    @classmethod
    def from_function(cls, group, f: Callable[[float], np.ndarray], N: int,
                      rule: str = "midpoint") -> "DiscreteConnection":
        """Sample a continuum connection t -> A(t) at link midpoints or left ends."""
        offset = {"midpoint": 0.5, "left": 0.0}[rule]
        t = (np.arange(N) + offset) / N
        return cls.from_samples(group, np.array([f(ti) for ti in t]))

    @classmethod
    def zero(cls, group, N: int) -> "DiscreteConnection":
        G = get_group(group) if isinstance(group, str) else group
        return cls(G, np.repeat(G.identity()[None], N, axis=0), check=False)

    @classmethod
    def random(cls, group, N: int, rng: np.random.Generator, scale: float = 1.0) -> "DiscreteConnection":
        G = get_group(group) if isinstance(group, str) else group
        return cls.from_samples(G, scale * rng.standard_normal((N, G.dim)))

    # serialisation

    def to_json(self) -> str:
        return json.dumps({"group": self.group.name, "samples": self.samples.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteConnection":
        doc = json.loads(text)
        return cls.from_samples(doc["group"], doc["samples"])

    # cached data

    @property
    def N(self) -> int:
        return self.transitions.shape[0]

    @property
    def delta(self) -> float:
        return 1.0 / self.N

    @property
    def d(self) -> int:
        return self.group.dim

    @cached_property
    def samples(self) -> np.ndarray:
        """A_i = log(u_i) / delta, with the branch condition enforced."""
        G = self.group
        out = np.empty((self.N, G.dim))
        for i, ui in enumerate(self.transitions):
            try:
                x = G.log(ui)
            except ValueError as exc:
                raise LatticeRefinementError(
                    f"link {i}: transition outside the principal logarithm domain; increase N"
                ) from exc
            _check_branch(G, x, i)
            out[i] = x / self.delta
        return out

    @cached_property
    def frames(self) -> np.ndarray:
        g = np.empty((self.N + 1, self.group.n, self.group.n))
        g[0] = self.group.identity()
        for i, ui in enumerate(self.transitions):
            g[i + 1] = g[i] @ ui
        return g

    @cached_property
    def Ad_u(self) -> np.ndarray:
        return np.array([self.group.Ad(ui) for ui in self.transitions])

    @cached_property
    def Ad_frames(self) -> np.ndarray:
        return np.array([self.group.Ad(gi) for gi in self.frames])

    @property
    def hol(self) -> np.ndarray:
        return self.frames[-1]

    def __repr__(self):
        return f"DiscreteConnection({self.group.name}, N={self.N})"


@dataclass(frozen=True)
class GaugeElement:
    """Node-valued group element k_0, ..., k_N."""

    group: MatrixGroup
    nodes: np.ndarray = field(repr=False)

    @classmethod
    def exp(cls, group: MatrixGroup, xi) -> "GaugeElement":
        return cls(group, np.array([group.exp(x) for x in np.asarray(xi)]))

    @classmethod
    def random(cls, group: MatrixGroup, N: int, rng: np.random.Generator, scale: float = 1.0,
               boundary: str = "free") -> "GaugeElement":
        xi = scale * rng.standard_normal((N + 1, group.dim))
        if boundary == "fixed":
            xi[0] = xi[-1] = 0.0
        elif boundary == "loop":
            xi[-1] = xi[0]
        return cls.exp(group, xi)

    def __len__(self):
        return len(self.nodes)


def _nodes(k) -> np.ndarray:
    return k.nodes if isinstance(k, GaugeElement) else np.asarray(k, dtype=float)


def parallel_frame(A: DiscreteConnection) -> np.ndarray:
    """Frames g_0 = e, g_{i+1} = g_i u_i."""
    return A.frames


def holonomy(A: DiscreteConnection) -> np.ndarray:
    return A.hol


def gauge_act(k, A: DiscreteConnection) -> DiscreteConnection:
    """u_i -> k_i u_i k_{i+1}^{-1}; the result must stay in the logarithm domain."""
    kn = _nodes(k)
    if kn.shape[0] != A.N + 1:
        raise ValueError("gauge element needs N + 1 nodes")
    u = np.einsum("iab,ibc,icd->iad", kn[:-1], A.transitions, np.linalg.inv(kn[1:]))
    return DiscreteConnection(A.group, u, check=True)


def gauge_formula(G: MatrixGroup, k: Callable[[float], np.ndarray], A: Callable[[float], np.ndarray],
                  t: float, h: float = 1e-6) -> np.ndarray:
    """Continuum action Ad_k A - k' k^{-1} at time t, with k' by central differences."""
    kt = k(t)
    dk = (k(t + h) - k(t - h)) / (2 * h)
    return G.Ad(kt) @ A(t) - G.coords(dk @ np.linalg.inv(kt))


# -- covariant derivative and generators

def covariant_derivative(A: DiscreteConnection, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(A.N + 1, A.d)
    return (np.einsum("iab,ib->ia", A.Ad_u, xi[1:]) - xi[:-1]) / A.delta


def _average(A: DiscreteConnection, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(A.N + 1, A.d)
    return 0.5 * (xi[:-1] + np.einsum("iab,ib->ia", A.Ad_u, xi[1:]))


def covariant_matrix(A: DiscreteConnection) -> np.ndarray:
    """Matrix of D_A from node fields ((N+1) d) to cochains (N d)."""
    N, d = A.N, A.d
    D = np.zeros((N * d, (N + 1) * d))
    for i in range(N):
        D[i * d:(i + 1) * d, i * d:(i + 1) * d] = -np.eye(d)
        D[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = A.Ad_u[i]
    return D / A.delta


def average_matrix(A: DiscreteConnection) -> np.ndarray:
    """Matrix of the twisted trapezoid average m."""
    N, d = A.N, A.d
    M = np.zeros((N * d, (N + 1) * d))
    for i in range(N):
        M[i * d:(i + 1) * d, i * d:(i + 1) * d] = 0.5 * np.eye(d)
        M[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = 0.5 * A.Ad_u[i]
    return M


def generator(A: DiscreteConnection, xi) -> np.ndarray:
    """rho(xi) = (D_A xi, m(xi)) flattened to a vector of length 2 N d."""
    return np.concatenate([covariant_derivative(A, xi).ravel(), _average(A, xi).ravel()])


def generator_matrix(A: DiscreteConnection) -> np.ndarray:
    return np.vstack([covariant_matrix(A), average_matrix(A)])


def _pairing_block(G: MatrixGroup, N: int) -> np.ndarray:
    return np.kron(np.eye(N), G.algebra.metric) / N


@lru_cache(maxsize=64)
def _fiber_space(name: str, N: int) -> MetrizedSpace:
    K = _pairing_block(get_group(name), N)
    Z = np.zeros_like(K)
    return MetrizedSpace(np.block([[Z, K], [K, Z]]))


def fiber_space(A: DiscreteConnection) -> MetrizedSpace:
    """Fiber of T + T* at A with the symmetrised pairing metric."""
    return _fiber_space(A.group.name, A.N)


def l2_space(A: DiscreteConnection) -> MetrizedSpace:
    """Tangent space with the L2 metric sum_i delta a_i . a_i'."""
    return MetrizedSpace(_pairing_block(A.group, A.N))


def node_basis(G: MatrixGroup, N: int, s: Subspace | None) -> np.ndarray:
    """Basis of node fields with free interior values and (xi_0, xi_N) in s.

    ``s`` is a subspace of the double ordered as (xi(0), xi(1)); ``None``
    means all node fields.
    """
    d = G.dim
    if s is None:
        return np.eye((N + 1) * d)
    interior = np.zeros(((N + 1) * d, (N - 1) * d))
    interior[d:N * d] = np.eye((N - 1) * d)
    ends = np.zeros(((N + 1) * d, s.dim))
    ends[:d] = s.basis[:d]
    ends[N * d:] = s.basis[d:]
    return np.hstack([interior, ends])


def dirac_fiber(A: DiscreteConnection, s: Subspace) -> Subspace:
    """E^(s) at A: the span of rho(xi) over node fields with endpoints in s."""
    return Subspace(fiber_space(A), generator_matrix(A) @ node_basis(A.group, A.N, s))


def tangent_subspace(A: DiscreteConnection) -> Subspace:
    n = A.N * A.d
    return Subspace(fiber_space(A), np.vstack([np.eye(n), np.zeros((n, n))]))


def staggered_mode_dimension(A: DiscreteConnection, s: Subspace) -> int:
    """Predicted dimension of E^(s) meet T_A.

    m(xi) = 0 forces xi_i = -Ad_{u_i} xi_{i+1}, so xi_0 = (-1)^N Ad_Hol xi_N;
    the intersection is the set of such staggered fields with endpoints in s.
    """
    d = A.d
    W = np.vstack([(-1) ** A.N * A.group.Ad(A.hol), np.eye(d)])
    Wsub = Subspace(s.ambient, W)
    return Wsub.dim + s.dim - (Wsub + s).dim


def orbit_two_form(A: DiscreteConnection, xi1, xi2) -> float:
    """sum_i delta m_i(xi1) . (D_A xi2)_i, the leaf form on generating vectors."""
    B = A.group.algebra.metric
    return float(A.delta * np.einsum("ia,ab,ib->", _average(A, xi1), B, covariant_derivative(A, xi2)))


def affine_poisson_bracket(A: DiscreteConnection, xi1, t1: float, xi2, t2: float) -> dict:
    """Bracket of the affine functions t + <A, xi>.

    Returns the value sum_i delta (D_A xi1)_i . m_i(xi2), its A-independent part
    (the cocycle, i.e. the value at A = 0) and the remainder, which
    approximates <A, [xi1, xi2]>. The constants t1, t2 drop out.
    """
    G = A.group
    B = G.algebra.metric
    val = A.delta * np.einsum("ia,ab,ib->", covariant_derivative(A, xi1), B, _average(A, xi2))
    A0 = DiscreteConnection.zero(G, A.N)
    cocycle = A0.delta * np.einsum("ia,ab,ib->", covariant_derivative(A0, xi1), B, _average(A0, xi2))
    return {"value": float(val), "cocycle": float(cocycle), "potential": float(val - cocycle)}


def affine_jacobiator(A: DiscreteConnection, xi1, xi2, xi3) -> dict:
    """Cyclic sum of {{f1, f2}, f3} for the affine functions of node fields.

    On linear functions the bracket closes on the pointwise bracket of node
    fields, so the Jacobiator is the cyclic sum of value([xi1, xi2], xi3). It
    equals minus the link 3-form on the generating vectors D_A xi, which is
    O(delta^2); ``corrected`` adds that term back and vanishes to roundoff
    when the fields have equal endpoints (so the bracket is skew).
    """
    G = A.group
    xs = [np.asarray(x, dtype=float).reshape(A.N + 1, A.d) for x in (xi1, xi2, xi3)]

    def br(a, b):
        return np.einsum("kij,ni,nj->nk", G.algebra.structure, a, b)

    def val(a, b):
        return affine_poisson_bracket(A, a, 0.0, b, 0.0)["value"]

    jac = (val(br(xs[0], xs[1]), xs[2]) + val(br(xs[1], xs[2]), xs[0])
           + val(br(xs[2], xs[0]), xs[1]))
    eta = lattice_three_form(G, A.N, *(covariant_derivative(A, x) for x in xs))
    return {"jacobiator": float(jac), "three_form": float(eta), "corrected": float(jac + eta)}


# -- holonomy differential and the standard connection

def tangent_holonomy(A: DiscreteConnection, a) -> np.ndarray:
    """Left-trivialised T Hol(a) = sum_i delta Ad_{g_N^{-1} g_i} a_i."""
    return tangent_holonomy_matrix(A) @ np.asarray(a, dtype=float).ravel()


def tangent_holonomy_matrix(A: DiscreteConnection) -> np.ndarray:
    AdHinv = np.linalg.inv(A.Ad_frames[-1])
    return A.delta * np.hstack([AdHinv @ A.Ad_frames[i] for i in range(A.N)])


def lift_field(A: DiscreteConnection, X, chi="linear") -> np.ndarray:
    """xi_i = chi(t_i) Ad_{g_i^{-1} g_N} X."""
    c = _chi(chi).nodes(A.N)
    AdH = A.Ad_frames[-1]
    out = np.array([np.linalg.solve(A.Ad_frames[i], AdH @ X) for i in range(A.N + 1)])
    return c[:, None] * out


def connection_lift(A: DiscreteConnection, X, chi="linear") -> np.ndarray:
    """Horizontal lift of a left-trivialised tangent X at Hol(A)."""
    return covariant_derivative(A, lift_field(A, X, chi))


def caloron_lift(A: DiscreteConnection, X, chi="linear") -> np.ndarray:
    """Horizontal lift from the framed connection kappa_t = -chi(t) a^* theta^R.

    xi(t) = -Ad_{g(t)^{-1}} kappa_t(X), evaluated on the tangent vector
    Hol X at Hol; an independent code path for the same lift.
    """
    G = A.group
    H = A.hol
    right = G.maurer_cartan(H, H @ G.matrix(X))[1]
    c = _chi(chi).nodes(A.N)
    xi = np.empty((A.N + 1, A.d))
    for i, gi in enumerate(A.frames):
        kappa = -c[i] * right
        xi[i] = -G.coords(np.linalg.inv(gi) @ G.matrix(kappa) @ gi)
    return covariant_derivative(A, xi)


def _lift_matrix(A: DiscreteConnection, chi) -> np.ndarray:
    return np.column_stack([connection_lift(A, e, chi).ravel() for e in np.eye(A.d)])


def connection_matrix(A: DiscreteConnection, chi="linear") -> np.ndarray:
    """Matrix of theta: cochains -> node fields with zero endpoints.

    theta(a) = zeta solves a = D_A zeta + lift(T Hol a).
    """
    N, d = A.N, A.d
    b_map = np.eye(N * d) - _lift_matrix(A, chi) @ tangent_holonomy_matrix(A)
    # forward recursion zeta_{i+1} = Ad_{u_i}^{-1} (zeta_i + delta b_i), zeta_0 = 0
    Z = np.zeros(((N + 1) * d, N * d))
    for i in range(N):
        Ainv = np.linalg.inv(A.Ad_u[i])
        Z[(i + 1) * d:(i + 2) * d] = Ainv @ (Z[i * d:(i + 1) * d] + A.delta * b_map[i * d:(i + 1) * d])
    return Z


def connection_form(A: DiscreteConnection, a, chi="linear") -> np.ndarray:
    zeta = (connection_matrix(A, chi) @ np.asarray(a, dtype=float).ravel()).reshape(A.N + 1, A.d)
    return zeta


def varpi_matrix(A: DiscreteConnection, chi="linear") -> np.ndarray:
    """W with varpi(a1, a2) = a1^T W a2 for varpi = -alpha(theta) + c(theta, theta) / 2.

    Written out, varpi(a1, a2) = alpha(theta a1)(a2) - alpha(theta a2)(a1)
    + c(theta a1, theta a2) with alpha(xi)(a) = sum delta m(xi) . a and
    c(xi, xi') = alpha(xi')(D_A xi); this is the form with i(xi_A) varpi =
    alpha(xi) for boundary-free xi.
    """
    Th = connection_matrix(A, chi)
    M = average_matrix(A)
    D = covariant_matrix(A)
    K = _pairing_block(A.group, A.N)
    MTh = M @ Th
    return MTh.T @ K - K @ MTh + (D @ Th).T @ K @ MTh


def varpi(A: DiscreteConnection, a1, a2, chi="linear") -> float:
    return float(np.ravel(a1) @ varpi_matrix(A, chi) @ np.ravel(a2))


def varpi_transport(A: DiscreteConnection, a1, a2) -> float:
    """Parallel-transport formula (1/2) int Hol_s^* theta^R . d/ds Hol_s^* theta^R.

    Hol_s^* theta^R(a) is the cumulative sum r_k = sum_{i<k} delta Ad_{g_i} a_i;
    the integrand is integrated exactly for piecewise linear r.
    """
    a1 = np.asarray(a1, dtype=float).reshape(A.N, A.d)
    a2 = np.asarray(a2, dtype=float).reshape(A.N, A.d)
    B = A.group.algebra.metric
    b1 = A.delta * np.einsum("iab,ib->ia", A.Ad_frames[:-1], a1)
    b2 = A.delta * np.einsum("iab,ib->ia", A.Ad_frames[:-1], a2)
    r1 = np.cumsum(b1, axis=0) - b1
    r2 = np.cumsum(b2, axis=0) - b2
    val = np.einsum("ia,ab,ib->", r1 + 0.5 * b1, B, b2) - np.einsum("ia,ab,ib->", r2 + 0.5 * b2, B, b1)
    return float(0.5 * val)


def varpi_transport_matrix(A: DiscreteConnection) -> np.ndarray:
    """Matrix of :func:`varpi_transport`, built without the connection form."""
    N, d = A.N, A.d
    T = A.delta * np.kron(np.eye(N), np.ones((d, d))) * np.tile(
        np.hstack([A.Ad_frames[i] for i in range(N)]), (N, 1)
    )
    S = np.kron(np.tril(np.ones((N, N)), -1) + 0.5 * np.eye(N), np.eye(d))
    Bt = np.kron(np.eye(N), A.group.algebra.metric)
    return 0.5 * T.T @ (S.T @ Bt - Bt @ S) @ T


# -- Courant bracket on the lattice space

def lattice_three_form(G: MatrixGroup, N: int, a1, a2, a3) -> float:
    """Sum of the link Cartan forms on cochains: ETA_CONSTANT delta^3 sum <a1_i, [a2_i, a3_i]>."""
    d = G.dim
    a1, a2, a3 = (np.asarray(x, dtype=float).reshape(N, d) for x in (a1, a2, a3))
    delta = 1.0 / N
    br = np.einsum("kij,ni,nj->nk", G.algebra.structure, a2, a3)
    return float(ETA_CONSTANT * delta**3 * np.einsum("na,ab,nb->", a1, G.algebra.metric, br))


def _move(G: MatrixGroup, N: int):
    def move(u, x, t):
        x = np.asarray(x).reshape(N, G.dim)
        return np.array([G.exp(t * x[i] / N) @ u[i] for i in range(N)])
    return move


def lattice_courant_bracket(G: MatrixGroup, N: int, s1: Callable, s2: Callable, transitions,
                            h: float = 1e-4, twisted: bool = True) -> np.ndarray:
    """Courant bracket of sections over the lattice space, in (a, mu) coordinates.

    Sections map transitions (N, n, n) to vectors (a, mu) of length 2 N d. With
    ``twisted`` the sum of link Cartan forms is used as background 3-form.
    """
    d = G.dim
    n = N * d
    K = _pairing_block(G, N)
    Kinv = np.linalg.inv(K)

    def to_frame(s):
        def f(u):
            v = np.asarray(s(u))
            return np.concatenate([v[:n], K @ v[n:]])
        return f

    def frame_bracket(x, y):
        x = np.asarray(x).reshape(N, d)
        y = np.asarray(y).reshape(N, d)
        return (-np.einsum("kij,ni,nj->nk", G.algebra.structure, x, y) / N).ravel()

    eta = (lambda x, y, z: lattice_three_form(G, N, x, y, z)) if twisted else None
    out = frame_courant_bracket(to_frame(s1), to_frame(s2), np.asarray(transitions), _move(G, N),
                                frame_bracket, n, eta=eta, h=h)
    return np.concatenate([out[:n], Kinv @ out[n:]])


def act_on_fiber(G: MatrixGroup, k, vec) -> np.ndarray:
    """Lifted gauge action a_i -> Ad_{k_i} a_i, mu_i -> Ad_{k_i} mu_i."""
    kn = _nodes(k)
    N = kn.shape[0] - 1
    d = G.dim
    Ad = np.array([G.Ad(ki) for ki in kn[:-1]])
    v = np.asarray(vec).reshape(2, N, d)
    return np.einsum("iab,sib->sia", Ad, v).ravel()


def _act_transitions(kn, u):
    return np.einsum("iab,ibc,icd->iad", kn[:-1], u, np.linalg.inv(kn[1:]))


def generator_property_residual(G: MatrixGroup, N: int, xi, section: Callable, transitions,
                                h: float = 1e-4, twisted: bool = True) -> np.ndarray:
    """[[rho(xi), sigma]] + d/dt (exp t xi)^* sigma at t = 0, by central differences."""
    xi = np.asarray(xi, dtype=float).reshape(N + 1, G.dim)
    u = np.asarray(transitions)

    def rho(v):
        return generator(DiscreteConnection(G, v, check=False), xi)

    lhs = lattice_courant_bracket(G, N, rho, section, u, h=h, twisted=twisted)

    def pulled(t):
        kn = np.array([G.exp(t * x) for x in xi])
        kinv = np.linalg.inv(kn)
        return act_on_fiber(G, kinv, section(_act_transitions(kn, u)))

    deriv = (pulled(h) - pulled(-h)) / (2 * h)
    return lhs + deriv


# -- circle model

@dataclass
class CircleFiber:
    """Lattice version of the transitive algebroid R at a circle connection.

    Node fields have independent endpoints; D_A xi is automatically periodic
    because the N links already close up the circle.
    """

    connection: DiscreteConnection
    sections: np.ndarray
    anchor: np.ndarray
    image: Subspace
    pairing: np.ndarray


def circle_algebroid_fiber(A: DiscreteConnection) -> CircleFiber:
    G = A.group
    d = G.dim
    R = np.eye((A.N + 1) * d)
    rho = generator_matrix(A)
    img = Subspace(fiber_space(A), rho)
    Bd = np.zeros_like(R)
    Bd[:d, :d] = -G.algebra.metric
    Bd[-d:, -d:] = G.algebra.metric
    return CircleFiber(A, R, covariant_matrix(A), img, Bd)


def circle_bracket_residual(G: MatrixGroup, N: int, xi1: Callable, xi2: Callable, transitions,
                            h: float = 1e-4, twisted: bool = True) -> dict:
    """Compare [[rho(xi1), rho(xi2)]] with rho([xi1, xi2]_R) + boundary anomaly.

    ``xi1``, ``xi2`` map transitions to node fields (N + 1, d). The anomaly is
    the 1-form xi2(1) . d xi1(1) - xi2(0) . d xi1(0).
    """
    d = G.dim
    n = N * d
    u = np.asarray(transitions)
    move = _move(G, N)
    B = G.algebra.metric

    def rho(f):
        return lambda v: generator(DiscreteConnection(G, v, check=False), f(v))

    lhs = lattice_courant_bracket(G, N, rho(xi1), rho(xi2), u, h=h, twisted=twisted)
    A = DiscreteConnection(G, u, check=False)
    x1 = np.asarray(xi1(u)).reshape(N + 1, d)
    x2 = np.asarray(xi2(u)).reshape(N + 1, d)

    def deriv(f, x):
        return (np.asarray(f(move(u, x, h))) - np.asarray(f(move(u, x, -h)))) / (2 * h)

    v1 = covariant_derivative(A, x1).ravel()
    v2 = covariant_derivative(A, x2).ravel()
    pointwise = np.einsum("kij,ni,nj->nk", G.algebra.structure, x1, x2)
    bracket_R = pointwise + deriv(xi2, v1).reshape(N + 1, d) - deriv(xi1, v2).reshape(N + 1, d)
    rhs = generator(A, bracket_R)
    # anomaly covector: frame values, converted to mu coordinates
    c = np.empty(n)
    E = np.eye(n)
    for k in range(n):
        dxi = np.asarray(deriv(xi1, E[k])).reshape(N + 1, d)
        c[k] = x2[-1] @ B @ dxi[-1] - x2[0] @ B @ dxi[0]
    anomaly = np.linalg.solve(_pairing_block(G, N), c)
    rhs = rhs + np.concatenate([np.zeros(n), anomaly])
    return {
        "residual": float(np.abs(lhs - rhs).max()),
        "anomaly_size": float(np.abs(anomaly).max()),
        "lhs": lhs,
        "rhs": rhs,
    }
