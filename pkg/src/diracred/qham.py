"""q-Hamiltonian spaces, their fusion, and the correspondence with the lattice model.

Spaces are described on charts: a point of a conjugacy class is ``a = h a0 h^{-1}``
and the chart coordinate is the conjugator ``h``, moved by ``h -> h exp(t u)``.
Forms, moment maps and tangent maps are pulled back to the chart, where all
three axioms are pointwise or 1-jet statements. Chart directions that do not
move the point (the stabiliser of ``a0``) are tracked so that kernel counts
refer to the space itself.

Sign conventions: the diagonal ``(X, X)`` acts with generating vector
``anchor(X, X) = X - Ad_{a^{-1}} X``, the moment condition reads
``i(Y_M) omega = -alpha(Y)`` and ``d omega = -Phi^* eta``. With these, the class
form is the negative of the leaf form of the Cartan-Dirac structure and the
fusion of two spaces carries ``omega_1 + omega_2 - varsigma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .cartan import (
    ProductManifold,
    _eta_left,
    alpha_coords,
    anchor_left,
    exterior_derivative_2form,
    fusion_matrix,
    leaf_two_form,
)
from .holonomy import (
    DiscreteConnection,
    GaugeElement,
    LatticeRefinementError,
    _act_transitions,
    _average,
    _lift_matrix,
    _pairing_block,
    connection_matrix,
    covariant_derivative,
    gauge_act,
    tangent_holonomy_matrix,
    varpi_matrix,
    varpi_transport_matrix,
)
from .liegroup import MatrixGroup, get_group

__all__ = [
    "AxiomFailure",
    "QHamSpace",
    "conjugacy_class",
    "class_from_spec",
    "space_from_spec",
    "leaf_oracle_residual",
    "AxiomReport",
    "check_axioms",
    "default_scale",
    "fuse",
    "equivariance_residual",
    "LoopHamSpace",
    "lift",
    "reduce",
    "round_trip_residual",
]


class AxiomFailure(ValueError):
    """Raised when a space that must satisfy the axioms does not."""

    def __init__(self, message: str, report: "AxiomReport"):
        super().__init__(message)
        self.report = report


Point = tuple


@dataclass
class QHamSpace:
    """Chart model of a q-Hamiltonian g-space for the diagonal subalgebra.

    All evaluators take a chart point (a tuple of conjugators):

    * ``phi``: moment map value in G;
    * ``dphi``: left-trivialised tangent of the moment map, d x dim;
    * ``omega``: matrix of the pulled-back 2-form;
    * ``action``: chart vector of the generating field of (X, X);
    * ``projection``: chart -> tangent of the underlying points, whose kernel
      is the chart redundancy;
    * ``logs``: algebra elements whose exponentials multiply to ``phi``.
    """

    group: MatrixGroup
    chart: ProductManifold
    phi: Callable[[Point], np.ndarray]
    dphi: Callable[[Point], np.ndarray]
    omega: Callable[[Point], np.ndarray]
    action: Callable[[Point, np.ndarray], np.ndarray]
    projection: Callable[[Point], np.ndarray]
    logs: Callable[[Point], list]
    name: str = "M"

    @property
    def dim(self) -> int:
        return self.chart.dim

    def form(self, point: Point, u, v) -> float:
        return float(np.ravel(u) @ self.omega(point) @ np.ravel(v))

    def random_point(self, rng: np.random.Generator, scale: float = 1.0) -> Point:
        return self.chart.random_point(rng, scale)

    def scaled(self, factor: float) -> "QHamSpace":
        """Negative control: the same space with omega multiplied by ``factor``."""
        om = self.omega
        return replace(self, omega=lambda p: factor * om(p), name=f"{self.name}*{factor:g}")

    def translated(self, g0) -> "QHamSpace":
        """Negative control: moment map right-translated by a fixed group element."""
        G = self.group
        g0 = np.asarray(g0)
        Adinv = G.Ad(np.linalg.inv(g0))
        ph, dph = self.phi, self.dphi
        return replace(self, phi=lambda p: ph(p) @ g0, dphi=lambda p: Adinv @ dph(p),
                       logs=None, name=f"{self.name}.g0")


def conjugacy_class(G: MatrixGroup | str, x0) -> QHamSpace:
    """Conjugacy class of a0 = exp(x0), charted by conjugators h.

    omega(v_X, v_Y) = -<X, (Ad_a - Ad_{a^{-1}}) Y> / 2 for the tangents
    v_X = (Ad_{a^{-1}} - 1) X of a -> exp(tX) a exp(-tX).
    """
    G = get_group(G) if isinstance(G, str) else G
    x0 = np.asarray(x0, dtype=float)
    a0 = G.exp(x0)
    B = G.algebra.metric
    I = np.eye(G.dim)
    Ad0inv = G.Ad(np.linalg.inv(a0))

    def phi(p):
        (h,) = p
        return h @ a0 @ np.linalg.inv(h)

    def dphi(p):
        (h,) = p
        return G.Ad(h) @ (Ad0inv - I)

    def omega(p):
        (h,) = p
        a = phi(p)
        Adh = G.Ad(h)
        W = -0.5 * B @ (G.Ad(a) - G.Ad(np.linalg.inv(a)))
        return Adh.T @ W @ Adh

    def action(p, X):
        (h,) = p
        return -np.linalg.solve(G.Ad(h), np.asarray(X, dtype=float))

    def logs(p):
        (h,) = p
        return [G.Ad(h) @ x0]

    return QHamSpace(G, ProductManifold([G]), phi, dphi, omega, action, dphi, logs,
                     name=f"class({np.round(x0, 6).tolist()})")


def class_from_spec(G: MatrixGroup, spec: str, seed: int = 0) -> np.ndarray:
    """Logarithm x0 of a class representative named by a config string.

    'identity', 'central' (the nontrivial central element when the group has
    one in the exponential image), 'random' (seeded) and 'exp:x1,x2,...'.
    """
    d = G.dim
    if spec == "identity":
        return np.zeros(d)
    if spec == "central":
        # exp of these is -1
        if G.name == "su2":
            return np.array([0.0, 0.0, 2 * np.pi])
        if G.name == "sl2r":
            return np.array([0.0, np.pi, -np.pi])
        raise ValueError(f"no nontrivial central exponential catalogued for {G.name}")
    if spec == "random":
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(d)
        return 1.2 * x / np.linalg.norm(x)
    if spec.startswith("exp:"):
        vals = [float(v) for v in spec[4:].split(",")]
        if len(vals) != d:
            raise ValueError(f"exp spec needs {d} coordinates")
        return np.array(vals)
    raise ValueError(f"unknown class spec {spec!r}")


def space_from_spec(G: MatrixGroup, spec: str, seed: int = 0) -> QHamSpace:
    """'conjugacy:<class>' or 'fusion:<class>+<class>+...'."""
    kind, _, rest = spec.partition(":")
    if kind == "conjugacy":
        return conjugacy_class(G, class_from_spec(G, rest or "random", seed))
    if kind == "fusion":
        parts = [p for p in rest.split("+") if p]
        if len(parts) < 2:
            raise ValueError("fusion needs at least two classes")
        spaces = [conjugacy_class(G, class_from_spec(G, p, seed + i)) for i, p in enumerate(parts)]
        out = spaces[0]
        for M in spaces[1:]:
            out = fuse(out, M)
        return out
    raise ValueError(f"unknown space spec {spec!r}")


def leaf_oracle_residual(M: QHamSpace, point: Point) -> float:
    """Compare a class form with minus the Cartan-Dirac leaf form at ``point``."""
    G = M.group
    a = M.phi(point)
    T = M.dphi(point)
    W = M.omega(point)
    diag = G.double.diagonal()
    worst = 0.0
    for i in range(M.dim):
        for j in range(M.dim):
            v1, v2 = a @ G.matrix(T[:, i]), a @ G.matrix(T[:, j])
            ref = -leaf_two_form(G, diag, a, v1, v2)
            worst = max(worst, abs(W[i, j] - ref))
    return worst


# -- axioms

@dataclass
class AxiomReport:
    residuals: dict
    tolerances: dict
    orders: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    kernel_excess: int = 0

    @property
    def passed(self) -> dict:
        out = {k: self.residuals[k] <= self.tolerances[k] for k in ("a", "c")}
        out["b"] = self.kernel_excess == 0
        return out

    @property
    def failures(self) -> set:
        return {k for k, ok in self.passed.items() if not ok}

    @property
    def ok(self) -> bool:
        return not self.failures


def default_scale(G: MatrixGroup) -> float:
    return 0.5 if G.name == "sl2r" else 1.0


def _null_dim(mat: np.ndarray, tol: float) -> np.ndarray:
    if mat.size == 0:
        return np.eye(mat.shape[1])
    _, s, vt = np.linalg.svd(mat)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int((s > tol * scale).sum())
    return vt[rank:].T


def _axiom_a(M: QHamSpace, point: Point, us, h: float, richardson: bool = False) -> float:
    G = M.group
    u1, u2, u3 = us

    def form(p, a, b):
        return M.form(p, a, b)

    lhs = exterior_derivative_2form(M.chart, form, point, u1, u2, u3, h=h)
    if richardson:
        half = exterior_derivative_2form(M.chart, form, point, u1, u2, u3, h=h / 2)
        lhs = (4 * half - lhs) / 3
    T = M.dphi(point)
    rhs = -_eta_left(G, T @ u1, T @ u2, T @ u3)
    return lhs - rhs


def check_axioms(M: QHamSpace, samples: int = 64, rng: np.random.Generator | None = None,
                 h: float = 1e-3, tol_a: float = 1e-8, tol_c: float = 1e-10,
                 kernel_tol: float = 1e-8, scale: float | None = None) -> AxiomReport:
    """Check the three axioms at ``samples`` random chart points.

    (a) finite-difference exterior derivative against -Phi^* eta; the central
        differences at h and h/2 are combined, and the plain O(h^2) order is
        reported separately;
    (b) joint kernel of omega and T Phi modulo chart redundancy;
    (c) i(Y_M) omega = -alpha(Y) for diagonal Y, exact.
    The order of (a) is measured at the first point from steps 1e-2 and 5e-3.
    Residuals of (a) and (c) are divided by max(1, max |omega|) at the point.
    Conjugators are drawn at ``scale``; for non-compact groups the default is
    smaller, since Ad of a large conjugator is badly conditioned.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    G = M.group
    scale = default_scale(G) if scale is None else scale
    d, n = G.dim, M.dim
    worst = {"a": 0.0, "c": 0.0}
    wit: dict = {}
    excess = 0
    order_a = float("nan")
    for k in range(samples):
        p = M.random_point(rng, scale)
        us = [rng.standard_normal(n) for _ in range(3)]
        W = M.omega(p)
        size = max(1.0, float(np.abs(W).max()))
        ra = abs(_axiom_a(M, p, us, h, richardson=True)) / size
        if ra > worst["a"]:
            worst["a"] = ra
            wit["a"] = {"sample": k, "residual": ra}
        if k == 0:
            e1 = abs(_axiom_a(M, p, us, 1e-2))
            e2 = abs(_axiom_a(M, p, us, 5e-3))
            order_a = float(np.log2(e1 / e2)) if e2 > 0 and e1 > 1e-13 else float("inf")
        T = M.dphi(p)
        c = alpha_coords(G, M.phi(p))
        for X in np.eye(d):
            Y = np.concatenate([X, X])
            lhs = M.action(p, X) @ W
            rhs = -(c @ Y) @ T
            rc = float(np.abs(lhs - rhs).max()) / size
            if rc > worst["c"]:
                worst["c"] = rc
                wit["c"] = {"sample": k, "X": X.tolist(), "residual": rc}
        K = _null_dim(np.vstack([W, T]), kernel_tol)
        genuine = np.linalg.matrix_rank(M.projection(p) @ K, tol=kernel_tol) if K.shape[1] else 0
        if genuine > excess:
            excess = int(genuine)
            wit["b"] = {"sample": k, "rank": int(genuine)}
    return AxiomReport(worst, {"a": tol_a, "c": tol_c}, {"a": order_a}, wit, excess)


def equivariance_residual(M: QHamSpace, point: Point, h: float = 1e-5) -> float:
    """Finite-difference T Phi(Y_M) against the Cartan anchor of (X, X)."""
    G = M.group
    g = M.phi(point)
    an = anchor_left(G, g)
    worst = 0.0
    for X in np.eye(G.dim):
        u = M.action(point, X)
        gp = M.phi(M.chart.move(point, u, h))
        gm = M.phi(M.chart.move(point, u, -h))
        fd = G.coords(np.linalg.inv(g) @ (gp - gm) / (2 * h))
        worst = max(worst, float(np.abs(fd - an @ np.concatenate([X, X])).max()))
    return worst


def fuse(M1: QHamSpace, M2: QHamSpace) -> QHamSpace:
    """Fusion product: Phi = Phi_1 Phi_2 and omega = omega_1 + omega_2 - varsigma."""
    if M1.group.name != M2.group.name:
        raise ValueError("fusion needs a common group")
    G = M1.group
    chart = ProductManifold(M1.chart.groups + M2.chart.groups)

    def split(p):
        k = len(M1.chart.groups)
        return tuple(p[:k]), tuple(p[k:])

    def phi(p):
        p1, p2 = split(p)
        return M1.phi(p1) @ M2.phi(p2)

    def dphi(p):
        p1, p2 = split(p)
        Ad2inv = G.Ad(np.linalg.inv(M2.phi(p2)))
        return np.hstack([Ad2inv @ M1.dphi(p1), M2.dphi(p2)])

    def omega(p):
        p1, p2 = split(p)
        J = sla.block_diag(M1.dphi(p1), M2.dphi(p2))
        F = fusion_matrix(G, M1.phi(p1), M2.phi(p2))
        return sla.block_diag(M1.omega(p1), M2.omega(p2)) - J.T @ F @ J

    def action(p, X):
        p1, p2 = split(p)
        return np.concatenate([M1.action(p1, X), M2.action(p2, X)])

    def projection(p):
        p1, p2 = split(p)
        return sla.block_diag(M1.projection(p1), M2.projection(p2))

    def logs(p):
        p1, p2 = split(p)
        return M1.logs(p1) + M2.logs(p2)

    return QHamSpace(G, chart, phi, dphi, omega, action, projection, logs,
                     name=f"({M1.name} * {M2.name})")


# -- the lattice correspondence

@dataclass
class LoopHamSpace:
    """Lattice pullback {(m, A) : Hol(A) = Phi(m)} over a q-Hamiltonian space.

    Tangent vectors at (m, A) are charted by w = (u, zeta) with u a chart
    vector of M and zeta an interior node field; the connection part is
    Psi_* w = lift(T Phi u) + D_A zeta. The 2-form is
    sigma = pi^* omega - Psi^* varpi.
    """

    base: QHamSpace
    N: int
    chi: str = "linear"

    @property
    def group(self) -> MatrixGroup:
        return self.base.group

    def connection_at(self, point: Point, rng: np.random.Generator, scale: float = 0.5) -> DiscreteConnection:
        """A lattice connection with holonomy Phi(point), made generic by a gauge move."""
        G, N = self.group, self.N
        logs = self.base.logs(point)
        if logs is None:
            raise ValueError("space has no logarithm data for building connections")
        counts = np.full(len(logs), N // len(logs))
        counts[: N % len(logs)] += 1
        if counts.min() < 1:
            raise ValueError(f"N = {N} is too small for {len(logs)} factors")
        samples = np.vstack([np.tile(x * N / c, (c, 1)) for x, c in zip(logs, counts)])
        A = DiscreteConnection.from_samples(G, samples)
        # back off the gauge move if a link leaves the logarithm domain
        for sc in (scale, scale / 4, 0.0):
            k = GaugeElement.random(G, N, rng, scale=sc, boundary="fixed")
            try:
                return gauge_act(k, A)
            except LatticeRefinementError:
                continue
        return A

    def psi_matrix(self, point: Point, A: DiscreteConnection) -> np.ndarray:
        L = _lift_matrix(A, self.chi) @ self.base.dphi(point)
        D = covariant_derivative_matrix_interior(A)
        return np.hstack([L, D])

    def pi_matrix(self, A: DiscreteConnection) -> np.ndarray:
        n = self.base.dim
        return np.hstack([np.eye(n), np.zeros((n, (A.N - 1) * A.d))])

    def sigma(self, point: Point, A: DiscreteConnection) -> np.ndarray:
        P = self.pi_matrix(A)
        Psi = self.psi_matrix(point, A)
        return P.T @ self.base.omega(point) @ P - Psi.T @ varpi_matrix(A, self.chi) @ Psi

    def generator_chart(self, point: Point, A: DiscreteConnection, xi) -> np.ndarray:
        """Chart vector (u, zeta) of the generating field of xi with xi_0 = xi_N."""
        xi = np.asarray(xi, dtype=float).reshape(A.N + 1, A.d)
        if np.abs(xi[0] - xi[-1]).max() > 1e-12:
            raise ValueError("only node fields with xi_0 = xi_N act on the pullback")
        u = self.base.action(point, xi[0])
        zeta = connection_matrix(A, self.chi) @ covariant_derivative(A, xi).ravel()
        return np.concatenate([u, zeta[A.d:A.N * A.d]])

    def generator_chart_fd(self, point: Point, A: DiscreteConnection, xi, h: float) -> np.ndarray:
        """Same vector from central differences of the group action exp(-t xi)."""
        G = self.group
        xi = np.asarray(xi, dtype=float).reshape(A.N + 1, A.d)
        X = xi[0]

        def moved(t):
            kn = np.array([G.exp(-t * x) for x in xi])
            u = _act_transitions(kn, A.transitions)
            hs = tuple(G.exp(-t * X) @ hh for hh in point)
            return u, hs

        (up, hp), (um, hm) = moved(h), moved(-h)
        a = np.array([G.coords((up[i] - um[i]) @ np.linalg.inv(A.transitions[i])) for i in range(A.N)])
        a = a / (2 * h) / A.delta
        u = np.concatenate([G.coords(np.linalg.inv(h0) @ (p1 - p2)) / (2 * h)
                            for h0, p1, p2 in zip(point, hp, hm)])
        zeta = connection_matrix(A, self.chi) @ a.ravel()
        return np.concatenate([u, zeta[A.d:A.N * A.d]])

    def moment_residual(self, point: Point, A: DiscreteConnection, xi, h: float | None = None) -> float:
        """max |i(xi_M) sigma + <d Psi, xi>| over the chart basis.

        With ``h`` the generating vector comes from finite differences.
        """
        w = self.generator_chart(point, A, xi) if h is None else self.generator_chart_fd(point, A, xi, h)
        S = self.sigma(point, A)
        Psi = self.psi_matrix(point, A)
        K = _pairing_block(self.group, A.N)
        pairing = _average(A, xi).ravel() @ K @ Psi
        return float(np.abs(w @ S + pairing).max())

    def kernel_excess(self, point: Point, A: DiscreteConnection, tol: float = 1e-8) -> int:
        """dim ker sigma beyond the chart redundancy of M."""
        S = self.sigma(point, A)
        K = _null_dim(S, tol)
        if K.shape[1] == 0:
            return 0
        proj = sla.block_diag(self.base.projection(point), np.eye((A.N - 1) * A.d))
        return int(np.linalg.matrix_rank(proj @ K, tol=tol))


def covariant_derivative_matrix_interior(A: DiscreteConnection) -> np.ndarray:
    from .holonomy import covariant_matrix

    d = A.d
    return covariant_matrix(A)[:, d:A.N * d]


def lift(M: QHamSpace, N: int, chi: str = "linear", check: bool = True,
         rng: np.random.Generator | None = None, samples: int = 8) -> LoopHamSpace:
    """Lattice Hamiltonian space over M; refuses spaces that fail the axioms."""
    if check:
        rep = check_axioms(M, samples=samples, rng=rng)
        if not rep.ok:
            raise AxiomFailure(f"{M.name} fails axioms {sorted(rep.failures)}", rep)
    return LoopHamSpace(M, N, chi)


def reduce(L: LoopHamSpace, rng: np.random.Generator | None = None) -> QHamSpace:
    """Recover (omega, Phi) from the lattice data sigma and Hol o Psi.

    At a chart point a connection over it is built, every chart vector u is
    lifted with a random gauge component, and omega is read off from
    sigma + Psi^* varpi, with varpi taken from the parallel-transport formula
    rather than from the connection form used to build sigma. Phi is the
    holonomy of that connection.
    """
    M = L.base
    rng = np.random.default_rng(0) if rng is None else rng
    G = M.group

    def data(p):
        A = L.connection_at(p, rng)
        n = M.dim
        Z = rng.standard_normal(((A.N - 1) * A.d, n))
        Wl = np.vstack([np.eye(n), Z])
        Psi = L.psi_matrix(p, A)
        full = L.sigma(p, A) + Psi.T @ varpi_transport_matrix(A) @ Psi
        return A, Wl.T @ full @ Wl, tangent_holonomy_matrix(A) @ Psi @ Wl

    return QHamSpace(G, M.chart, lambda p: data(p)[0].hol, lambda p: data(p)[2],
                     lambda p: data(p)[1], M.action, M.projection, M.logs, name=f"reduce({M.name})")


def round_trip_residual(M: QHamSpace, N: int, rng: np.random.Generator, samples: int = 4,
                        chi: str = "linear") -> dict:
    """Residuals of reduce(lift(M)) against M at random points.

    Also reports how far sigma + Psi^* varpi is from being basic, i.e. its
    contraction with pure gauge directions.
    """
    L = lift(M, N, chi, check=False)
    R = reduce(L, np.random.default_rng(int(rng.integers(2**31))))
    worst = {"omega": 0.0, "phi": 0.0, "dphi": 0.0, "basic": 0.0, "holonomy": 0.0}
    for _ in range(samples):
        p = M.random_point(rng, default_scale(M.group))
        worst["omega"] = max(worst["omega"], float(np.abs(R.omega(p) - M.omega(p)).max()))
        worst["phi"] = max(worst["phi"], float(np.abs(R.phi(p) - M.phi(p)).max()))
        worst["dphi"] = max(worst["dphi"], float(np.abs(R.dphi(p) - M.dphi(p)).max()))
        A = L.connection_at(p, rng)
        worst["holonomy"] = max(worst["holonomy"], float(np.abs(A.hol - M.phi(p)).max()))
        Psi = L.psi_matrix(p, A)
        full = L.sigma(p, A) + Psi.T @ varpi_transport_matrix(A) @ Psi
        worst["basic"] = max(worst["basic"], float(np.abs(full[M.dim:]).max()))
    return worst
