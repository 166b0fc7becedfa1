"""Matrix Lie groups with invariant metrics, and the double d = bar(g) + g.

Algebra elements are coefficient vectors in a fixed basis. Group elements
are real matrices in the chosen representation (complex groups are embedded
as real 2n x 2n matrices). The catalogue is selected by name: ``"su2"``,
``"so3"``, ``"sl2r"`` or ``"abelian:d"`` / ``"abelian:d,m1;m2;..."``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import linalg as sla

from .linalg import DEFAULT_TOL, MetrizedSpace, Subspace, TolerancePolicy, classify

__all__ = [
    "MetrizedLieAlgebra",
    "MatrixGroup",
    "DoubleAlgebra",
    "LagrangianSubalgebra",
    "graph_subalgebra",
    "bracket_closure",
    "recover_automorphism",
    "chart_derivative",
    "get_group",
    "catalogue_automorphism",
    "subalgebra_from_spec",
    "complex_to_real",
]


def complex_to_real(z: np.ndarray) -> np.ndarray:
    """Embed an n x n complex matrix as a real 2n x 2n matrix."""
    z = np.asarray(z, dtype=complex)
    return np.block([[z.real, -z.imag], [z.imag, z.real]])


def _check_level(value: float, tol: float, what: str):
    if value > tol:
        raise ValueError(f"{what} residual {value:.3e} exceeds {tol:.1e}")


class MetrizedLieAlgebra:
    """Lie algebra given by structure constants and an ad-invariant metric.

    ``structure[k, i, j]`` is the coefficient of e_k in [e_i, e_j].
    """

    def __init__(self, structure, metric, name: str = "g", check_tol: float = 1e-12):
        self.structure = np.asarray(structure, dtype=float)
        self.metric = np.asarray(metric, dtype=float)
        self.name = name
        d = self.metric.shape[0]
        if self.structure.shape != (d, d, d):
            raise ValueError("structure constants must have shape (d, d, d)")
        self.space = MetrizedSpace(self.metric)
        self.residuals = self._invariant_residuals()
        for key, val in self.residuals.items():
            _check_level(val, check_tol, key)

    @property
    def dim(self) -> int:
        return self.metric.shape[0]

    def _invariant_residuals(self) -> dict[str, float]:
        c = self.structure
        scale = max(1.0, np.abs(c).max(initial=0.0))
        antisym = np.abs(c + c.transpose(0, 2, 1)).max(initial=0.0) / scale
        # Jacobi: [e_i,[e_j,e_k]] + cyclic
        inner = np.einsum("mjk,lim->lijk", c, c)
        jac = inner + inner.transpose(0, 2, 3, 1) + inner.transpose(0, 3, 1, 2)
        jacobi = np.abs(jac).max(initial=0.0) / scale**2
        # <[x,y],z> + <y,[x,z]> = 0 for basis vectors
        lowered = np.einsum("lk,kij->lij", self.metric, c)  # <e_l, [e_i, e_j]>
        inv = lowered.transpose(2, 1, 0) + lowered.transpose(1, 2, 0)
        adinv = np.abs(inv).max(initial=0.0) / (scale * max(1.0, np.abs(self.metric).max()))
        return {"antisymmetry": antisym, "jacobi": jacobi, "ad-invariance": adinv}

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("kij,i...,j...->k...", self.structure, np.asarray(x), np.asarray(y))

    def ad(self, x) -> np.ndarray:
        """Matrix of y -> [x, y]."""
        return np.einsum("kij,i->kj", self.structure, np.asarray(x))

    def inner(self, x, y) -> float:
        return np.asarray(x) @ self.metric @ np.asarray(y)

    def random(self, rng: np.random.Generator, scale: float = 1.0, size=None) -> np.ndarray:
        shape = (self.dim,) if size is None else (*np.atleast_1d(size), self.dim)
        return scale * rng.standard_normal(shape)


class MatrixGroup:
    """Connected matrix Lie group with a bi-invariant metric on its algebra."""

    def __init__(self, name: str, basis, metric=None, trace_coeff: float | None = None,
                 tol: TolerancePolicy = DEFAULT_TOL):
        basis = np.asarray(basis, dtype=float)
        self.name = name
        self.basis = basis
        self.n = basis.shape[1]
        self.tol = tol
        d = basis.shape[0]
        self._flat = basis.reshape(d, -1).T
        self._pinv = np.linalg.pinv(self._flat)
        if metric is None:
            metric = trace_coeff * np.einsum("iab,jba->ij", basis, basis)
        structure = np.empty((d, d, d))
        for i in range(d):
            for j in range(d):
                comm = basis[i] @ basis[j] - basis[j] @ basis[i]
                structure[:, i, j] = self.coords(comm)
        self.algebra = MetrizedLieAlgebra(structure, metric, name=name)

    @property
    def dim(self) -> int:
        return self.algebra.dim

    # -- algebra <-> matrices

    def matrix(self, x) -> np.ndarray:
        return np.tensordot(np.asarray(x, dtype=float), self.basis, axes=(-1, 0))

    def coords(self, m, check: bool = False) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        flat = m.reshape(*m.shape[:-2], -1)
        x = flat @ self._pinv.T
        if check:
            res = np.abs(self.matrix(x) - m).max(initial=0.0) / max(1.0, np.abs(m).max(initial=0.0))
            if res > 1e-9:
                raise ValueError(f"matrix is not in the Lie algebra (residual {res:.3e})")
        return x

    # -- group operations

    def identity(self) -> np.ndarray:
        return np.eye(self.n)

    def exp(self, x) -> np.ndarray:
        return sla.expm(self.matrix(x))

    def log(self, g) -> np.ndarray:
        """Principal logarithm; only valid near the identity."""
        X = sla.logm(np.asarray(g, dtype=float))
        if np.iscomplexobj(X):
            if np.abs(X.imag).max() > 1e-9:
                raise ValueError("group element outside the principal logarithm domain")
            X = X.real
        ev = np.linalg.eigvals(X)
        if np.abs(ev.imag).max(initial=0.0) >= np.pi:
            raise ValueError("logarithm requested outside |Im spec| < pi")
        return self.coords(X, check=True)

    def inv(self, g) -> np.ndarray:
        return np.linalg.inv(g)

    def Ad(self, g) -> np.ndarray:
        """Matrix of x -> g x g^{-1} on coefficient vectors."""
        ginv = np.linalg.inv(g)
        return self.coords(np.einsum("ab,kbc,cd->kad", g, self.basis, ginv)).T

    def ad(self, x) -> np.ndarray:
        return self.algebra.ad(x)

    def bracket(self, x, y) -> np.ndarray:
        return self.algebra.bracket(x, y)

    def inner(self, x, y) -> float:
        return self.algebra.inner(x, y)

    def random_element(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return self.exp(self.algebra.random(rng, scale))

    def membership_residual(self, g) -> float:
        """Violation of the defining equations of the catalogue group."""
        g = np.asarray(g, dtype=float)
        if self.name in ("su2", "so3"):
            res = np.abs(g.T @ g - np.eye(self.n)).max()
            if self.name == "su2":
                J = complex_to_real(1j * np.eye(2))
                z = g[:2, :2] + 1j * g[2:, :2]
                res = max(res, np.abs(g @ J - J @ g).max(), abs(np.linalg.det(z) - 1))
            else:
                res = max(res, abs(np.linalg.det(g) - 1))
            return float(res)
        if self.name == "sl2r":
            return float(abs(np.linalg.det(g) - 1))
        off = g - np.diag(np.diag(g))
        return float(max(np.abs(off).max(), max(0.0, -np.diag(g).min())))

    def maurer_cartan(self, g, v) -> tuple[np.ndarray, np.ndarray]:
        """Left and right trivialisations g^{-1} v and v g^{-1} of a tangent vector."""
        ginv = np.linalg.inv(g)
        return self.coords(ginv @ v, check=True), self.coords(v @ ginv, check=True)

    @cached_property
    def double(self) -> "DoubleAlgebra":
        return DoubleAlgebra(self.algebra)

    def __repr__(self):
        return f"MatrixGroup({self.name}, dim={self.dim})"


# -- catalogue

_SIGMA = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)


def _su2() -> MatrixGroup:
    # e_k = -i sigma_k / 2, so [e_1, e_2] = e_3 and -2 tr_C(e_i e_j) = delta_ij
    basis = np.array([complex_to_real(-0.5j * s) for s in _SIGMA])
    # the real trace of the embedding is twice the real part of the complex trace
    return MatrixGroup("su2", basis, trace_coeff=-1.0)


def _so3() -> MatrixGroup:
    basis = np.zeros((3, 3, 3))
    for k in range(3):
        for i in range(3):
            for j in range(3):
                basis[k, i, j] = -_levi(k, i, j)
    return MatrixGroup("so3", basis, trace_coeff=-0.5)


def _levi(i, j, k) -> float:
    return float((i - j) * (j - k) * (k - i) / 2)


def _sl2r() -> MatrixGroup:
    H = np.array([[1.0, 0], [0, -1]])
    E = np.array([[0.0, 1], [0, 0]])
    F = np.array([[0.0, 0], [1, 0]])
    return MatrixGroup("sl2r", np.array([H, E, F]), trace_coeff=1.0)


def _abelian(spec: str) -> MatrixGroup:
    head, _, rest = spec.partition(",")
    d = int(head)
    if rest:
        rows = [[float(v) for v in row.split()] for row in rest.split(";")]
        metric = np.array(rows)
        if metric.ndim == 2 and metric.shape[0] == 1 and d > 1:
            metric = np.diag(metric[0])
    else:
        metric = np.eye(d)
    if metric.shape != (d, d):
        raise ValueError(f"abelian metric must be {d}x{d}")
    basis = np.zeros((d, d, d))
    for k in range(d):
        basis[k, k, k] = 1.0
    return MatrixGroup(f"abelian:{spec}", basis, metric=metric)


_CACHE: dict[str, MatrixGroup] = {}


def get_group(name: str) -> MatrixGroup:
    """Look up a catalogue group by name."""
    if name not in _CACHE:
        if name == "su2":
            _CACHE[name] = _su2()
        elif name == "so3":
            _CACHE[name] = _so3()
        elif name == "sl2r":
            _CACHE[name] = _sl2r()
        elif name.startswith("abelian:"):
            _CACHE[name] = _abelian(name.split(":", 1)[1])
        else:
            raise ValueError(f"unknown group {name!r}")
    return _CACHE[name]


# -- the double

class DoubleAlgebra:
    """d = bar(g) + g with metric diag(-B, B); elements stacked as (X0, X1)."""

    def __init__(self, g: MetrizedLieAlgebra):
        self.g = g
        d = g.dim
        structure = np.zeros((2 * d, 2 * d, 2 * d))
        structure[:d, :d, :d] = g.structure
        structure[d:, d:, d:] = g.structure
        self.algebra = MetrizedLieAlgebra(structure, sla.block_diag(-g.metric, g.metric),
                                          name=f"double({g.name})")
        self.space = self.algebra.space

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def split(self, Y):
        d = self.g.dim
        Y = np.asarray(Y)
        return Y[..., :d], Y[..., d:]

    def join(self, Y0, Y1) -> np.ndarray:
        return np.concatenate([np.asarray(Y0, dtype=float), np.asarray(Y1, dtype=float)], axis=-1)

    def bracket(self, x, y):
        return self.algebra.bracket(x, y)

    def inner(self, x, y):
        return self.algebra.inner(x, y)

    def diagonal(self) -> Subspace:
        d = self.g.dim
        return Subspace(self.space, np.vstack([np.eye(d), np.eye(d)]))

    def zero(self) -> Subspace:
        return self.space.zero()

    def whole(self) -> Subspace:
        return self.space.whole()


@dataclass(frozen=True)
class LagrangianSubalgebra:
    """Lagrangian subspace of the double that is closed under the bracket."""

    double: DoubleAlgebra
    subspace: Subspace
    closure: float
    name: str = "s"

    @classmethod
    def from_subspace(cls, double: DoubleAlgebra, s: Subspace, name: str = "s",
                      require: bool = True) -> "LagrangianSubalgebra":
        closure = bracket_closure(double, s)
        if require:
            if classify(s) != "lagrangian":
                raise ValueError(f"subspace {name} is not Lagrangian")
            if closure > s.tol.eq_tol:
                raise ValueError(f"subspace {name} is not bracket closed ({closure:.3e})")
        return cls(double, s, closure, name)

    @property
    def basis(self) -> np.ndarray:
        return self.subspace.basis


def bracket_closure(double: DoubleAlgebra, s: Subspace) -> float:
    """max || proj_{s-complement} [x, y] || over basis pairs of s."""
    B = s.basis
    if B.shape[1] == 0:
        return 0.0
    br = np.einsum("kij,ia,jb->kab", double.algebra.structure, B, B).reshape(B.shape[0], -1)
    rest = br - B @ (B.T @ br)
    return float(np.abs(rest).max(initial=0.0))


def graph_subalgebra(double: DoubleAlgebra, kappa, name: str = "graph",
                     tol: float = 1e-10) -> LagrangianSubalgebra:
    """gr(kappa) = {(kappa X, X)} for an orthogonal automorphism kappa."""
    g = double.g
    kappa = np.asarray(kappa, dtype=float)
    orth = np.abs(kappa.T @ g.metric @ kappa - g.metric).max()
    lhs = np.einsum("ak,kij->aij", kappa, g.structure)
    rhs = np.einsum("kab,ai,bj->kij", g.structure, kappa, kappa)
    hom = np.abs(lhs - rhs).max(initial=0.0)
    if orth > tol:
        raise ValueError(f"kappa is not orthogonal (residual {orth:.3e})")
    if hom > tol:
        raise ValueError(f"kappa does not preserve brackets (residual {hom:.3e})")
    s = Subspace(double.space, np.vstack([kappa, np.eye(g.dim)]))
    return LagrangianSubalgebra.from_subspace(double, s, name=name)


def recover_automorphism(s: LagrangianSubalgebra) -> np.ndarray:
    """Invert a graph subalgebra: return kappa with s = gr(kappa)."""
    B = s.basis
    d = B.shape[0] // 2
    top, bottom = B[:d], B[d:]
    return top @ np.linalg.inv(bottom)


def catalogue_automorphism(group: MatrixGroup, which: str, seed: int = 0) -> np.ndarray:
    """Named orthogonal automorphisms: 'id', 'ad' (Ad_h, seeded h), 'conj'."""
    d = group.dim
    if which == "id":
        return np.eye(d)
    if which == "ad":
        h = group.random_element(np.random.default_rng(seed), scale=0.8)
        return group.Ad(h)
    if which == "conj":
        if group.name == "su2":
            # complex conjugation of -i sigma_k / 2
            return np.diag([-1.0, 1.0, -1.0])
        if group.name == "so3":
            return np.diag([-1.0, 1.0, -1.0])
        if group.name == "sl2r":
            # X -> -X^T sends H -> -H, E -> -F, F -> -E
            return np.array([[-1.0, 0, 0], [0, 0, -1], [0, -1, 0]])
        # abelian: reflection in the metric, which preserves the zero bracket
        v = np.zeros(d)
        v[0] = 1.0
        B = group.algebra.metric
        return np.eye(d) - 2 * np.outer(v, v @ B) / (v @ B @ v)
    raise ValueError(f"unknown automorphism {which!r}")


def subalgebra_from_spec(group: MatrixGroup, spec: str, seed: int = 0) -> Subspace:
    """Subspace of the double named by a config string.

    'zero', 'diagonal', 'full', 'graph:<id|ad|conj>' and 'random:<k>'.
    Only the Lagrangian ones are subalgebras; the others are plain subspaces.
    """
    D = group.double
    if spec == "zero":
        return D.zero()
    if spec == "diagonal":
        return D.diagonal()
    if spec == "full":
        return D.whole()
    if spec.startswith("graph:"):
        kappa = catalogue_automorphism(group, spec.split(":", 1)[1], seed)
        return graph_subalgebra(D, kappa, name=spec).subspace
    if spec.startswith("random"):
        _, _, k = spec.partition(":")
        rng = np.random.default_rng(seed)
        k = int(k) if k else int(rng.integers(1, D.dim))
        return Subspace(D.space, rng.standard_normal((D.dim, k)))
    raise ValueError(f"unknown subalgebra spec {spec!r}")


def chart_derivative(f: Callable[[np.ndarray], np.ndarray], group: MatrixGroup, g, X,
                     step: float | None = None, richardson: bool = False):
    """Central difference of t -> f(g exp(tX)) at t = 0.

    With ``richardson=True`` the h and h/2 differences are combined into a
    fourth-order estimate.
    """
    h = group.tol.fd_step if step is None else step
    g = np.asarray(g)

    def central(hh):
        fp = np.asarray(f(g @ group.exp(hh * np.asarray(X))))
        fm = np.asarray(f(g @ group.exp(-hh * np.asarray(X))))
        return (fp - fm) / (2 * hh)

    d1 = central(h)
    if not richardson:
        return d1
    d2 = central(h / 2)
    return (4 * d2 - d1) / 3
