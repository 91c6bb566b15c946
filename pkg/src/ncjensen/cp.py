"""Concrete ucp maps into ``M_k`` and the subspace calculus used on dilations.

Three representations of ucp maps are provided:

* :class:`OVMeasure` -- a finitely supported operator-valued measure on an
  interval, i.e. a ucp map ``C(I) -> M_k``;
* :class:`ChoiMap` -- a ucp map ``M_n -> M_k`` stored by its Choi matrix;
* :class:`CompressedPointEval` -- ``f -> alpha^* f(y) alpha`` for a finite
  representation ``y`` and an isometry ``alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ncalg import DimensionError, MatrixTuple, NCPoly, evaluate_poly, is_hermitian

RANK_TOL = 1e-10
PSD_TOL = 1e-8


class PSDError(ValueError):
    """A matrix that must be positive semidefinite has a negative eigenvalue
    beyond tolerance."""


class ContainmentError(ValueError):
    """A subspace that must be contained in another is not."""


def psd_eps(a: np.ndarray) -> float:
    return PSD_TOL * (1 + np.linalg.norm(a, 2))


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues down to ``-eps`` are clipped."""
    a = (a + a.conj().T) / 2
    ev, U = np.linalg.eigh(a)
    if ev.min() < -psd_eps(a):
        raise PSDError(f"matrix has eigenvalue {ev.min():.3e}")
    return (U * np.sqrt(np.clip(ev, 0, None))) @ U.conj().T


def polyval(coeffs: Sequence[float], t) -> np.ndarray:
    return np.polynomial.polynomial.polyval(t, np.asarray(coeffs, dtype=float))


# ---------------------------------------------------------------------------
# matrix encoding shared by the JSON formats
# ---------------------------------------------------------------------------

def encode_matrix(m: np.ndarray) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[z.real, z.imag] for z in row] for row in m]


def decode_matrix(rows) -> np.ndarray:
    """Nested rows whose entries are numbers or ``[re, im]`` pairs."""
    out = []
    for row in rows:
        if not isinstance(row, list):
            raise ValueError("matrix rows must be lists")
        out.append([complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in row])
    m = np.array(out, dtype=complex)
    if m.ndim != 2:
        raise ValueError("ragged matrix")
    return m


# ---------------------------------------------------------------------------
# operator-valued measures
# ---------------------------------------------------------------------------

@dataclass
class OVMeasure:
    """``q -> sum_j q(t_j) Q_j`` with ``Q_j >= 0`` and ``sum_j Q_j = I_k``."""
    t: np.ndarray
    Q: np.ndarray
    interval: Optional[Tuple[float, float]] = None
    algebra: int = 0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).ravel()
        Q = np.asarray(self.Q, dtype=complex)
        if Q.ndim == 1:
            Q = Q[:, None, None]
        self.Q = Q
        if Q.shape[0] != self.t.size or Q.ndim != 3 or Q.shape[1] != Q.shape[2]:
            raise DimensionError("need one k x k weight per atom")
        if self.t.size == 0:
            raise ValueError("an OVMeasure needs at least one atom")
        if len(set(self.t.tolist())) != self.t.size:
            raise ValueError("atoms must be distinct")
        for j, q in enumerate(Q):
            if not is_hermitian(q, PSD_TOL) or np.linalg.eigvalsh((q + q.conj().T) / 2).min() < -psd_eps(q):
                raise PSDError(f"atom {j} weight is not PSD")
        if np.linalg.norm(Q.sum(axis=0) - np.eye(self.k), 2) > PSD_TOL:
            raise ValueError("atom weights do not sum to the identity")
        if self.interval is not None:
            lo, hi = self.interval
            if self.t.min() < lo - RANK_TOL or self.t.max() > hi + RANK_TOL:
                raise ValueError("atom outside the interval")
            self.interval = (float(lo), float(hi))

    @property
    def k(self) -> int:
        return self.Q.shape[1]

    @classmethod
    def scalar(cls, t, w, interval=None, algebra: int = 0) -> "OVMeasure":
        return cls(np.asarray(t, float), np.asarray(w, float)[:, None, None], interval, algebra)

    def to_json(self) -> dict:
        d = {"k": self.k, "atoms": [{"t": float(t), "Q": encode_matrix(q)} for t, q in zip(self.t, self.Q)]}
        if self.interval is not None:
            d["interval"] = list(self.interval)
        return d

    @classmethod
    def from_json(cls, data: dict, algebra: int = 0) -> "OVMeasure":
        t = [a["t"] for a in data["atoms"]]
        Q = [np.atleast_2d(decode_matrix(a["Q"]) if isinstance(a["Q"], list) else np.array([[a["Q"]]]))
             for a in data["atoms"]]
        m = cls(t, np.array(Q), tuple(data["interval"]) if "interval" in data else None, algebra)
        if "k" in data and data["k"] != m.k:
            raise DimensionError(f"declared k={data['k']} but weights are {m.k}x{m.k}")
        return m


def measure_apply(m: OVMeasure, q: Sequence[float]) -> np.ndarray:
    vals = polyval(q, m.t)
    return np.einsum("j,jab->ab", vals.astype(complex), m.Q)


def naimark_dilate(m: OVMeasure) -> Tuple[np.ndarray, np.ndarray]:
    """Naimark dilation of an operator-valued measure.

    Returns ``(nodes, V)``: the dilated generator is the block diagonal
    ``diag(t_1 I_k, ..., t_s I_k)`` (``nodes`` holds its diagonal, length
    ``k s``) and ``V = [Q_1^{1/2}; ...; Q_s^{1/2}]`` is an isometry with
    ``V^* q(Y) V = measure_apply(m, q)``.
    """
    V = np.vstack([psd_sqrt(q) for q in m.Q])
    nodes = np.repeat(m.t, m.k)
    return nodes, V


def naimark_generator(m: OVMeasure) -> np.ndarray:
    nodes, _ = naimark_dilate(m)
    return np.diag(nodes.astype(complex))


# ---------------------------------------------------------------------------
# Choi maps
# ---------------------------------------------------------------------------

@dataclass
class ChoiMap:
    """ucp ``M_n -> M_k``; ``choi[u*k:(u+1)*k, v*k:(v+1)*k] = mu(E_uv)``."""
    n: int
    k: int
    choi: np.ndarray

    def __post_init__(self):
        self.choi = np.asarray(self.choi, dtype=complex)
        if self.choi.shape != (self.n * self.k, self.n * self.k):
            raise DimensionError("Choi matrix must be (n k) x (n k)")
        c = self.choi
        if not is_hermitian(c, PSD_TOL) or np.linalg.eigvalsh((c + c.conj().T) / 2).min() < -psd_eps(c):
            raise PSDError("Choi matrix is not PSD: map is not completely positive")
        if np.linalg.norm(sum(self.block(u, u) for u in range(self.n)) - np.eye(self.k), 2) > PSD_TOL:
            raise ValueError("map is not unital")

    def block(self, u: int, v: int) -> np.ndarray:
        k = self.k
        return self.choi[u * k:(u + 1) * k, v * k:(v + 1) * k]

    @classmethod
    def from_map(cls, fn, n: int, k: int) -> "ChoiMap":
        blocks = [[None] * n for _ in range(n)]
        for u in range(n):
            for v in range(n):
                E = np.zeros((n, n), complex)
                E[u, v] = 1
                blocks[u][v] = np.atleast_2d(fn(E))
        return cls(n, k, np.block(blocks))

    @classmethod
    def identity(cls, n: int) -> "ChoiMap":
        return cls.from_map(lambda a: a, n, n)

    @classmethod
    def normalized_trace(cls, n: int) -> "ChoiMap":
        return cls.from_map(lambda a: np.array([[np.trace(a) / n]]), n, 1)

    @classmethod
    def from_state(cls, rho: np.ndarray) -> "ChoiMap":
        rho = np.asarray(rho, complex)
        return cls.from_map(lambda a: np.array([[np.trace(rho @ a)]]), rho.shape[0], 1)

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "choi": encode_matrix(self.choi)}

    @classmethod
    def from_json(cls, data: dict) -> "ChoiMap":
        return cls(data["n"], data["k"], decode_matrix(data["choi"]))


def choi_apply(c: ChoiMap, a) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.shape != (c.n, c.n):
        raise DimensionError(f"input must be {c.n}x{c.n}")
    blocks = c.choi.reshape(c.n, c.k, c.n, c.k)
    return np.einsum("uv,uavb->ab", a, blocks)


# ---------------------------------------------------------------------------
# finite representations and subspaces
# ---------------------------------------------------------------------------

@dataclass
class FiniteRep:
    """A *-representation of the free product on ``C^N`` given by one
    Hermitian generator per interval algebra."""
    generators: Dict[int, np.ndarray]

    def __post_init__(self):
        self.generators = {int(i): np.atleast_2d(np.asarray(y, dtype=complex))
                           for i, y in sorted(self.generators.items())}
        dims = {y.shape for y in self.generators.values()}
        if len(dims) != 1:
            raise DimensionError("generators must share one square shape")
        for i, y in self.generators.items():
            if not is_hermitian(y):
                raise ValueError(f"generator {i} is not Hermitian")

    @property
    def N(self) -> int:
        return next(iter(self.generators.values())).shape[0]

    @property
    def indices(self) -> List[int]:
        return list(self.generators)

    def point(self) -> MatrixTuple:
        return MatrixTuple(dict(self.generators))

    def to_json(self) -> dict:
        return {"N": self.N, "generators": {str(i): encode_matrix(y) for i, y in self.generators.items()}}

    @classmethod
    def from_json(cls, data: dict) -> "FiniteRep":
        rep = cls({int(i): decode_matrix(y) for i, y in data["generators"].items()})
        if "N" in data and data["N"] != rep.N:
            raise DimensionError(f"declared N={data['N']} but generators are {rep.N}x{rep.N}")
        return rep


def orth(vectors: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column span; rank cut at ``tol * sigma_max``."""
    vectors = np.asarray(vectors, dtype=complex)
    if vectors.size == 0 or vectors.shape[1] == 0:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    U, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s[0] == 0:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    r = int(np.sum(s >= tol * s[0]))
    return U[:, :r]


@dataclass
class Subspace:
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim == 1:
            b = b[:, None]
        self.basis = b
        if np.linalg.norm(b.conj().T @ b - np.eye(b.shape[1])) > 1e-10:
            raise ValueError("basis columns are not orthonormal")

    @classmethod
    def span(cls, vectors, ambient: Optional[int] = None) -> "Subspace":
        v = np.asarray(vectors, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[1] == 0 and ambient is not None:
            v = np.zeros((ambient, 0), complex)
        return cls(orth(v))

    @classmethod
    def full(cls, N: int) -> "Subspace":
        return cls(np.eye(N, dtype=complex))

    @classmethod
    def zero(cls, N: int) -> "Subspace":
        return cls(np.zeros((N, 0), dtype=complex))

    @classmethod
    def coordinate(cls, N: int, idx: Sequence[int]) -> "Subspace":
        return cls(np.eye(N, dtype=complex)[:, list(idx)])

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def contains(self, other: "Subspace", tol: float = 1e-9) -> bool:
        if other.dim == 0:
            return True
        resid = other.basis - self.basis @ (self.basis.conj().T @ other.basis)
        return np.linalg.norm(resid, 2) <= tol

    def equals(self, other: "Subspace", tol: float = 1e-10) -> bool:
        return self.dim == other.dim and np.linalg.norm(self.projector - other.projector, 2) <= tol

    def to_json(self) -> list:
        return [[[z.real, z.imag] for z in col] for col in self.basis.T]

    @classmethod
    def from_json(cls, cols, ambient: Optional[int] = None) -> "Subspace":
        if not cols:
            if ambient is None:
                raise ValueError("empty subspace needs its ambient dimension")
            return cls.zero(ambient)
        return cls.span(decode_matrix(cols).T)


def is_reducing(s: Subspace, rep: FiniteRep, alg: int, tol: float = 1e-9) -> bool:
    y = rep.generators[alg]
    if y.shape[0] != s.ambient:
        raise DimensionError("subspace and representation live in different spaces")
    return reducing_defect(s, y) <= tol * (1 + np.linalg.norm(y, 2))


def reducing_defect(s: Subspace, y: np.ndarray) -> float:
    """``||(I - P) y P||``; for Hermitian ``y`` zero exactly when ``s`` reduces ``y``."""
    if s.dim == 0:
        return 0.0
    yb = y @ s.basis
    return float(np.linalg.norm(yb - s.basis @ (s.basis.conj().T @ yb), 2))


def closure_under(s: Subspace, rep: FiniteRep, alg: int) -> Subspace:
    """Smallest subspace containing ``s`` and invariant under the generator ``alg``."""
    y = rep.generators[alg]
    cur = s
    for _ in range(rep.N + 1):
        nxt = Subspace(orth(np.hstack([cur.basis, y @ cur.basis])))
        if nxt.dim == cur.dim:
            return nxt
        cur = nxt
    return cur


def closure_under_all(s: Subspace, rep: FiniteRep) -> Subspace:
    cur = s
    while True:
        nxt = Subspace(orth(np.hstack([cur.basis] + [y @ cur.basis for y in rep.generators.values()])))
        if nxt.dim == cur.dim:
            return nxt
        cur = nxt


def complement_within(big: Subspace, small: Subspace, tol: float = 1e-9) -> Subspace:
    """Orthonormal basis of ``big`` minus ``small``."""
    if not big.contains(small, tol):
        raise ContainmentError("small subspace is not contained in big subspace")
    resid = big.basis - small.basis @ (small.basis.conj().T @ big.basis)
    want = big.dim - small.dim
    if want == 0:
        return Subspace.zero(big.ambient)
    U, _, _ = np.linalg.svd(resid, full_matrices=False)
    return Subspace(U[:, :want])


def restrict_rep(rep: FiniteRep, s: Subspace) -> FiniteRep:
    """Compression of every generator to ``s`` (in the coordinates of ``s.basis``)."""
    b = s.basis
    return FiniteRep({i: b.conj().T @ y @ b for i, y in rep.generators.items()})


def minimal_part(rep: FiniteRep, H: Subspace) -> Tuple[Subspace, bool]:
    """The cyclic subspace generated by ``H``; the flag reports truncation,
    i.e. that the representation space was larger than the minimal dilation."""
    M = closure_under_all(H, rep)
    return M, M.dim < rep.N


@dataclass
class CompressedPointEval:
    """The ucp map ``f -> alpha^* f(y) alpha``."""
    rep: FiniteRep
    isometry: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.isometry, dtype=complex)
        if a.ndim == 1:
            a = a[:, None]
        self.isometry = a
        if a.shape[0] != self.rep.N:
            raise DimensionError("isometry rows must match the representation dimension")
        if np.linalg.norm(a.conj().T @ a - np.eye(a.shape[1])) > 1e-10:
            raise ValueError("alpha^* alpha != I")

    @property
    def k(self) -> int:
        return self.isometry.shape[1]

    @property
    def range(self) -> Subspace:
        return Subspace(self.isometry)

    def barycenter(self) -> MatrixTuple:
        a = self.isometry
        return MatrixTuple({i: a.conj().T @ y @ a for i, y in self.rep.generators.items()})

    def to_json(self) -> dict:
        return {"rep": self.rep.to_json(), "isometry": encode_matrix(self.isometry)}

    @classmethod
    def from_json(cls, data: dict) -> "CompressedPointEval":
        return cls(FiniteRep.from_json(data["rep"]), decode_matrix(data["isometry"]))


def compress(rep: FiniteRep, alpha, p: NCPoly) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.ndim == 1:
        alpha = alpha[:, None]
    if alpha.shape[0] != rep.N:
        raise DimensionError("isometry rows must match the representation dimension")
    return alpha.conj().T @ evaluate_poly(p, rep.point()) @ alpha


@dataclass
class DilationChain:
    """Nested subspaces ``H_0 <= H_1 <= ... <= H_m`` of a finite representation."""
    rep: FiniteRep
    spaces: List[Subspace] = field(default_factory=list)
    steps: List[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.spaces:
            raise ValueError("a chain needs at least its initial space")
        for a, b in zip(self.spaces, self.spaces[1:]):
            if not b.contains(a):
                raise ContainmentError("chain spaces are not nested")

    def to_json(self) -> dict:
        return {"dims": [s.dim for s in self.spaces], "steps": list(self.steps),
                "spaces": [s.to_json() for s in self.spaces]}
