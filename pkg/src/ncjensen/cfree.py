"""Conditionally free products of ucp maps and the structure of their dilations.

Given ucp maps ``mu_i : A_i -> M_k`` and states ``phi_i`` on each factor, the
c-free product ``mu`` is the unique map on the free product that restricts to
``mu_i`` on ``A_i`` and satisfies the multiplication rule

    mu(a_1 ... a_m) = mu(a_1) ... mu(a_m)

on reduced words whose letters are all ``phi``-centered.  A general word is
evaluated by splitting each letter as ``a = (a - phi(a)) + phi(a) 1`` and
recursing; values are memoized on the canonical reduced word.
"""
from __future__ import annotations

import itertools
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cp import (RANK_TOL, ChoiMap, CompressedPointEval, ContainmentError, DilationChain,
                 FiniteRep, OVMeasure, PSDError, Subspace, choi_apply, closure_under,
                 complement_within, measure_apply, minimal_part, orth, psd_eps, reducing_defect)
from .ncalg import (AlgebraSpec, DimensionError, IntervalAlgebra, Letter, MatrixAlgebra,
                    MatrixTuple, NCPoly, NCWord, NotReducedError, check_family, min_membership)

UcpMap = Union[OVMeasure, ChoiMap]
Pattern = Tuple[int, ...]

# a letter together with a flag telling whether it stands for its centered part
_Item = Tuple[Letter, bool]


class CompletePositivityError(PSDError):
    """The truncated GNS Gram matrix of a c-free functional is not PSD."""


class MembershipError(ValueError):
    """A barycenter component falls outside its interval."""


# ---------------------------------------------------------------------------
# the functional
# ---------------------------------------------------------------------------

class CFreeFunctional:
    """The ``(phi_i)``-conditionally free product of the ucp maps ``mu_i``.

    The memo table is guarded by a lock, so one instance can be shared
    between threads; every cached value equals a fresh recomputation.
    """

    def __init__(self, algebras: Sequence[AlgebraSpec], ucp_maps: Sequence[UcpMap],
                 states: Sequence[UcpMap], memoize: bool = True):
        check_family(algebras)
        if not (len(algebras) == len(ucp_maps) == len(states)):
            raise ValueError("need one ucp map and one state per algebra")
        ks = {m.k for m in ucp_maps}
        if len(ks) != 1:
            raise DimensionError(f"ucp maps have different target sizes {sorted(ks)}")
        for alg, mu, phi in zip(algebras, ucp_maps, states):
            if phi.k != 1:
                raise DimensionError(f"state for algebra {alg.index} is not scalar valued")
            for m in (mu, phi):
                if isinstance(alg, IntervalAlgebra) != isinstance(m, OVMeasure):
                    raise TypeError(f"algebra {alg.index}: interval algebras take OVMeasures, "
                                    "matrix algebras take ChoiMaps")
                if isinstance(alg, MatrixAlgebra) and m.n != alg.n:
                    raise DimensionError(f"algebra {alg.index}: ChoiMap source is M_{m.n}")
                if isinstance(alg, IntervalAlgebra):
                    if m.t.min() < alg.lo - RANK_TOL or m.t.max() > alg.hi + RANK_TOL:
                        raise ValueError(f"algebra {alg.index}: measure has atoms outside "
                                         f"[{alg.lo}, {alg.hi}]")
        self.algebras = list(algebras)
        self.ucp_maps = list(ucp_maps)
        self.states = list(states)
        self.k = ks.pop()
        self.memoize = memoize
        self.memo: Dict[tuple, np.ndarray] = {}
        self._lock = threading.RLock()
        self._mu_cache: Dict[tuple, np.ndarray] = {}
        self._phi_cache: Dict[tuple, complex] = {}

    @property
    def d(self) -> int:
        return len(self.algebras)

    # -- letters ------------------------------------------------------------
    def mu_letter(self, l: Letter) -> np.ndarray:
        v = self._mu_cache.get(l.key)
        if v is None:
            m = self.ucp_maps[l.alg]
            v = measure_apply(m, l.poly) if l.poly is not None else choi_apply(m, l.mat)
            self._mu_cache[l.key] = v
        return v

    def phi_letter(self, l: Letter) -> complex:
        v = self._phi_cache.get(l.key)
        if v is None:
            s = self.states[l.alg]
            v = complex((measure_apply(s, l.poly) if l.poly is not None else choi_apply(s, l.mat))[0, 0])
            self._phi_cache[l.key] = v
        return v

    def centered_value(self, l: Letter) -> np.ndarray:
        return self.mu_letter(l) - self.phi_letter(l) * np.eye(self.k)

    def _materialize(self, item: _Item) -> Letter:
        l, centered = item
        return l.shifted(self.phi_letter(l)) if centered else l

    def _reduce_items(self, items: Sequence[_Item]) -> Tuple[Tuple[_Item, ...], complex]:
        scalar: complex = 1.0
        out: List[_Item] = []
        for it in items:
            while out and out[-1][0].alg == it[0].alg:
                merged = self._materialize(out.pop()).times(self._materialize(it))
                c = merged.constant_value()
                if c is not None:
                    scalar *= c
                    it = None
                    break
                it = (merged, False)
            if it is not None:
                out.append(it)
        return tuple(out), scalar

    # -- words --------------------------------------------------------------
    def _eval_items(self, items: Tuple[_Item, ...]) -> np.ndarray:
        if not items:
            return np.eye(self.k, dtype=complex)
        key = tuple((l.key, c) for l, c in items)
        if self.memoize:
            with self._lock:
                hit = self.memo.get(key)
            if hit is not None:
                return hit
        pos = next((j for j, (_, c) in enumerate(items) if not c), None)
        if pos is None:
            val = np.eye(self.k, dtype=complex)
            for l, _ in items:
                val = val @ self.centered_value(l)
        else:
            l = items[pos][0]
            val = self._eval_items(items[:pos] + ((l, True),) + items[pos + 1:])
            c = self.phi_letter(l)
            if c != 0:
                rest, s = self._reduce_items(items[:pos] + items[pos + 1:])
                if s != 0:
                    val = val + (c * s) * self._eval_items(rest)
        if self.memoize:
            val.setflags(write=False)
            with self._lock:
                self.memo[key] = val
        return val

    def evaluate(self, w: NCWord) -> np.ndarray:
        for l in w.letters:
            if l.alg >= self.d:
                raise DimensionError(f"word uses unknown algebra {l.alg}")
            if isinstance(self.algebras[l.alg], MatrixAlgebra) != l.is_matrix:
                raise DimensionError(f"letter payload does not fit algebra {l.alg}")
            if l.is_matrix and l.mat.shape[0] != self.algebras[l.alg].n:
                raise DimensionError(f"algebra {l.alg} expects {self.algebras[l.alg].n}x"
                                     f"{self.algebras[l.alg].n} payloads")
        if not w.is_reduced():
            raise NotReducedError("cfree_evaluate needs a reduced alternating word")
        return np.array(self._eval_items(tuple((l, False) for l in w.letters)))

    def evaluate_poly(self, p: NCPoly) -> np.ndarray:
        out = np.zeros((self.k, self.k), dtype=complex)
        for w, c in p.terms.items():
            out += c * self.evaluate(w)
        return out

    def barycenter(self, tol: float = 1e-10) -> MatrixTuple:
        entries = {}
        for alg, mu in zip(self.algebras, self.ucp_maps):
            if not isinstance(alg, IntervalAlgebra):
                raise TypeError("barycenter needs interval algebras only")
            x = measure_apply(mu, (0.0, 1.0))
            if not min_membership(x, alg.lo, alg.hi, tol):
                raise MembershipError(f"mu_{alg.index}(t) has spectrum outside [{alg.lo}, {alg.hi}]")
            entries[alg.index] = x
        return MatrixTuple(entries)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        algs = []
        for a in self.algebras:
            algs.append({"index": a.index, "interval": [a.lo, a.hi]} if isinstance(a, IntervalAlgebra)
                        else {"index": a.index, "matrix": a.n})
        return {"algebras": algs,
                "ucp": [m.to_json() for m in self.ucp_maps],
                "states": [s.to_json() for s in self.states]}

    @classmethod
    def from_json(cls, data: dict) -> "CFreeFunctional":
        algebras: List[AlgebraSpec] = []
        for a in data["algebras"]:
            if "interval" in a:
                algebras.append(IntervalAlgebra(a["index"], *a["interval"]))
            else:
                algebras.append(MatrixAlgebra(a["index"], a["matrix"]))

        def load(item, alg):
            if isinstance(alg, MatrixAlgebra):
                return ChoiMap.from_json(item)
            return OVMeasure.from_json(item, alg.index)

        ucp = [load(m, a) for m, a in zip(data["ucp"], algebras)]
        states = [load(s, a) for s, a in zip(data["states"], algebras)]
        return cls(algebras, ucp, states)


def cfree_evaluate(F: CFreeFunctional, w: NCWord) -> np.ndarray:
    return F.evaluate(w)


def cfree_evaluate_poly(F: CFreeFunctional, p: NCPoly) -> np.ndarray:
    return F.evaluate_poly(p)


def barycenter(F: CFreeFunctional) -> MatrixTuple:
    return F.barycenter()


# ---------------------------------------------------------------------------
# truncated GNS space
# ---------------------------------------------------------------------------

# basis words: tuples of (algebra, m) standing for the m-th spanning function
# of that algebra
BasisWord = Tuple[Tuple[int, int], ...]


@dataclass
class FactorSpan:
    """Centered spanning functions of one factor, stored by their values on
    the joint support of ``mu_i`` and ``phi_i``.

    Row ``m`` of ``funcs`` is a function ``f_m`` with ``phi_i(f_m) = 0``;
    together with the constant ``1`` the rows span all functions on
    ``nodes``.  They are orthonormal for ``<f, g> = phi_i(fg) + tr mu_i(fg) / k``.
    """
    alg: int
    nodes: np.ndarray
    funcs: np.ndarray
    mu_w: np.ndarray
    phi_w: np.ndarray

    @property
    def size(self) -> int:
        return self.funcs.shape[0]

    def mu(self, f: np.ndarray) -> np.ndarray:
        return np.einsum("j,jab->ab", f.astype(complex), self.mu_w)

    def phi(self, f: np.ndarray) -> float:
        return float(f @ self.phi_w)

    def decompose(self, h: np.ndarray) -> Tuple[float, np.ndarray]:
        """``h = c0 + sum_m c_m f_m`` on the nodes."""
        A = np.vstack([np.ones(self.nodes.size), self.funcs]).T
        c = np.linalg.solve(A, h)
        return float(c[0]), c[1:]

    def letter(self, m: int) -> Letter:
        """Interpolating polynomial of ``f_m`` (for cross-checks against words)."""
        n = self.nodes.size
        V = np.vander(self.nodes, n, increasing=True)
        return Letter(self.alg, poly=np.linalg.solve(V, self.funcs[m]))


def factor_span(F: CFreeFunctional, i: int) -> FactorSpan:
    mu, phi = F.ucp_maps[i], F.states[i]
    nodes = np.unique(np.concatenate([mu.t[np.abs(np.trace(mu.Q, axis1=1, axis2=2)) > 0],
                                      phi.t[phi.Q[:, 0, 0].real > 0]]))
    k = mu.k
    mu_w = np.zeros((nodes.size, k, k), dtype=complex)
    phi_w = np.zeros(nodes.size)
    for t, q in zip(mu.t, mu.Q):
        j = np.searchsorted(nodes, t)
        if j < nodes.size and nodes[j] == t:
            mu_w[j] += q
    for t, q in zip(phi.t, phi.Q):
        j = np.searchsorted(nodes, t)
        if j < nodes.size and nodes[j] == t:
            phi_w[j] += q[0, 0].real
    S = nodes.size
    # centered indicators, dropping the node of largest total weight
    weight = phi_w + np.trace(mu_w, axis1=1, axis2=2).real / k
    drop = int(np.argmax(weight))
    C = np.array([np.eye(S)[s] - phi_w[s] for s in range(S) if s != drop]).reshape(S - 1, S)
    if S > 1:
        M = (C * weight) @ C.T
        ev, U = np.linalg.eigh(M)
        C = (U / np.sqrt(ev)).T @ C
    return FactorSpan(i, nodes, C, mu_w, phi_w)


@dataclass
class GnsSpace:
    """Truncated GNS space of a c-free functional.

    Vectors are coefficient columns over ``word_basis x C^k`` (row index
    ``b * k + a``) and the inner product is ``x^H gram y``.  Block ``(u, v)``
    of ``gram`` is ``mu(u^* v)``.
    """
    F: CFreeFunctional
    max_len: int
    spans: Dict[int, FactorSpan]
    degrees: Dict[int, int]
    complete: bool
    word_basis: List[BasisWord]
    index: Dict[BasisWord, int]
    gram: np.ndarray
    min_eig: float
    actions: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    _embed: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return self.F.k

    @property
    def size(self) -> int:
        return len(self.word_basis) * self.k

    def basis_word(self, b: int) -> NCWord:
        """The word represented by basis index ``b``, with polynomial letters."""
        return NCWord(tuple(self.spans[i].letter(m) for i, m in self.word_basis[b]))

    def embedding(self) -> np.ndarray:
        """``R`` with ``R^H R = gram`` on the numerical range of ``gram``."""
        if self._embed is None:
            g = (self.gram + self.gram.conj().T) / 2
            ev, U = np.linalg.eigh(g)
            top = max(ev.max(), 0.0)
            keep = ev > RANK_TOL * top if top > 0 else np.zeros(ev.shape, bool)
            self._embed = np.sqrt(ev[keep])[:, None] * U[:, keep].conj().T
        return self._embed

    @property
    def rank(self) -> int:
        return self.embedding().shape[0]

    def unit_vectors(self) -> np.ndarray:
        """Coefficient columns of ``1 (x) e_a``, i.e. the copy of ``H``."""
        X = np.zeros((self.size, self.k), dtype=complex)
        b = self.index[()]
        for a in range(self.k):
            X[b * self.k + a, a] = 1
        return X

    def to_json(self) -> dict:
        return {"max_len": self.max_len, "degrees": {str(i): p for i, p in self.degrees.items()},
                "complete": self.complete, "basis_size": len(self.word_basis), "k": self.k,
                "gram_dim": self.size, "gram_rank": self.rank, "min_eig": self.min_eig,
                "psd_tolerance": psd_eps(self.gram)}


def _alternating(d: int, degrees: Dict[int, int], L: int) -> List[BasisWord]:
    words: List[BasisWord] = [()]
    frontier: List[BasisWord] = [()]
    for _ in range(L):
        nxt = []
        for w in frontier:
            for i in range(d):
                if w and w[-1][0] == i:
                    continue
                for m in range(degrees[i]):
                    nxt.append(w + ((i, m),))
        words.extend(nxt)
        frontier = nxt
    return words


def build_gns(F: CFreeFunctional, L: int, P: Optional[int] = None) -> GnsSpace:
    """Truncated GNS space on alternating words of length ``<= L``.

    Each letter of a basis word is one of the centered spanning functions of
    its factor (see :class:`FactorSpan`); a factor whose measures have
    ``S`` support points contributes ``S - 1`` of them, capped at ``P`` if
    given.  Block ``(u, v)`` of the Gram matrix is ``mu(u^* v)``: when the
    first letters of ``u`` and ``v`` lie in different factors the word is
    fully centered and factorizes, otherwise the two first letters merge
    and the remainder recurses on the tails.

    Raises :class:`CompletePositivityError` when the Gram matrix has an
    eigenvalue below ``-1e-8 (1 + ||gram||)``.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    for a in F.algebras:
        if not isinstance(a, IntervalAlgebra):
            raise TypeError("build_gns supports interval algebras only")
    k = F.k
    spans = {i: factor_span(F, i) for i in range(F.d)}
    full = {i: s.size for i, s in spans.items()}
    degrees = dict(full) if P is None else {i: min(P, full[i]) for i in full}
    complete = degrees == full
    words = _alternating(F.d, degrees, L)
    index = {w: b for b, w in enumerate(words)}
    B = len(words)

    eye = np.eye(k)
    cen = {}
    for i, sp in spans.items():
        for m in range(degrees[i]):
            f = sp.funcs[m]
            cen[i, m] = sp.mu(f) - sp.phi(f) * eye
    prod = np.zeros((B, k, k), dtype=complex)
    for b, w in enumerate(words):
        prod[b] = eye if not w else cen[w[0]] @ prod[index[w[1:]]]

    # first letters in different factors: u^* v is centered and alternating
    Pi = prod.transpose(1, 0, 2).reshape(k, B * k)
    blocks = (Pi.conj().T @ Pi).reshape(B, k, B, k)

    merged = {}
    for i, sp in spans.items():
        for p in range(degrees[i]):
            for q in range(degrees[i]):
                c = sp.funcs[p] * sp.funcs[q]
                pc = sp.phi(c)
                merged[i, p, q] = (sp.mu(c) - pc * eye, pc)
    # tails are shorter, so a global length-major sweep sees them first
    seen: Dict[int, List[int]] = {}
    for u in sorted(range(1, B), key=lambda b: len(words[b])):
        wu = words[u]
        i = wu[0][0]
        group = seen.setdefault(i, [])
        group.append(u)
        tu = index[wu[1:]]
        left = prod[tu].conj().T
        for v in group:
            wv = words[v]
            mc, pc = merged[i, wu[0][1], wv[0][1]]
            tv = index[wv[1:]]
            blk = left @ mc @ prod[tv] + pc * blocks[tu, :, tv, :]
            blocks[u, :, v, :] = blk
            blocks[v, :, u, :] = blk.conj().T
    G = blocks.reshape(B * k, B * k)
    G = (G + G.conj().T) / 2
    min_eig = float(np.linalg.eigvalsh(G).min())
    if min_eig < -psd_eps(G):
        raise CompletePositivityError(f"GNS Gram matrix has eigenvalue {min_eig:.3e}")

    gns = GnsSpace(F, L, spans, degrees, complete, words, index, G, min_eig)
    if complete:
        gns.actions = _left_actions(gns)
    return gns


def _left_actions(g: GnsSpace) -> Dict[Tuple[int, int], np.ndarray]:
    """Matrices of left multiplication by the spanning function ``f_m`` of
    factor ``i``; together with the identity these span ``pi(A_i)``.

    Columns of words of length ``L`` are zero: the product would leave the
    truncation.
    """
    out = {}
    B = len(g.word_basis)
    for i, sp in g.spans.items():
        for m in range(g.degrees[i]):
            f = sp.funcs[m]
            c0, cs = sp.decompose(f)
            T = np.zeros((B, B), dtype=complex)
            for u, w in enumerate(g.word_basis):
                if len(w) >= g.max_len:
                    continue
                if not w or w[0][0] != i:
                    tail, coeffs, scalar = w, cs, c0
                else:
                    tail = w[1:]
                    scalar, coeffs = sp.decompose(f * sp.funcs[w[0][1]])
                for n, c in enumerate(coeffs):
                    if c != 0:
                        T[g.index[((i, n),) + tail], u] += c
                T[g.index[tail], u] += scalar
            out[i, m] = np.kron(T, np.eye(g.k))
    return out

# ---------------------------------------------------------------------------
# K_w pattern spaces
# ---------------------------------------------------------------------------

@dataclass
class PatternReport:
    patterns: List[Pattern]
    dims: Dict[Pattern, int]
    spaces: Dict[Pattern, np.ndarray]
    offdiag: float
    offending: List[Tuple[Pattern, Pattern, float]]
    verdict: bool
    max_len: int
    tol: float
    truncated: bool = False
    rank_collapse: bool = False
    form: str = "rep"

    def overlap(self, w1: Pattern, w2: Pattern) -> float:
        for a, b, x in self.offending:
            if {a, b} == {w1, w2}:
                return x
        return 0.0

    def to_json(self) -> dict:
        return {
            "form": self.form, "max_len": self.max_len, "tol": self.tol,
            "patterns": [list(w) for w in self.patterns],
            "dims": {_pstr(w): n for w, n in self.dims.items()},
            "offdiag": self.offdiag,
            "offending": [{"pair": [list(a), list(b)], "norm": x} for a, b, x in self.offending],
            "verdict": self.verdict, "truncated": self.truncated, "rank_collapse": self.rank_collapse,
        }


def _pstr(w: Pattern) -> str:
    return "e" if not w else ".".join(str(i) for i in w)


def _next_patterns(indices: Sequence[int], L: int) -> List[Pattern]:
    pats: List[Pattern] = [()]
    frontier: List[Pattern] = [()]
    for _ in range(L):
        nxt = [(i,) + w for w in frontier for i in indices if not w or w[0] != i]
        pats.extend(nxt)
        frontier = nxt
    return pats


def _report(spaces: Dict[Pattern, np.ndarray], L: int, tol: float, **kw) -> PatternReport:
    pats = list(spaces)
    offdiag = 0.0
    offending = []
    for a, b in itertools.combinations(pats, 2):
        Ea, Eb = spaces[a], spaces[b]
        if Ea.shape[1] == 0 or Eb.shape[1] == 0:
            continue
        x = float(np.linalg.norm(Ea.conj().T @ Eb, 2))
        offdiag = max(offdiag, x)
        if x > tol:
            offending.append((a, b, x))
    return PatternReport(pats, {w: e.shape[1] for w, e in spaces.items()}, spaces, offdiag,
                         offending, offdiag <= tol, L, tol, **kw)


def _pattern_spaces_rep(rep: FiniteRep, H: Subspace, L: int, tol: float) -> PatternReport:
    M, truncated = minimal_part(rep, H)
    K: Dict[Pattern, Subspace] = {(): H}
    for w in _next_patterns(rep.indices, L):
        if len(w) == L:
            continue
        for i in rep.indices:
            if w and w[0] == i:
                continue
            if K[w].dim == 0:
                K[(i,) + w] = Subspace.zero(rep.N)
                continue
            K[(i,) + w] = complement_within(closure_under(K[w], rep, i), K[w])
    return _report({w: s.basis for w, s in K.items()}, L, tol, truncated=truncated, form="rep")


def _orthonormalize(R: np.ndarray, Y: np.ndarray, scale: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """G-orthonormal basis of the span of coefficient columns ``Y``.

    Returns ``(coeffs, embedded)`` with ``embedded = R @ coeffs`` having
    orthonormal columns.  Singular values below ``RANK_TOL * max(s_max,
    scale)`` are dropped; ``scale`` keeps pure roundoff out of residuals."""
    Z = R @ Y
    if Z.size == 0:
        return Y[:, :0], Z[:, :0]
    U, s, Vh = np.linalg.svd(Z, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return Y[:, :0], Z[:, :0]
    r = int(np.sum(s >= RANK_TOL * max(s[0], scale)))
    C = Y @ (Vh[:r].conj().T / s[:r])
    return C, U[:, :r]


def _pattern_spaces_gns(g: GnsSpace, L: int, tol: float) -> PatternReport:
    if not g.complete:
        raise ValueError("pattern spaces need the full payload span (build_gns with P=None)")
    L = min(L, g.max_len)
    R = g.embedding()
    C0, E0 = _orthonormalize(R, g.unit_vectors())
    coeffs: Dict[Pattern, np.ndarray] = {(): C0}
    emb: Dict[Pattern, np.ndarray] = {(): E0}
    indices = list(range(g.F.d))
    for w in _next_patterns(indices, L):
        if len(w) == L:
            continue
        X, E = coeffs[w], emb[w]
        for i in indices:
            if w and w[0] == i:
                continue
            if X.shape[1] == 0:
                coeffs[(i,) + w], emb[(i,) + w] = X, E
                continue
            cols = [X] + [g.actions[i, m] @ X for m in range(g.degrees[i])]
            Cc, Ec = _orthonormalize(R, np.hstack(cols))
            resid = Cc - X @ (E.conj().T @ Ec)
            coeffs[(i,) + w], emb[(i,) + w] = _orthonormalize(R, resid, scale=1.0)
    return _report(emb, L, tol, rank_collapse=g.rank < g.size, form="gns")


def pattern_subspaces(source: Union[GnsSpace, FiniteRep], L: int = 3,
                      H: Optional[Subspace] = None, tol: float = 1e-8) -> PatternReport:
    """The spaces ``K_w`` for all alternating index patterns of length ``<= L``.

    ``K_() = H`` and ``K_{iw}`` is the closure of ``pi(A_i) K_w`` minus ``K_w``
    (patterns are tuples whose first entry is the most recent index).  For a
    :class:`FiniteRep`, ``H`` is required and the representation is cut
    down to the cyclic subspace generated by ``H`` first.
    """
    if isinstance(source, GnsSpace):
        return _pattern_spaces_gns(source, L, tol)
    if H is None:
        raise ValueError("a FiniteRep needs the subspace H")
    return _pattern_spaces_rep(source, H, L, tol)


def is_free_product_map(source: Union[GnsSpace, FiniteRep, CompressedPointEval, CFreeFunctional],
                        L: int = 3, H: Optional[Subspace] = None,
                        tol: float = 1e-8) -> Tuple[bool, PatternReport]:
    if isinstance(source, CompressedPointEval):
        source, H = source.rep, source.range
    elif isinstance(source, CFreeFunctional):
        source = build_gns(source, L)
    rep = pattern_subspaces(source, L, H, tol)
    return rep.verdict, rep


# ---------------------------------------------------------------------------
# Fubini chains
# ---------------------------------------------------------------------------

@dataclass
class FubiniReport:
    ok: bool
    nontrivial: List[List[int]]
    final_is_hom: bool
    tol: float

    @property
    def steps(self) -> List[Optional[int]]:
        """The nontrivial coordinate of each step (``None`` for a trivial step)."""
        return [s[0] if len(s) == 1 else None for s in self.nontrivial]

    def to_json(self) -> dict:
        return {"ok": self.ok, "nontrivial": self.nontrivial, "final_is_hom": self.final_is_hom,
                "tol": self.tol}


def _step_nontrivial(rep: FiniteRep, small: Subspace, big: Subspace, tol: float) -> List[int]:
    B = big.basis
    inner = Subspace(orth(B.conj().T @ small.basis)) if small.dim else Subspace.zero(big.dim)
    if inner.dim != small.dim:
        raise ContainmentError("chain spaces are not nested")
    bad = []
    for i, y in rep.generators.items():
        yc = B.conj().T @ y @ B
        if reducing_defect(inner, yc) > tol * (1 + np.linalg.norm(yc, 2)):
            bad.append(i)
    return bad


def verify_fubini_chain(chain: DilationChain, tol: float = 1e-9) -> FubiniReport:
    """Check that each step of the chain is nontrivial in at most one algebra
    and that the last space reduces every generator (so the last map is a
    *-homomorphism)."""
    rep = chain.rep
    nontrivial = [_step_nontrivial(rep, a, b, tol) for a, b in zip(chain.spaces, chain.spaces[1:])]
    last = chain.spaces[-1]
    final = all(reducing_defect(last, y) <= tol * (1 + np.linalg.norm(y, 2))
                for y in rep.generators.values())
    ok = final and all(len(s) <= 1 for s in nontrivial)
    return FubiniReport(ok, nontrivial, final, tol)


def find_fubini_chain(rep: FiniteRep, H: Subspace, max_steps: Optional[int] = None,
                      tol: float = 1e-9) -> Optional[DilationChain]:
    """Breadth-first search over index sequences ``s``, growing
    ``H_{t+1} = closure of H_t under y_{s_t}``.

    Returns the first chain that verifies, or ``None``.  A ``None`` only
    means no chain of this shape exists within ``max_steps``.
    """
    if max_steps is None:
        max_steps = 2 * len(rep.indices)
    start = DilationChain(rep, [H], [])
    if verify_fubini_chain(start, tol).ok:
        return start
    queue = deque([start])
    while queue:
        chain = queue.popleft()
        if len(chain.steps) >= max_steps:
            continue
        last = chain.spaces[-1]
        for i in rep.indices:
            nxt = closure_under(last, rep, i)
            if nxt.dim == last.dim:
                continue
            cand = DilationChain(rep, chain.spaces + [nxt], chain.steps + [i])
            if len(_step_nontrivial(rep, last, nxt, tol)) > 1:
                continue
            if verify_fubini_chain(cand, tol).ok:
                return cand
            queue.append(cand)
    return None
