"""Words and polynomials over a unital free product of singly generated algebras.

Each free factor is either ``C(I)`` for a compact interval ``I`` (the letter
payload is a real polynomial in the generator ``t``) or a full matrix algebra
``M_n`` (the payload is an ``n x n`` complex matrix).  Words are kept in
reduced, alternating form: adjacent letters always belong to different
factors, and letters that are exact scalar multiples of the unit are pulled
out as coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np


class DimensionError(ValueError):
    """Raised when payload or matrix dimensions do not fit together."""


class NotReducedError(ValueError):
    """Raised when a word with adjacent letters from one algebra is passed
    where a reduced word is required."""


# ---------------------------------------------------------------------------
# algebras
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalAlgebra:
    """``C(I)`` for ``I = [lo, hi]``; the generator is the identity function ``t``."""
    index: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("algebra index must be >= 0")
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class MatrixAlgebra:
    """The full matrix algebra ``M_n``."""
    index: int
    n: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("algebra index must be >= 0")
        if self.n < 1:
            raise ValueError("matrix algebra dimension must be >= 1")


AlgebraSpec = Union[IntervalAlgebra, MatrixAlgebra]


def check_family(algebras: Sequence[AlgebraSpec]) -> None:
    """Indices of a family must be exactly ``0, 1, ..., d-1`` in order."""
    for pos, alg in enumerate(algebras):
        if alg.index != pos:
            raise ValueError(f"algebra at position {pos} has index {alg.index}; "
                             "indices must be contiguous from 0")


# ---------------------------------------------------------------------------
# letters
# ---------------------------------------------------------------------------

def _trim(coeffs: Iterable[float]) -> Tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    if not c:
        c = [0.0]
    return tuple(c)


class Letter:
    """A single element ``a`` of one free factor ``A_alg``.

    Exactly one of ``poly`` (real coefficients, constant term first) or
    ``mat`` (square complex matrix) is set.
    """

    __slots__ = ("alg", "poly", "mat", "_key")

    def __init__(self, alg: int, poly: Optional[Sequence[float]] = None,
                 mat: Optional[np.ndarray] = None):
        if (poly is None) == (mat is None):
            raise ValueError("a letter carries exactly one of poly / mat")
        self.alg = int(alg)
        if poly is not None:
            self.poly = _trim(poly)
            self.mat = None
            self._key = (self.alg, 0, np.asarray(self.poly, dtype=float).tobytes())
        else:
            m = np.array(mat, dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionError("matrix payload must be square")
            m.setflags(write=False)
            self.poly = None
            self.mat = m
            self._key = (self.alg, 1, m.shape[0], m.tobytes())

    # -- identity -----------------------------------------------------------
    @property
    def key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, Letter) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __lt__(self, other):
        return self._key < other._key

    def __repr__(self):
        if self.poly is not None:
            return f"Letter({self.alg}, poly={list(self.poly)})"
        return f"Letter({self.alg}, mat={self.mat.tolist()})"

    # -- structure ------------------------------------------------------------
    @property
    def is_matrix(self) -> bool:
        return self.mat is not None

    def constant_value(self) -> Optional[complex]:
        """The scalar ``c`` if the payload is exactly ``c * 1``, else ``None``."""
        if self.poly is not None:
            return self.poly[0] if len(self.poly) == 1 else None
        m = self.mat
        c = m[0, 0]
        if np.all(np.diag(m) == c) and np.count_nonzero(m - np.diag(np.diag(m))) == 0:
            return complex(c)
        return None

    def times(self, other: "Letter") -> "Letter":
        if other.alg != self.alg:
            raise ValueError("can only multiply letters of the same algebra")
        if self.poly is not None and other.poly is not None:
            return Letter(self.alg, poly=np.polynomial.polynomial.polymul(self.poly, other.poly))
        if self.mat is not None and other.mat is not None:
            if self.mat.shape != other.mat.shape:
                raise DimensionError("matrix payloads of different sizes in one algebra")
            return Letter(self.alg, mat=self.mat @ other.mat)
        raise DimensionError("mixed polynomial and matrix payloads in one algebra")

    def shifted(self, c: complex) -> "Letter":
        """The letter ``a - c * 1``.  Polynomial letters require real ``c``."""
        if self.poly is not None:
            coeffs = list(self.poly)
            coeffs[0] -= float(np.real(c))
            return Letter(self.alg, poly=coeffs)
        return Letter(self.alg, mat=self.mat - c * np.eye(self.mat.shape[0]))

    def adjoint(self) -> "Letter":
        if self.poly is not None:
            return self
        return Letter(self.alg, mat=self.mat.conj().T)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Polynomial functional calculus at a Hermitian matrix ``x`` (Horner)."""
        if self.poly is None:
            raise TypeError("matrix letters are evaluated through a representation")
        n = x.shape[0]
        out = self.poly[-1] * np.eye(n, dtype=complex)
        for c in reversed(self.poly[:-1]):
            out = out @ x + c * np.eye(n)
        return out


def gen(alg: int) -> Letter:
    """The generator ``t`` of an interval algebra."""
    return Letter(alg, poly=(0.0, 1.0))


def poly_letter(alg: int, coeffs: Sequence[float]) -> Letter:
    return Letter(alg, poly=coeffs)


def mat_letter(alg: int, m) -> Letter:
    return Letter(alg, mat=np.asarray(m, dtype=complex))


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NCWord:
    letters: Tuple[Letter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(self.letters))

    @property
    def key(self):
        return tuple(l.key for l in self.letters)

    def __eq__(self, other):
        return isinstance(other, NCWord) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __lt__(self, other):
        return (len(self.letters), self.key) < (len(other.letters), other.key)

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    @property
    def pattern(self) -> Tuple[int, ...]:
        return tuple(l.alg for l in self.letters)

    def is_reduced(self) -> bool:
        if any(l.constant_value() is not None for l in self.letters):
            return False
        return all(a.alg != b.alg for a, b in zip(self.letters, self.letters[1:]))

    def adjoint(self) -> "NCWord":
        return NCWord(tuple(l.adjoint() for l in reversed(self.letters)))

    def __repr__(self):
        return "NCWord(" + ", ".join(repr(l) for l in self.letters) + ")"


def _check_dims(letters: Sequence[Letter], algebras: Optional[Mapping[int, AlgebraSpec]]):
    if algebras is None:
        return
    for l in letters:
        spec = algebras.get(l.alg)
        if spec is None:
            raise DimensionError(f"letter refers to unknown algebra {l.alg}")
        if isinstance(spec, MatrixAlgebra):
            if l.mat is None or l.mat.shape[0] != spec.n:
                raise DimensionError(f"algebra {l.alg} expects {spec.n}x{spec.n} matrix payloads")
        elif l.mat is not None:
            raise DimensionError(f"algebra {l.alg} is an interval algebra; got a matrix payload")


def reduce_word(letters: Sequence[Letter],
                algebras: Optional[Mapping[int, AlgebraSpec]] = None) -> Tuple[NCWord, complex]:
    """Bring a list of letters to reduced alternating form.

    Returns ``(word, scalar)`` with ``scalar * word`` equal to the product of
    the input letters.  Constant payloads are detected exactly.
    """
    _check_dims(letters, algebras)
    scalar: complex = 1.0
    out: List[Letter] = []
    for l in letters:
        c = l.constant_value()
        if c is not None:
            scalar *= c
            continue
        # a merge can produce a constant, which can expose a new merge
        while out and out[-1].alg == l.alg:
            l = out.pop().times(l)
            c = l.constant_value()
            if c is not None:
                scalar *= c
                l = None
                break
        if l is not None:
            out.append(l)
    if scalar == 0:
        return NCWord(()), 0.0
    return NCWord(tuple(out)), scalar


def word(*letters: Letter) -> NCWord:
    w, s = reduce_word(letters)
    if s != 1:
        raise NotReducedError("word() expects non-constant letters; use NCPoly.from_letters")
    return w


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

class NCPoly:
    """A finite linear combination of reduced words with complex coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[NCWord, complex]] = None):
        clean: Dict[NCWord, complex] = {}
        for w, c in (terms or {}).items():
            if not w.is_reduced():
                w, s = reduce_word(w.letters)
                c = c * s
            clean[w] = clean.get(w, 0) + complex(c)
        self.terms = {w: c for w, c in sorted(clean.items()) if c != 0}

    @classmethod
    def one(cls) -> "NCPoly":
        return cls({NCWord(()): 1.0})

    @classmethod
    def from_letters(cls, letters: Sequence[Letter], coeff: complex = 1.0) -> "NCPoly":
        w, s = reduce_word(letters)
        return cls({w: coeff * s})

    @classmethod
    def from_word(cls, w: NCWord, coeff: complex = 1.0) -> "NCPoly":
        return cls({w: coeff})

    def __add__(self, other: "NCPoly") -> "NCPoly":
        other = _as_poly(other)
        t = dict(self.terms)
        for w, c in other.terms.items():
            t[w] = t.get(w, 0) + c
        return NCPoly(t)

    __radd__ = __add__

    def __neg__(self):
        return NCPoly({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __mul__(self, other) -> "NCPoly":
        if isinstance(other, (int, float, complex, np.number)):
            return NCPoly({w: c * other for w, c in self.terms.items()})
        out: Dict[NCWord, complex] = {}
        for u, a in self.terms.items():
            for v, b in other.terms.items():
                w, s = reduce_word(u.letters + v.letters)
                out[w] = out.get(w, 0) + a * b * s
        return NCPoly(out)

    def __rmul__(self, other):
        return self * other

    def __eq__(self, other):
        return isinstance(other, NCPoly) and self.terms == other.terms

    def __repr__(self):
        parts = [f"({c:.6g})*{w!r}" for w, c in self.terms.items()]
        return "NCPoly(" + " + ".join(parts) + ")" if parts else "NCPoly(0)"

    def __len__(self):
        return len(self.terms)

    def max_word_length(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        terms = []
        for w, c in self.terms.items():
            letters = []
            for l in w.letters:
                if l.poly is not None:
                    letters.append({"alg": l.alg, "poly": list(l.poly)})
                else:
                    letters.append({"alg": l.alg, "mat": [[z.real, z.imag] for z in l.mat.ravel()]})
            terms.append({"coeff": [c.real, c.imag], "word": letters})
        return {"terms": terms}

    @classmethod
    def from_json(cls, data: dict) -> "NCPoly":
        out = cls()
        for term in data["terms"]:
            re, im = term.get("coeff", [1.0, 0.0])
            letters = []
            for item in term["word"]:
                if "poly" in item:
                    letters.append(Letter(item["alg"], poly=item["poly"]))
                else:
                    flat = np.array([complex(a, b) for a, b in item["mat"]])
                    n = int(round(np.sqrt(flat.size)))
                    if n * n != flat.size:
                        raise DimensionError("matrix payload length is not a square")
                    letters.append(Letter(item["alg"], mat=flat.reshape(n, n)))
            out = out + cls.from_letters(letters, complex(re, im))
        return out


def _as_poly(x) -> NCPoly:
    if isinstance(x, NCPoly):
        return x
    if isinstance(x, NCWord):
        return NCPoly.from_word(x)
    if isinstance(x, Letter):
        return NCPoly.from_letters([x])
    if isinstance(x, (int, float, complex, np.number)):
        return NCPoly.one() * x
    raise TypeError(f"cannot interpret {type(x).__name__} as NCPoly")


def adjoint(p: NCPoly) -> NCPoly:
    return NCPoly({w.adjoint(): np.conj(c) for w, c in p.terms.items()})


def is_selfadjoint(p: NCPoly, tol: float = 1e-12) -> bool:
    diff = p - adjoint(p)
    return max((abs(c) for c in diff.terms.values()), default=0.0) <= tol


# ---------------------------------------------------------------------------
# evaluation at matrix points
# ---------------------------------------------------------------------------

def is_hermitian(x: np.ndarray, tol: float = 1e-10) -> bool:
    x = np.asarray(x)
    return x.ndim == 2 and x.shape[0] == x.shape[1] and \
        np.linalg.norm(x - x.conj().T, 2) <= tol * (1 + np.linalg.norm(x, 2))


def min_membership(x, lo: float, hi: float, tol: float = 1e-10) -> bool:
    """Spectrum of the Hermitian matrix ``x`` lies in ``[lo - tol, hi + tol]``."""
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if not is_hermitian(x, tol):
        raise ValueError("min_membership needs a Hermitian matrix")
    ev = np.linalg.eigvalsh((x + x.conj().T) / 2)
    return bool(ev.min() >= lo - tol and ev.max() <= hi + tol)


@dataclass
class MatrixTuple:
    """A point of ``MIN(I_0) x ... `` at matrix level ``n``.

    ``entries`` maps interval-algebra indices to Hermitian ``n x n`` matrices.
    ``reps`` maps matrix-algebra indices ``i`` (with ``A_i = M_m``) to a
    unitary ``U`` of size ``n = m * r``; the representation is
    ``a -> U (a kron I_r) U^*``.
    """
    entries: Dict[int, np.ndarray]
    reps: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {int(i): np.atleast_2d(np.asarray(x, dtype=complex))
                        for i, x in self.entries.items()}
        self.reps = {int(i): np.asarray(u, dtype=complex) for i, u in self.reps.items()}
        sizes = {x.shape[0] for x in self.entries.values()} | {u.shape[0] for u in self.reps.values()}
        if len(sizes) > 1:
            raise DimensionError(f"inconsistent levels {sorted(sizes)} in MatrixTuple")
        for i, x in self.entries.items():
            if not is_hermitian(x):
                raise ValueError(f"entry {i} is not Hermitian")

    @property
    def level(self) -> int:
        for x in self.entries.values():
            return x.shape[0]
        for u in self.reps.values():
            return u.shape[0]
        return 1

    def in_min(self, algebras: Sequence[AlgebraSpec], tol: float = 1e-10) -> bool:
        for alg in algebras:
            if isinstance(alg, IntervalAlgebra):
                x = self.entries.get(alg.index)
                if x is None or not min_membership(x, alg.lo, alg.hi, tol):
                    return False
        return True

    def letter_value(self, l: Letter) -> np.ndarray:
        if l.poly is not None:
            if l.alg not in self.entries:
                raise DimensionError(f"no matrix for algebra {l.alg}")
            return l.evaluate(self.entries[l.alg])
        if l.alg not in self.reps:
            raise DimensionError(f"no representation for matrix algebra {l.alg}")
        u = self.reps[l.alg]
        m = l.mat.shape[0]
        n = u.shape[0]
        if n % m:
            raise DimensionError(f"level {n} is not a multiple of {m}")
        return u @ np.kron(l.mat, np.eye(n // m)) @ u.conj().T


def evaluate_word(w: NCWord, x: MatrixTuple) -> np.ndarray:
    out = np.eye(x.level, dtype=complex)
    for l in w.letters:
        out = out @ x.letter_value(l)
    return out


def evaluate_poly(p: NCPoly, x: MatrixTuple) -> np.ndarray:
    n = x.level
    out = np.zeros((n, n), dtype=complex)
    for w, c in p.terms.items():
        out += c * evaluate_word(w, x)
    return out
