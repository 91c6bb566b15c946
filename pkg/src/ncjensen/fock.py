"""Truncated full Fock space and free semicircular families."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import sparse

from .cfree import CFreeFunctional
from .convexity import jensen_verify, make_conjugated_square, make_symmetrized_product
from .cp import OVMeasure
from .ncalg import IntervalAlgebra, NCWord, Letter
from .sampling import random_cfree, trial_rng


class TruncationRisk(UserWarning):
    """A moment was requested at a degree the truncation cannot certify."""


class QuadratureOrderError(ValueError):
    pass


class TruncatedFock:
    """Words of length ``<= N`` over ``d`` letters, ordered length-major then
    lexicographically; ``creation[i]`` prepends ``i`` and kills the top level."""

    def __init__(self, d: int, N: int):
        if d < 1 or N < 0:
            raise ValueError("need d >= 1 and N >= 0")
        self.d, self.N = d, N
        self.basis: List[Tuple[int, ...]] = [w for n in range(N + 1)
                                             for w in itertools.product(range(d), repeat=n)]
        self.index: Dict[Tuple[int, ...], int] = {w: b for b, w in enumerate(self.basis)}
        D = len(self.basis)
        self.creation = []
        for i in range(d):
            rows, cols = [], []
            for b, w in enumerate(self.basis):
                if len(w) < N:
                    rows.append(self.index[(i,) + w])
                    cols.append(b)
            self.creation.append(sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(D, D)))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def annihilation(self, i: int):
        return self.creation[i].T.tocsr()

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim)
        v[0] = 1.0
        return v


@dataclass
class SemicircularFamily:
    """``s_i = (r_i / 2)(l_i + l_i^*)`` on a truncated Fock space."""
    fock: TruncatedFock
    radii: Sequence[float]
    ops: List = field(init=False)

    def __post_init__(self):
        if len(self.radii) != self.fock.d or any(r <= 0 for r in self.radii):
            raise ValueError("one positive radius per generator")
        self.ops = [(r / 2) * (l + l.T).tocsr() for r, l in zip(self.radii, self.fock.creation)]

    @classmethod
    def build(cls, radii: Sequence[float], N: int) -> "SemicircularFamily":
        return cls(TruncatedFock(len(radii), N), list(radii))


def vacuum_moment(fam: SemicircularFamily, w: Sequence[Tuple[int, int]]) -> float:
    """``<s_{i_1}^{p_1} ... s_{i_m}^{p_m} Omega, Omega>`` for ``w = [(i_1, p_1), ...]``.

    Exact when the total degree is at most ``N``; otherwise a
    :class:`TruncationRisk` warning is issued and the value still returned.
    """
    deg = sum(p for _, p in w)
    if deg > fam.fock.N:
        warnings.warn(f"degree {deg} exceeds truncation N={fam.fock.N}", TruncationRisk, stacklevel=2)
    v = fam.fock.vacuum()
    for i, p in reversed(list(w)):
        for _ in range(p):
            v = fam.ops[i] @ v
    return float(v[0])


def chebyshev_u_quadrature(r: float, q: int, interval=None, algebra: int = 0) -> OVMeasure:
    """``q``-point Gauss rule for the semicircle on ``[-r, r]``; exact to degree ``2q - 1``."""
    j = np.arange(1, q + 1)
    t = r * np.cos(j * np.pi / (q + 1))
    w = 2.0 / (q + 1) * np.sin(j * np.pi / (q + 1)) ** 2
    order = np.argsort(t)
    return OVMeasure.scalar(t[order], w[order], interval if interval is not None else (-r, r), algebra)


def _free_words(d: int, L: int, D: int):
    yield ()
    for m in range(1, L + 1):
        for idx in itertools.product(range(d), repeat=m):
            if any(a == b for a, b in zip(idx, idx[1:])):
                continue
            for pw in itertools.product(range(1, D + 1), repeat=m):
                if sum(pw) <= D:
                    yield tuple(zip(idx, pw))


def crosscheck_free_moments(fam: SemicircularFamily, q: int = 5, L: int = 3, D: int = 6) -> float:
    """Largest ``|vacuum moment - c-free moment|`` over alternating words of
    length ``<= L`` and total degree ``<= D``, with ``mu_i = phi_i`` the
    semicircle quadrature rule."""
    if 2 * q - 1 < D:
        raise QuadratureOrderError(f"quadrature order {q} is exact only to degree {2 * q - 1} < {D}")
    if fam.fock.N < D:
        raise ValueError(f"truncation N={fam.fock.N} below degree {D}")
    algs = [IntervalAlgebra(i, -r, r) for i, r in enumerate(fam.radii)]
    meas = [chebyshev_u_quadrature(r, q, algebra=i) for i, r in enumerate(fam.radii)]
    F = CFreeFunctional(algs, meas, meas)
    worst = 0.0
    for w in _free_words(fam.fock.d, L, D):
        letters = [Letter(i, poly=[0.0] * p + [1.0]) for i, p in w]
        c = F.evaluate(NCWord(tuple(letters)))[0, 0]
        worst = max(worst, abs(vacuum_moment(fam, w) - c))
    return float(worst)


def semicircular_inequality_experiment(k: int, radii: Sequence[float], trials: int, seed: int,
                                       max_atoms: int = 4) -> dict:
    """Jensen checks for ``a_1...a_d + reverse`` and ``a_1...a_d^2...a_1`` over
    seeded random c-free instances on ``[-r_i, r_i]``."""
    d = len(radii)
    f_sym = make_symmetrized_product(list(range(d)))
    f_sq = make_conjugated_square(list(range(d)))
    rows = []
    for t in range(trials):
        F = random_cfree(trial_rng(seed, t), d, k, max_atoms=max_atoms, radii=radii)
        a = jensen_verify(f_sym, F)
        b = jensen_verify(f_sq, F)
        rows.append({"trial": t,
                     "symmetrized": {"min_eig": a.min_eig, "max_abs_gap": max(abs(a.min_eig), abs(a.max_eig))},
                     "conjugated_square": {"min_eig": b.min_eig, "max_eig": b.max_eig}})
    return {"k": k, "radii": list(radii), "trials": trials, "seed": seed, "max_atoms": max_atoms,
            "min_eig_symmetrized": min((r["symmetrized"]["min_eig"] for r in rows), default=0.0),
            "max_abs_gap_symmetrized": max((r["symmetrized"]["max_abs_gap"] for r in rows), default=0.0),
            "min_eig_conjugated_square": min((r["conjugated_square"]["min_eig"] for r in rows), default=0.0),
            "rows": rows}
