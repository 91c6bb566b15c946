"""Separately nc convex test functions, a randomized convexity falsifier and
the Jensen inequality checker.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cfree import CFreeFunctional, FubiniReport, verify_fubini_chain
from .cp import CompressedPointEval, DilationChain, FiniteRep, compress, encode_matrix, minimal_part
from .ncalg import (IntervalAlgebra, Letter, MatrixTuple, NCPoly, adjoint, evaluate_poly,
                    gen, is_selfadjoint, poly_letter)
from .sampling import random_hermitian, trial_rng

JENSEN_TOL = 1e-8
VIOLATION_TOL = 1e-7


def _letters(indices: Sequence[int], payloads) -> List[Letter]:
    if len(set(indices)) != len(indices):
        raise ValueError("indices must be pairwise distinct")
    if payloads is None:
        return [gen(i) for i in indices]
    if len(payloads) != len(indices):
        raise ValueError("one payload per index")
    out = []
    for i, q in zip(indices, payloads):
        if len(q) > 2 and any(c != 0 for c in q[2:]):
            raise ValueError("payloads must be affine (degree <= 1)")
        out.append(poly_letter(i, q))
    return out


def make_symmetrized_product(indices: Sequence[int], payloads=None) -> NCPoly:
    """``a_1 ... a_k + a_k^* ... a_1^*`` for affine letters in distinct algebras."""
    w = NCPoly.from_letters(_letters(indices, payloads))
    return w + adjoint(w)


def make_conjugated_square(indices: Sequence[int], payloads=None) -> NCPoly:
    """``a_1^* ... a_k^* a_k ... a_1`` for affine letters in distinct algebras."""
    w = NCPoly.from_letters(list(reversed(_letters(indices, payloads))))
    return adjoint(w) * w


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------

@dataclass
class ConvexityWitness:
    """A dilation ``x = alpha^* y alpha`` with ``f(x) > alpha^* f(y) alpha``
    somewhere; ``defect`` is the smallest eigenvalue of
    ``alpha^* f(y) alpha - f(x)`` (negative)."""
    mode: str
    level: int
    x: MatrixTuple
    y: MatrixTuple
    alpha: np.ndarray
    coord: Optional[int]
    defect: float
    strategy: str
    trial: Optional[int] = None
    seed: Optional[int] = None

    def to_json(self) -> dict:
        return {"mode": self.mode, "level": self.level, "coord": self.coord, "defect": self.defect,
                "strategy": self.strategy, "trial": self.trial, "seed": self.seed,
                "x": {str(i): encode_matrix(m) for i, m in self.x.entries.items()},
                "y": {str(i): encode_matrix(m) for i, m in self.y.entries.items()},
                "alpha": encode_matrix(self.alpha)}


@dataclass
class NoViolation:
    mode: str
    levels: Tuple[int, ...]
    trials: int
    seed: int
    min_defect: float

    def __bool__(self):
        return False

    def to_json(self) -> dict:
        return {"mode": self.mode, "levels": list(self.levels), "trials": self.trials,
                "seed": self.seed, "min_defect": self.min_defect}


def dilation_defect(f: NCPoly, y: MatrixTuple, alpha: np.ndarray) -> Tuple[float, MatrixTuple, float]:
    """``(min eig of alpha^* f(y) alpha - f(x), x, ||f(y)||)`` with ``x = alpha^* y alpha``."""
    x = MatrixTuple({i: alpha.conj().T @ m @ alpha for i, m in y.entries.items()})
    fy = evaluate_poly(f, y)
    gap = alpha.conj().T @ fy @ alpha - evaluate_poly(f, x)
    gap = (gap + gap.conj().T) / 2
    return float(np.linalg.eigvalsh(gap).min()), x, float(np.linalg.norm(fy, 2))


def _trivial_in(y: np.ndarray, alpha: np.ndarray, tol: float = 1e-10) -> bool:
    P = alpha @ alpha.conj().T
    return np.linalg.norm(y @ P - P @ y, 2) <= tol * (1 + np.linalg.norm(y, 2))


def _witness(f, y: MatrixTuple, alpha, mode, coord, strategy, trial=None, seed=None) -> Optional[ConvexityWitness]:
    defect, x, norm = dilation_defect(f, y, alpha)
    if defect >= -VIOLATION_TOL * (1 + norm):
        return None
    w = ConvexityWitness(mode, x.level, x, y, alpha, coord, defect, strategy, trial, seed)
    return w if witness_is_valid(f, w) else None


def witness_is_valid(f: NCPoly, w: ConvexityWitness) -> bool:
    """Re-check a witness from scratch at tightened tolerance."""
    a = w.alpha
    if np.linalg.norm(a.conj().T @ a - np.eye(a.shape[1])) > 1e-10:
        return False
    for i, yi in w.y.entries.items():
        if np.linalg.norm(a.conj().T @ yi @ a - w.x.entries[i], 2) > 1e-10 * (1 + np.linalg.norm(yi, 2)):
            return False
        if w.mode == "separate" and i != w.coord and not _trivial_in(yi, a):
            return False
    defect, _, norm = dilation_defect(f, w.y, a)
    return defect < -VIOLATION_TOL * (1 + norm) and abs(defect - w.defect) <= 1e-9 * (1 + norm)


def witness_from_dilation(f: NCPoly, y: MatrixTuple, alpha: np.ndarray, mode: str = "separate",
                          coord: Optional[int] = None) -> ConvexityWitness:
    """Package a known dilation as a witness; raises if it is not one."""
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.ndim == 1:
        alpha = alpha[:, None]
    w = _witness(f, y, alpha, mode, coord, "given")
    if w is None:
        raise ValueError("dilation does not violate convexity in the given mode")
    return w


def _chord(points_a: Dict[int, float], points_b: Dict[int, float], lam: float = 0.5):
    y = MatrixTuple({i: np.diag([points_a[i], points_b[i]]) for i in points_a})
    alpha = np.array([[np.sqrt(lam)], [np.sqrt(1 - lam)]], dtype=complex)
    return y, alpha


def _chords(algebras: Sequence[IntervalAlgebra], mode: str):
    """Deterministic level-one probes: two-point dilations between box corners
    and the box center (then between corners), moving every coordinate
    (joint) or one coordinate at a time (separate)."""
    hi_first = [(a.hi, a.lo) for a in algebras]
    corners = [dict(enumerate(c)) for c in itertools.product(*hi_first)]
    center = {a.index: (a.lo + a.hi) / 2 for a in algebras}
    if mode == "joint":
        for c in corners:
            yield None, c, center
        for c1, c2 in itertools.combinations(corners, 2):
            yield None, c1, c2
        return
    for j, a in enumerate(algebras):
        for base in corners + [center]:
            for v in (a.hi, a.lo):
                yield j, {**base, j: v}, {**base, j: center[j]}
            yield j, {**base, j: a.hi}, {**base, j: a.lo}


def _random_point(algebras, n, rng) -> Dict[int, np.ndarray]:
    return {a.index: random_hermitian(n, a.lo, a.hi, rng) for a in algebras}


def _random_trial(f, algebras, mode, n, trial, seed) -> Tuple[Optional[ConvexityWitness], float]:
    rng = trial_rng(seed, trial)
    d = len(algebras)
    j = int(rng.integers(d))
    coord = j if mode == "separate" else None
    if trial % 2 == 0:
        # midpoint of two points differing in coordinate j (or everywhere)
        x1 = _random_point(algebras, n, rng)
        x2 = dict(x1)
        for a in algebras:
            if mode == "joint" or a.index == j:
                x2[a.index] = random_hermitian(n, a.lo, a.hi, rng)
        lam = float(rng.uniform())
        y = MatrixTuple({i: np.block([[x1[i], np.zeros((n, n))], [np.zeros((n, n)), x2[i]]]) for i in x1})
        alpha = np.vstack([np.sqrt(lam) * np.eye(n), np.sqrt(1 - lam) * np.eye(n)]).astype(complex)
        strategy = "midpoint"
    else:
        # x_i (+) z_i off the active coordinate, arbitrary Hermitian on it
        ent = {}
        for a in algebras:
            if mode == "joint" or a.index == j:
                ent[a.index] = random_hermitian(2 * n, a.lo, a.hi, rng)
            else:
                xi = random_hermitian(n, a.lo, a.hi, rng)
                zi = random_hermitian(n, a.lo, a.hi, rng)
                ent[a.index] = np.block([[xi, np.zeros((n, n))], [np.zeros((n, n)), zi]])
        y = MatrixTuple(ent)
        alpha = np.vstack([np.eye(n), np.zeros((n, n))]).astype(complex)
        strategy = "dilation"
    defect, _, _ = dilation_defect(f, y, alpha)
    return _witness(f, y, alpha, mode, coord, strategy, trial, seed), defect


def check_separate_convexity(f: NCPoly, algebras: Sequence[IntervalAlgebra], mode: str = "separate",
                             levels: Sequence[int] = (1, 2, 3), trials: int = 1000,
                             seed: int = 0) -> Union[NoViolation, ConvexityWitness]:
    """Search for a violation of (separate or joint) nc convexity.

    Level-one chords through the corners and center of the box are tried
    first, then ``trials`` seeded random trials alternating between a
    levelwise midpoint test and a dilation test at the given levels.
    Returns the first verified witness, else :class:`NoViolation`.
    """
    if mode not in ("separate", "joint"):
        raise ValueError("mode is 'separate' or 'joint'")
    if not is_selfadjoint(f, 1e-12):
        raise ValueError("f must be selfadjoint")
    levels = tuple(int(n) for n in levels)
    worst = np.inf
    for coord, p, q in _chords(algebras, mode):
        y, alpha = _chord(p, q)
        w = _witness(f, y, alpha, mode, coord, "chord", None, seed)
        if w is not None:
            return w
        worst = min(worst, dilation_defect(f, y, alpha)[0])
    for t in range(trials):
        w, defect = _random_trial(f, algebras, mode, levels[t % len(levels)], t, seed)
        if w is not None:
            return w
        worst = min(worst, defect)
    return NoViolation(mode, levels, trials, seed, float(worst))


# ---------------------------------------------------------------------------
# Jensen inequality
# ---------------------------------------------------------------------------

@dataclass
class JensenReport:
    lhs: np.ndarray
    rhs: np.ndarray
    gap_matrix: np.ndarray
    min_eig: float
    max_eig: float
    eps: float

    @property
    def holds(self) -> bool:
        return self.min_eig >= -self.eps

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "violated"

    def to_json(self) -> dict:
        return {"lhs": encode_matrix(self.lhs), "rhs": encode_matrix(self.rhs),
                "gap_matrix": encode_matrix(self.gap_matrix), "min_eig": self.min_eig,
                "max_eig": self.max_eig, "eps": self.eps, "verdict": self.verdict}


def jensen_verify(f: NCPoly, mu: Union[CFreeFunctional, CompressedPointEval],
                  tol: float = JENSEN_TOL) -> JensenReport:
    """Compare ``f(bar(mu))`` with ``mu(f)``; holds iff the smallest eigenvalue
    of ``mu(f) - f(bar(mu))`` is at least ``-tol``."""
    if not is_selfadjoint(f, 1e-12):
        raise ValueError("f must be selfadjoint")
    if isinstance(mu, CFreeFunctional):
        bar = mu.barycenter()
        rhs = mu.evaluate_poly(f)
    else:
        bar = mu.barycenter()
        rhs = compress(mu.rep, mu.isometry, f)
    lhs = evaluate_poly(f, bar)
    gap = rhs - lhs
    gap = (gap + gap.conj().T) / 2
    ev = np.linalg.eigvalsh(gap)
    return JensenReport(lhs, rhs, gap, float(ev.min()), float(ev.max()), tol)


def jensen_counterexample(f: NCPoly, w: ConvexityWitness,
                          tol: float = JENSEN_TOL) -> Tuple[CompressedPointEval, JensenReport, FubiniReport]:
    """Turn a separate-mode witness into a Fubini-type ucp map violating Jensen.

    ``mu = alpha^* delta_y alpha``; the one-step chain from ``ran(alpha)`` to
    the cyclic subspace it generates is trivial in every coordinate but
    ``w.coord``.
    """
    if w.mode != "separate" or not witness_is_valid(f, w):
        raise ValueError("not a valid separate-mode witness")
    rep = FiniteRep(dict(w.y.entries))
    mu = CompressedPointEval(rep, w.alpha)
    report = jensen_verify(f, mu, tol)
    if report.holds or report.min_eig > w.defect + tol:
        raise ValueError("witness does not produce a Jensen violation")
    H = mu.range
    M, _ = minimal_part(rep, H)
    chain = DilationChain(rep, [H, M], [w.coord])
    fub = verify_fubini_chain(chain)
    if not fub.ok:
        raise ValueError("counterexample map failed its Fubini chain check")
    return mu, report, fub
