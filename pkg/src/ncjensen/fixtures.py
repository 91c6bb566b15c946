"""Built-in worked examples.  Each fixture returns ``(exit_code, report)``."""
from __future__ import annotations

from typing import Callable, Dict, Tuple

import numpy as np

from .cfree import find_fubini_chain, is_free_product_map, pattern_subspaces, verify_fubini_chain
from .convexity import (check_separate_convexity, jensen_counterexample, jensen_verify,
                        make_conjugated_square, make_symmetrized_product, witness_from_dilation)
from .cp import CompressedPointEval, FiniteRep, Subspace, encode_matrix
from .fock import SemicircularFamily, crosscheck_free_moments, vacuum_moment
from .ncalg import IntervalAlgebra, MatrixTuple

Fixture = Callable[[], Tuple[int, dict]]


def example_4_9_rep() -> Tuple[FiniteRep, Subspace]:
    y1 = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]])
    y2 = np.array([[1, 0, 1], [0, 1, 1], [1, 1, 1]])
    return FiniteRep({0: y1, 1: y2}), Subspace.coordinate(3, [0])


def example_4_9() -> Tuple[int, dict]:
    """Compression to ``span{e_1}`` that is of Fubini type but not a free
    product map.  Exit 0: the Fubini chain exists."""
    rep, H = example_4_9_rep()
    pr = pattern_subspaces(rep, 3, H)
    chain = find_fubini_chain(rep, H)
    fub = verify_fubini_chain(chain) if chain is not None else None
    report = {
        "fixture": "example-4-9",
        "rep": rep.to_json(), "H": H.to_json(),
        "K": {"1": encode_matrix(pr.spaces[(0,)]), "21": encode_matrix(pr.spaces[(1, 0)])},
        "free_product": pr.to_json(),
        "chain": chain.to_json() if chain is not None else None,
        "fubini": fub.to_json() if fub is not None else None,
    }
    return (0 if fub is not None and fub.ok else 1), report


def m2_trace_map() -> CompressedPointEval:
    rep = FiniteRep({0: np.diag([1.0, 0.0]), 1: np.diag([0.0, 1.0])})
    return CompressedPointEval(rep, np.array([1.0, 1.0]) / np.sqrt(2))


def m2_trace() -> Tuple[int, dict]:
    """The trace on ``M_2`` with two complementary projections: Jensen fails
    for ``ab + ba``.  Exit 1."""
    mu = m2_trace_map()
    f = make_symmetrized_product([0, 1])
    rep = jensen_verify(f, mu)
    ok, pr = is_free_product_map(mu, 3)
    chain = find_fubini_chain(mu.rep, mu.range)
    report = {"fixture": "m2-trace", "map": mu.to_json(), "jensen": rep.to_json(),
              "gap": rep.min_eig, "free_product": pr.to_json(),
              "fubini_chain": chain.to_json() if chain is not None else "NotFound"}
    return (0 if rep.holds else 1), report


def example_4_1() -> Tuple[int, dict]:
    """``ab + ba`` on ``[-1, 1]^2`` is separately but not jointly convex."""
    f = make_symmetrized_product([0, 1])
    algs = [IntervalAlgebra(0, -1, 1), IntervalAlgebra(1, -1, 1)]
    joint = check_separate_convexity(f, algs, mode="joint", levels=(1,), trials=0)
    sep = check_separate_convexity(f, algs, mode="separate", levels=(1,), trials=200)
    report = {"fixture": "example-4-1", "joint": joint.to_json(), "separate": sep.to_json()}
    return (1 if joint else 0), report


def conjugated_square_witness():
    """``-ab^2a`` at ``y = (diag(1, -1), I_2)``, ``alpha = (1, 1)^T / sqrt 2``."""
    f = make_conjugated_square([0, 1]) * (-1.0)
    y = MatrixTuple({0: np.diag([1.0, -1.0]), 1: np.eye(2)})
    return f, witness_from_dilation(f, y, np.array([1.0, 1.0]) / np.sqrt(2), "separate", 0)


def neg_ab2a() -> Tuple[int, dict]:
    """A Fubini-type map violating Jensen for the non-separately-convex ``-ab^2a``."""
    f, w = conjugated_square_witness()
    mu, rep, fub = jensen_counterexample(f, w)
    report = {"fixture": "neg-ab2a", "witness": w.to_json(), "map": mu.to_json(),
              "jensen": rep.to_json(), "fubini": fub.to_json()}
    return 1, report


def semicircle() -> Tuple[int, dict]:
    """Catalan moments on the Fock space and the free/c-free cross-check."""
    fam = SemicircularFamily.build([2.0], 8)
    moments = [vacuum_moment(fam, [(0, p)] if p else []) for p in range(9)]
    dev = crosscheck_free_moments(SemicircularFamily.build([2.0, 1.0], 8), q=5, L=3, D=6)
    expected = [1, 0, 1, 0, 2, 0, 5, 0, 14]
    ok = max(abs(a - b) for a, b in zip(moments, expected)) <= 1e-12 and dev <= 1e-10
    return (0 if ok else 1), {"fixture": "semicircle", "moments": moments, "crosscheck": dev}


FIXTURES: Dict[str, Fixture] = {
    "example-4-9": example_4_9,
    "m2-trace": m2_trace,
    "example-4-1": example_4_1,
    "neg-ab2a": neg_ab2a,
    "semicircle": semicircle,
}
