import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncjensen.convexity import (ConvexityWitness, _random_trial, NoViolation, check_separate_convexity, dilation_defect,
                                jensen_counterexample, jensen_verify, make_conjugated_square,
                                make_symmetrized_product, witness_from_dilation, witness_is_valid)
from ncjensen.cp import CompressedPointEval, FiniteRep
from ncjensen.fixtures import conjugated_square_witness, example_4_9_rep, m2_trace_map
from ncjensen.ncalg import IntervalAlgebra, MatrixTuple, NCPoly, evaluate_poly, gen, is_selfadjoint, poly_letter
from ncjensen.sampling import random_cfree, random_hermitian, trial_rng

a, b, c = gen(0), gen(1), gen(2)
sq = poly_letter(1, [0, 0, 1])
box2 = [IntervalAlgebra(0, -1, 1), IntervalAlgebra(1, -1, 1)]
box3 = box2 + [IntervalAlgebra(2, -1, 1)]


def W(*ls):
    return NCPoly.from_letters(ls)


def test_symmetrized_examples():
    assert make_symmetrized_product([0, 1]) == W(a, b) + W(b, a)
    assert make_symmetrized_product([0]) == W(a) * 2
    assert make_symmetrized_product([0, 1, 2]) == W(a, b, c) + W(c, b, a)
    assert is_selfadjoint(make_symmetrized_product([2, 0, 1], [[1, 2], [0, -1], [3, 1]]))


def test_conjugated_square_examples():
    assert make_conjugated_square([0, 1]) == W(a, sq, a)
    assert make_conjugated_square([0]) == W(poly_letter(0, [0, 0, 1]))
    assert make_conjugated_square([0, 1, 2]) == W(a, b, poly_letter(2, [0, 0, 1]), b, a)


def test_builders_validate():
    with pytest.raises(ValueError):
        make_symmetrized_product([0, 0])
    with pytest.raises(ValueError):
        make_conjugated_square([0, 1], [[0, 0, 1], [0, 1]])


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 4))
def test_conjugated_square_is_psd_valued(seed, k, n):
    r = np.random.default_rng(seed)
    idx = list(r.permutation(3)[:k])
    pay = [list(r.uniform(-1, 1, 2)) for _ in idx]
    f = make_conjugated_square(idx, pay)
    x = MatrixTuple({i: random_hermitian(n, -3, 3, r) for i in range(3)})
    F = evaluate_poly(f, x)
    assert np.linalg.eigvalsh(F).min() >= -1e-10 * (1 + np.linalg.norm(F, 2))


# falsifier -----------------------------------------------------------------------

def test_joint_mode_scalar_witness():
    w = check_separate_convexity(make_symmetrized_product([0, 1]), box2, mode="joint", levels=[1], trials=0)
    assert isinstance(w, ConvexityWitness) and w.level == 1
    assert w.x.entries[0][0, 0] == pytest.approx(0.5) and w.x.entries[1][0, 0] == pytest.approx(-0.5)
    assert w.defect == pytest.approx(-0.5)


@pytest.mark.parametrize("f", [make_symmetrized_product([0, 1]), make_conjugated_square([0, 1]),
                               make_conjugated_square([1, 0]), make_symmetrized_product([0, 1, 2]),
                               make_conjugated_square([0, 1, 2])])
def test_separately_convex_families_pass(f):
    algs = box3 if max(l.alg for w in f.terms for l in w.letters) == 2 else box2
    res = check_separate_convexity(f, algs, "separate", (1, 2, 3), trials=150, seed=5)
    assert isinstance(res, NoViolation) and not res


def test_negative_conjugated_square_fails():
    f = make_conjugated_square([0, 1]) * -1.0
    w = check_separate_convexity(f, box2, "separate", trials=1000, seed=1)
    assert isinstance(w, ConvexityWitness)
    assert witness_is_valid(f, w)
    for i, y in w.y.entries.items():
        assert np.allclose(w.alpha.conj().T @ y @ w.alpha, w.x.entries[i])
        if i != w.coord:
            P = w.alpha @ w.alpha.conj().T
            assert np.allclose(y @ P, P @ y)


def test_random_strategies_find_witnesses():
    f = make_conjugated_square([0, 1]) * -1.0
    found = {}
    for t in range(60):
        w, defect = _random_trial(f, box2, "separate", 2, t, 7)
        if w is not None:
            assert w.defect == pytest.approx(defect) and witness_is_valid(f, w)
            found.setdefault(w.strategy, w)
    assert set(found) == {"midpoint", "dilation"}


def test_random_trials_are_replayable():
    f = make_conjugated_square([0, 1]) * -1.0
    for t in range(6):
        w1, d1 = _random_trial(f, box2, "joint", 2, t, 99)
        w2, d2 = _random_trial(f, box2, "joint", 2, t, 99)
        assert d1 == d2


def test_falsifier_requires_selfadjoint():
    with pytest.raises(ValueError):
        check_separate_convexity(W(a, b), box2)


def test_witness_json_is_plain():
    _, w = conjugated_square_witness()
    d = json.loads(json.dumps(w.to_json(), default=float))
    assert d["coord"] == 0 and d["defect"] == pytest.approx(-1)


# Jensen ---------------------------------------------------------------------------

@given(st.integers(0, 10_000))
def test_jensen_equality_for_scalar_cfree(seed):
    F = random_cfree(trial_rng(seed, 0), 2, 1)
    rep = jensen_verify(make_symmetrized_product([0, 1]), F)
    assert abs(rep.min_eig) <= 1e-12 and rep.holds


def test_jensen_three_dim_fixture_equality():
    rep49, H = example_4_9_rep()
    mu = CompressedPointEval(rep49, H.basis)
    r = jensen_verify(make_symmetrized_product([0, 1]), mu)
    assert r.lhs[0, 0] == pytest.approx(2) and r.rhs[0, 0] == pytest.approx(2) and r.holds


def test_jensen_m2_trace_violated():
    r = jensen_verify(make_symmetrized_product([0, 1]), m2_trace_map())
    assert r.verdict == "violated" and r.min_eig == pytest.approx(-0.5, abs=1e-12)


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_jensen_conjugated_square_cfree(seed, k):
    F = random_cfree(trial_rng(seed, 0), 2, k)
    assert jensen_verify(make_conjugated_square([0, 1]), F).min_eig >= -1e-8


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(0, 1))
def test_equality_law_for_one_step_fubini_maps(seed, n, j):
    r = np.random.default_rng(seed)
    ent = {}
    for i in range(2):
        if i == j:
            ent[i] = random_hermitian(2 * n, -1, 1, r)
        else:
            z = np.zeros((n, n))
            ent[i] = np.block([[random_hermitian(n, -1, 1, r), z], [z, random_hermitian(n, -1, 1, r)]])
    alpha = np.vstack([np.eye(n), np.zeros((n, n))])
    mu = CompressedPointEval(FiniteRep(ent), alpha)
    gap = jensen_verify(make_symmetrized_product([0, 1]), mu)
    assert max(abs(gap.min_eig), abs(gap.max_eig)) <= 1e-8
    assert jensen_verify(make_conjugated_square([0, 1]), mu).min_eig >= -1e-8


def test_counterexample_from_given_witness():
    f, w = conjugated_square_witness()
    mu, rep, fub = jensen_counterexample(f, w)
    assert rep.lhs[0, 0] == pytest.approx(0, abs=1e-12) and rep.rhs[0, 0] == pytest.approx(-1, abs=1e-12)
    assert fub.ok and fub.nontrivial == [[0]]


def test_counterexample_three_letters_level_one():
    f = make_conjugated_square([0, 1, 2]) * -1.0
    w = check_separate_convexity(f, box3, "separate", levels=[1], trials=200, seed=2)
    assert isinstance(w, ConvexityWitness) and w.level == 1
    mu, rep, fub = jensen_counterexample(f, w)
    assert not rep.holds and rep.min_eig <= w.defect + 1e-8 and fub.ok


def test_counterexample_rejects_joint_witness():
    f = make_symmetrized_product([0, 1])
    w = check_separate_convexity(f, box2, mode="joint", levels=[1], trials=0)
    with pytest.raises(ValueError):
        jensen_counterexample(f, w)


def test_witness_from_dilation_requires_violation():
    f = make_symmetrized_product([0, 1])
    y = MatrixTuple({0: np.diag([1.0, -1.0]), 1: np.eye(2)})
    with pytest.raises(ValueError):
        witness_from_dilation(f, y, np.array([1.0, 1.0]) / np.sqrt(2), "separate", 0)


@given(st.integers(0, 500))
def test_converse_law(seed):
    r = np.random.default_rng(seed)
    pay = [list(r.uniform(-1, 1, 2)) for _ in range(2)]
    pay[0][1] = 1.0
    f = make_conjugated_square([0, 1], pay) * -1.0
    w = check_separate_convexity(f, box2, "separate", levels=[1, 2], trials=20, seed=seed)
    if w:
        _, rep, fub = jensen_counterexample(f, w)
        assert not rep.holds and fub.ok


def test_dilation_defect_scalar():
    f = make_symmetrized_product([0, 1])
    y = MatrixTuple({0: np.diag([1.0, 0.0]), 1: np.diag([-1.0, 0.0])})
    d, x, _ = dilation_defect(f, y, np.array([[np.sqrt(0.5)], [np.sqrt(0.5)]]))
    assert d == pytest.approx(-0.5)
