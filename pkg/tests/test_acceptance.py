"""Acceptance criteria 1-8.

Run with ``pytest tests/test_acceptance.py -v`` (a PASS/FAIL line per
criterion is printed in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import itertools
import json
import time


from ncjensen.cfree import build_gns, find_fubini_chain, pattern_subspaces, verify_fubini_chain
from ncjensen.convexity import (ConvexityWitness, NoViolation, check_separate_convexity,
                                jensen_counterexample, jensen_verify, make_conjugated_square,
                                make_symmetrized_product)
from ncjensen.cp import Subspace
from ncjensen.fixtures import conjugated_square_witness, example_4_9_rep, m2_trace_map
from ncjensen.fock import SemicircularFamily, crosscheck_free_moments, vacuum_moment
from ncjensen.ncalg import IntervalAlgebra, evaluate_poly
from ncjensen.sampling import random_cfree, trial_rng

SEED = 2024
N_INSTANCES = 200
RESULTS: dict = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def _instance(s: int):
    r = trial_rng(SEED, s)
    d = int(r.integers(2, 4))
    k = int(r.integers(1, 4))
    return random_cfree(r, d, k, max_atoms=4), r


def _functions(d: int, r):
    """Both families over every ordered tuple of distinct indices, with
    generator payloads and with random affine payloads."""
    for m in range(1, d + 1):
        for idx in itertools.permutations(range(d), m):
            pay = [[float(c) for c in r.uniform(-1, 1, 2)] for _ in idx]
            for P in (None, pay):
                yield "sym", idx, P, make_symmetrized_product(idx, P)
                yield "sq", idx, P, make_conjugated_square(idx, P)


# ---------------------------------------------------------------------------
# report builders (deterministic; no timings inside)
# ---------------------------------------------------------------------------

def report_1() -> dict:
    rep, H = example_4_9_rep()
    pr = pattern_subspaces(rep, 3, H)
    chain = find_fubini_chain(rep, H)
    fub = verify_fubini_chain(chain)
    return {
        "K1_match": Subspace(pr.spaces[(0,)]).equals(Subspace.coordinate(3, [1]), 1e-10),
        "K21_match": Subspace(pr.spaces[(1, 0)]).equals(Subspace.coordinate(3, [0, 2]), 1e-10),
        "verdict": pr.verdict,
        "offending_pairs": [(list(a), list(b)) for a, b, _ in pr.offending],
        "chain_steps": chain.steps,
        "chain_spaces_match": (len(chain.spaces) == 3
                               and chain.spaces[0].equals(Subspace.coordinate(3, [0]), 1e-10)
                               and chain.spaces[1].equals(Subspace.coordinate(3, [0, 1]), 1e-10)
                               and chain.spaces[2].equals(Subspace.full(3), 1e-10)),
        "fubini_ok": fub.ok,
        "nontrivial": fub.nontrivial,
    }


def report_2() -> dict:
    r = jensen_verify(make_symmetrized_product([0, 1]), m2_trace_map())
    return {"lhs": float(r.lhs[0, 0].real), "rhs": float(r.rhs[0, 0].real), "gap": r.min_eig,
            "verdict": r.verdict}


def report_3() -> dict:
    rows = []
    for s in range(N_INSTANCES):
        F, r = _instance(s)
        for fam, idx, P, f in _functions(F.d, r):
            j = jensen_verify(f, F)
            rows.append((s, fam, idx, P is not None, j.min_eig, j.max_eig))
    return {"count": len(rows),
            "min_eig": min(x[4] for x in rows),
            "sym_max_abs_gap": max(max(abs(x[4]), abs(x[5])) for x in rows if x[1] == "sym"),
            "rows": rows}


def report_4() -> dict:
    rows = []
    for s in range(N_INSTANCES):
        F, _ = _instance(s)
        g = build_gns(F, 3)
        pr = pattern_subspaces(g, 3)
        rows.append((s, F.d, F.k, g.size, g.rank, g.min_eig, pr.offdiag, pr.verdict))
    return {"min_eig": min(x[5] for x in rows), "max_offdiag": max(x[6] for x in rows),
            "all_true": all(x[7] for x in rows), "rows": rows}


def report_5() -> dict:
    fam = SemicircularFamily.build([2.0], 8)
    moments = [vacuum_moment(fam, [(0, p)] if p else []) for p in range(9)]
    dev = crosscheck_free_moments(SemicircularFamily.build([2.0, 1.0], 8), q=5, L=3, D=6)
    return {"moments": moments, "crosscheck": dev}


def report_6() -> dict:
    box = [IntervalAlgebra(0, -1, 1), IntervalAlgebra(1, -1, 1)]
    f = make_symmetrized_product([0, 1])
    sep = check_separate_convexity(f, box, "separate", (1, 2, 3), 1000, SEED)
    joint = check_separate_convexity(f, box, "joint", (1,), 1000, SEED)
    neg = check_separate_convexity(make_conjugated_square([0, 1]) * -1.0, box, "separate", (1, 2, 3), 1000, SEED)
    return {"separate": {"kind": type(sep).__name__, **sep.to_json()},
            "joint": {"kind": type(joint).__name__, **joint.to_json()},
            "neg_ab2a": {"kind": type(neg).__name__, **neg.to_json()}}


def report_7() -> dict:
    f, w = conjugated_square_witness()
    mu, rep, fub = jensen_counterexample(f, w)
    bar = evaluate_poly(f, mu.barycenter())
    return {"f_bar_minus_mu_f": float((bar - rep.rhs)[0, 0].real), "verdict": rep.verdict,
            "fubini_ok": fub.ok, "nontrivial": fub.nontrivial}


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=lambda o: o.item() if hasattr(o, "item") else list(o))


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

_cache: dict = {}


def _get(n):
    if n not in _cache:
        t0 = time.perf_counter()
        rep = globals()[f"report_{n}"]()
        _cache[n] = (rep, time.perf_counter() - t0)
    return _cache[n]


def test_criterion_1_fubini_fixture():
    rep, secs = _get(1)
    ok = (rep["K1_match"] and rep["K21_match"] and rep["verdict"] is False
          and ([], [1, 0]) in rep["offending_pairs"] and rep["chain_steps"] == [0, 1]
          and rep["chain_spaces_match"] and rep["fubini_ok"] and rep["nontrivial"] == [[0], [1]]
          and secs < 1.0)
    record(1, ok, f"K1/K21 match, verdict={rep['verdict']}, chain={rep['chain_steps']}, {secs:.3f}s")
    assert ok


def test_criterion_2_m2_trace():
    rep, _ = _get(2)
    ok = (abs(rep["lhs"] - 0.5) <= 1e-12 and abs(rep["rhs"]) <= 1e-12
          and abs(rep["gap"] + 0.5) <= 1e-12 and rep["verdict"] == "violated")
    record(2, ok, f"lhs={rep['lhs']:.15f} rhs={rep['rhs']:.1e} gap={rep['gap']:.15f}")
    assert ok


def test_criterion_3_cfree_jensen():
    rep, secs = _get(3)
    ok = rep["min_eig"] >= -1e-8 and rep["sym_max_abs_gap"] <= 1e-8 and secs < 60
    record(3, ok, f"{rep['count']} checks, min_eig={rep['min_eig']:.2e}, "
                  f"sym |gap|<={rep['sym_max_abs_gap']:.2e}, {secs:.1f}s")
    assert ok


def test_criterion_4_gns_certificates():
    rep, secs = _get(4)
    ok = rep["min_eig"] >= -1e-8 and rep["all_true"] and rep["max_offdiag"] <= 1e-8
    record(4, ok, f"min gram eig={rep['min_eig']:.2e}, max offdiag={rep['max_offdiag']:.2e}, "
                  f"all verdicts true={rep['all_true']}, {secs:.1f}s")
    assert ok


def test_criterion_5_fock():
    rep, _ = _get(5)
    want = [1, 0, 1, 0, 2, 0, 5, 0, 14]
    err = max(abs(a - b) for a, b in zip(rep["moments"], want))
    ok = err <= 1e-12 and rep["crosscheck"] <= 1e-10
    record(5, ok, f"moment err={err:.1e}, crosscheck={rep['crosscheck']:.1e}")
    assert ok


def test_criterion_6_discrimination():
    rep, _ = _get(6)
    j = rep["joint"]
    ok = (rep["separate"]["kind"] == NoViolation.__name__
          and j["kind"] == ConvexityWitness.__name__ and j["level"] == 1
          and abs(j["x"]["0"][0][0][0] - 0.5) <= 1e-12 and abs(j["x"]["1"][0][0][0] + 0.5) <= 1e-12
          and abs(j["defect"] + 0.5) <= 1e-12
          and rep["neg_ab2a"]["kind"] == ConvexityWitness.__name__)
    record(6, ok, f"ab+ba separate: {rep['separate']['kind']}; joint defect={j.get('defect')}; "
                  f"-ab^2a: {rep['neg_ab2a']['kind']}")
    assert ok


def test_criterion_7_converse_counterexample():
    rep, _ = _get(7)
    ok = abs(rep["f_bar_minus_mu_f"] - 1) <= 1e-12 and rep["fubini_ok"] and rep["verdict"] == "violated"
    record(7, ok, f"f(bar)-mu(f)={rep['f_bar_minus_mu_f']:.15f}, chain ok={rep['fubini_ok']}")
    assert ok


def test_criterion_8_determinism():
    same = {}
    for n in (3, 4, 6):
        first, _ = _get(n)
        same[n] = _dump(first) == _dump(globals()[f"report_{n}"]())
    ok = all(same.values())
    record(8, ok, "identical reports on rerun: " + ", ".join(f"c{n}={v}" for n, v in same.items()))
    assert ok


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
