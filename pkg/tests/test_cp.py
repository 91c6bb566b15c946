import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncjensen.cp import (ChoiMap, CompressedPointEval, ContainmentError, DilationChain, FiniteRep,
                         OVMeasure, PSDError, Subspace, choi_apply, closure_under, complement_within,
                         compress, is_reducing, measure_apply, minimal_part, naimark_dilate, polyval,
                         psd_sqrt)
from ncjensen.ncalg import DimensionError, NCPoly, evaluate_poly
from ncjensen.convexity import make_symmetrized_product
from ncjensen.fixtures import example_4_9_rep
from ncjensen.sampling import random_ovmeasure, trial_rng

sym = OVMeasure.scalar([1.0, -1.0], [0.5, 0.5])


def test_measure_apply_examples():
    assert measure_apply(sym, [0, 1])[0, 0] == pytest.approx(0)
    assert measure_apply(sym, [0, 0, 1])[0, 0] == pytest.approx(1)
    Q2 = np.array([[0.3, 0.1], [0.1, 0.2]])
    m = OVMeasure([0.0, 2.0], np.array([np.eye(2) - Q2, Q2]))
    assert np.allclose(measure_apply(m, [0, 1]), 2 * Q2)


def test_ovmeasure_invariants():
    with pytest.raises(ValueError):
        OVMeasure.scalar([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        OVMeasure.scalar([0.0, 0.0], [0.5, 0.5])
    with pytest.raises(PSDError):
        OVMeasure.scalar([0.0, 1.0], [1.5, -0.5])
    with pytest.raises(ValueError):
        OVMeasure.scalar([0.0, 3.0], [0.5, 0.5], interval=(-1, 1))


def test_ovmeasure_json():
    m = random_ovmeasure(2, 3, -1, 1, trial_rng(0, 0))
    m2 = OVMeasure.from_json(json.loads(json.dumps(m.to_json(), default=float)))
    assert np.allclose(m2.Q, m.Q) and np.allclose(m2.t, m.t) and m2.interval == m.interval


def test_choi_examples():
    a = np.array([[1, 2j], [3, 4]])
    assert np.allclose(choi_apply(ChoiMap.identity(2), a), a)
    assert choi_apply(ChoiMap.normalized_trace(2), np.diag([1, 0]))[0, 0] == pytest.approx(0.5)
    rho = np.diag([0.25, 0.75])
    c = ChoiMap.from_state(rho)
    assert choi_apply(c, np.eye(2))[0, 0] == pytest.approx(1)
    with pytest.raises(DimensionError):
        choi_apply(c, np.eye(3))


def test_choi_rejects_non_cp():
    with pytest.raises(PSDError):
        ChoiMap.from_map(lambda x: x.T, 2, 2)


def test_choi_json():
    c = ChoiMap.normalized_trace(3)
    c2 = ChoiMap.from_json(json.loads(json.dumps(c.to_json(), default=float)))
    assert np.allclose(c2.choi, c.choi)


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
def test_choi_maps_psd_to_psd(seed, n, k):
    r = np.random.default_rng(seed)
    # conjugation channel  x -> sum K_j^* x K_j  normalized to be unital
    Ks = [r.standard_normal((n, k)) + 1j * r.standard_normal((n, k)) for _ in range(k + 1)]
    S = sum(K.conj().T @ K for K in Ks)
    Sih = np.linalg.inv(psd_sqrt(S))
    Ks = [K @ Sih for K in Ks]
    c = ChoiMap.from_map(lambda x: sum(K.conj().T @ x @ K for K in Ks), n, k)
    assert np.allclose(choi_apply(c, np.eye(n)), np.eye(k))
    g = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    assert np.linalg.eigvalsh(choi_apply(c, g @ g.conj().T)).min() >= -1e-9


def test_naimark_examples():
    nodes, V = naimark_dilate(sym)
    assert np.allclose(V.ravel(), [1 / np.sqrt(2)] * 2)
    assert np.allclose(nodes, [1, -1])
    Y = np.diag(nodes)
    assert (V.conj().T @ Y @ Y @ V)[0, 0] == pytest.approx(1)
    point = OVMeasure([0.7], np.eye(3)[None])
    nodes, V = naimark_dilate(point)
    assert np.allclose(V, np.eye(3)) and np.allclose(nodes, 0.7)


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 5))
def test_naimark_round_trip(seed, k, atoms):
    r = np.random.default_rng(seed)
    m = random_ovmeasure(k, atoms, -1.5, 2.0, r)
    nodes, V = naimark_dilate(m)
    assert np.allclose(V.conj().T @ V, np.eye(k), atol=1e-10)
    q = r.uniform(-1, 1, size=7)
    lhs = V.conj().T @ np.diag(polyval(q, nodes)) @ V
    assert np.abs(lhs - measure_apply(m, q)).max() <= 1e-10


# subspaces --------------------------------------------------------------------

rep49, H49 = example_4_9_rep()
e = np.eye(3)


def test_is_reducing_examples():
    assert is_reducing(Subspace.coordinate(3, [0, 1]), rep49, 0)
    assert not is_reducing(Subspace.coordinate(3, [0]), rep49, 1)
    assert is_reducing(Subspace.full(3), rep49, 0) and is_reducing(Subspace.full(3), rep49, 1)


def test_closure_examples():
    assert closure_under(Subspace.coordinate(3, [0]), rep49, 0).equals(Subspace.coordinate(3, [0, 1]))
    assert closure_under(Subspace.coordinate(3, [1]), rep49, 1).equals(Subspace.full(3))
    s = Subspace.coordinate(3, [0, 1])
    assert closure_under(s, rep49, 0).equals(s)


def test_complement_examples():
    k1 = complement_within(Subspace.coordinate(3, [0, 1]), Subspace.coordinate(3, [0]))
    assert k1.equals(Subspace.coordinate(3, [1]))
    x = Subspace.coordinate(3, [0, 2])
    assert complement_within(x, x).dim == 0
    k21 = complement_within(Subspace.full(3), Subspace.coordinate(3, [1]))
    assert k21.equals(Subspace.coordinate(3, [0, 2]))
    with pytest.raises(ContainmentError):
        complement_within(Subspace.coordinate(3, [0]), Subspace.coordinate(3, [1]))


@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(1, 3))
def test_closure_and_complement_properties(seed, N, r):
    g = np.random.default_rng(seed)
    y = g.standard_normal((N, N))
    # block structure so that closures are often proper
    y[: N // 2, N // 2:] = 0
    y = y + y.T
    rep = FiniteRep({0: y})
    s = Subspace.span(g.standard_normal((N, min(r, N))))
    c = closure_under(s, rep, 0)
    assert c.contains(s) and is_reducing(c, rep, 0, 1e-9)
    k = complement_within(c, s)
    assert k.dim == c.dim - s.dim
    assert np.abs(k.basis.conj().T @ s.basis).max(initial=0.0) <= 1e-10


def test_subspace_json():
    s = Subspace.span(np.array([[1.0, 1.0], [0, 1.0], [0, 0]]))
    t = Subspace.from_json(json.loads(json.dumps(s.to_json(), default=float)), 3)
    assert t.equals(s)


def test_compress_examples():
    f = make_symmetrized_product([0, 1])
    assert compress(rep49, e[:, [0]], f)[0, 0] == pytest.approx(2)
    assert np.allclose(compress(rep49, e[:, :2], NCPoly.one()), np.eye(2))
    assert np.allclose(compress(rep49, e, f), evaluate_poly(f, rep49.point()))


def test_compressed_point_eval():
    mu = CompressedPointEval(rep49, e[:, 0])
    assert mu.k == 1 and mu.barycenter().entries[1][0, 0] == 1
    with pytest.raises(ValueError):
        CompressedPointEval(rep49, np.array([1.0, 1.0, 0.0]))
    mu2 = CompressedPointEval.from_json(json.loads(json.dumps(mu.to_json(), default=float)))
    assert np.allclose(mu2.isometry, mu.isometry)


def test_minimal_part_reports_truncation():
    rep = FiniteRep({0: np.diag([1.0, 1.0, 2.0]), 1: np.diag([0.0, 1.0, 1.0])})
    M, truncated = minimal_part(rep, Subspace.coordinate(3, [0]))
    assert truncated and M.equals(Subspace.coordinate(3, [0]))
    M, truncated = minimal_part(rep49, H49)
    assert not truncated and M.dim == 3


def test_dilation_chain_nesting():
    with pytest.raises(ContainmentError):
        DilationChain(rep49, [Subspace.coordinate(3, [1]), Subspace.coordinate(3, [0, 2])])
