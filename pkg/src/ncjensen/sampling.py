"""Seeded random instances.

Every random stream is derived from ``(seed, trial)`` through
``numpy.random.SeedSequence`` so that trials can be replayed one at a time.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .cfree import CFreeFunctional
from .cp import OVMeasure, psd_sqrt
from .ncalg import IntervalAlgebra


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(trial)]))


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def random_hermitian(n: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    """Real symmetric matrix with eigenvalues uniform on ``[lo, hi]``."""
    ev = rng.uniform(lo, hi, size=n)
    Q = random_orthogonal(n, rng)
    x = (Q * ev) @ Q.T
    return ((x + x.T) / 2).astype(complex)


def random_ovmeasure(k: int, atoms: int, lo: float, hi: float, rng: np.random.Generator,
                     t: Optional[Sequence[float]] = None, algebra: int = 0) -> OVMeasure:
    """Random operator-valued measure with ``atoms`` distinct nodes.

    Weights are ``S^{-1/2} G_j G_j^* S^{-1/2}`` with ``S = sum_j G_j G_j^*``.
    """
    if t is None:
        t = np.sort(rng.uniform(lo, hi, size=atoms))
    t = np.asarray(t, float)
    if k == 1:
        w = rng.dirichlet(np.ones(len(t)))
        return OVMeasure.scalar(t, w, (lo, hi), algebra)
    Gs = [rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)) for _ in t]
    Ps = [g @ g.conj().T for g in Gs]
    S_inv_half = np.linalg.inv(psd_sqrt(sum(Ps)))
    Q = np.array([S_inv_half @ p @ S_inv_half for p in Ps])
    Q = (Q + Q.conj().transpose(0, 2, 1)) / 2
    # exact unitality up to roundoff: push the residual into the last weight
    Q[-1] += np.eye(k) - Q.sum(axis=0)
    return OVMeasure(t, Q, (lo, hi), algebra)


def random_cfree(rng: np.random.Generator, d: int, k: int, max_atoms: int = 4,
                 radii: Optional[Sequence[float]] = None, shared_nodes: bool = True) -> CFreeFunctional:
    """A random c-free instance on ``d`` interval algebras ``[-r_i, r_i]``.

    With ``shared_nodes`` the state ``phi_i`` is supported on the nodes of
    ``mu_i`` (with independent weights), which keeps the GNS payload span
    at ``atoms - 1`` monomials per algebra.
    """
    if radii is None:
        radii = [1.0] * d
    algebras, ucp, states = [], [], []
    for i, r in enumerate(radii):
        atoms = int(rng.integers(1, max_atoms + 1))
        algebras.append(IntervalAlgebra(i, -r, r))
        mu = random_ovmeasure(k, atoms, -r, r, rng, algebra=i)
        ucp.append(mu)
        if shared_nodes:
            states.append(random_ovmeasure(1, atoms, -r, r, rng, t=mu.t, algebra=i))
        else:
            states.append(random_ovmeasure(1, int(rng.integers(1, max_atoms + 1)), -r, r, rng, algebra=i))
    return CFreeFunctional(algebras, ucp, states)
