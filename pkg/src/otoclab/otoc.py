"""Exact and stochastic OTOC time series for coupled kicked rotors.

``A(0) = O_a`` acting on subsystem ``a_side`` and ``B = O_b`` on the other
one.  Every series carries both the same-side correlator ``C_AA`` (``A(t)``
against ``A(0)``) and the cross correlator ``C_AB``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import (NORMALIZED, RAW_TRACE, DimensionError, OtocSeries,
                   ParameterError, SimParams, check_hermitian)
from .floquet import CompositePropagator, cosine_observable

__all__ = ["otoc_exact", "otoc_stochastic", "ExactThresholdError",
           "DEFAULT_EXACT_THRESHOLD"]

log = logging.getLogger(__name__)

DEFAULT_EXACT_THRESHOLD = 4096


class ExactThresholdError(ParameterError):
    """Composite dimension too large for the exact estimator."""


def _local_ops(params, obs1, obs2, a_side):
    N = params.N
    if obs1 is None:
        obs1 = cosine_observable(N, params.alpha)
    if obs2 is None:
        obs2 = cosine_observable(N, params.alpha)
    for o in (obs1, obs2):
        if np.shape(o) != (N, N):
            raise DimensionError(f"observable shape {np.shape(o)} != ({N}, {N})")
        check_hermitian(o)
    if a_side not in (1, 2):
        raise ParameterError("a_side must be 1 or 2")
    b_side = 3 - a_side
    return (np.asarray(obs1, complex), a_side), (np.asarray(obs2, complex), b_side)


class _Local:
    """An operator ``O`` placed on one factor of the composite space."""

    def __init__(self, op, side, N):
        self.op = op
        self.side = side
        self.N = N
        self.diag = np.diag(op) if np.count_nonzero(op - np.diag(np.diag(op))) == 0 else None
        if self.diag is not None:
            one = np.ones(N)
            self.full_diag = np.kron(self.diag, one) if side == 1 else np.kron(one, self.diag)

    def dense(self):
        eye = np.eye(self.N)
        return np.kron(self.op, eye) if self.side == 1 else np.kron(eye, self.op)

    def left(self, X):
        """``O_full @ X`` for row states ``X`` of shape ``(P, N*N)``."""
        if self.diag is not None:
            return X * self.full_diag
        N = self.N
        Y = X.reshape(-1, N, N)
        Y = np.matmul(self.op, Y) if self.side == 1 else Y @ self.op.T
        return Y.reshape(X.shape)

    def right(self, M):
        """``M @ O_full`` for a full ``(N*N, N*N)`` matrix."""
        if self.diag is not None:
            return M * self.full_diag[None, :]
        N = self.N
        Y = M.reshape(-1, N, N)
        if self.side == 1:
            Y = (Y.transpose(0, 2, 1) @ self.op).transpose(0, 2, 1)
        else:
            Y = Y @ self.op
        return Y.reshape(M.shape)


def _pair_exact(At, B: _Local, dim):
    AB = B.right(At)
    c2 = np.vdot(AB, AB).real
    c4 = np.sum(AB * AB.T).real
    comm = AB - AB.conj().T
    c = 0.5 * np.vdot(comm, comm).real
    return c / dim, c2 / dim, c4 / dim


def _pair_diag(W, d, dim):
    """Same as :func:`_pair_exact` for diagonal ``B = diag(d)``.

    With ``W = |A(t)|^2`` elementwise, ``C2 = sum_jk W_jk d_k^2`` and
    ``C4 = sum_jk W_jk d_j d_k`` (``A(t)`` Hermitian).
    """
    c2 = np.sum(W @ (d * d))
    c4 = d @ (W @ d)
    # C = 1/2 sum_jk W_jk (d_j - d_k)^2 is non-negative term by term
    c = 0.5 * np.einsum("jk,jk->", W, np.subtract.outer(d, d) ** 2)
    return c / dim, c2 / dim, c4 / dim


def otoc_exact(params: SimParams, t_max, obs1=None, obs2=None, a_side=1,
               normalization=NORMALIZED, threshold=DEFAULT_EXACT_THRESHOLD):
    """Exact OTOC series by Heisenberg recursion ``A(t+1) = U^dag A(t) U``.

    The full ``N**2 x N**2`` operator ``A(t)`` is held in memory, which is
    the column-stacked form of applying ``t`` backward steps, ``A(0)`` and
    ``t`` forward steps to every basis vector.  Traces are then
    ``C2 = ||A(t) B||_F^2`` and ``C4 = Tr(A(t) B A(t) B)``.
    """
    if params.dim > threshold:
        raise ExactThresholdError(
            f"N^2 = {params.dim} exceeds the exact threshold {threshold}; "
            "use otoc_stochastic")
    (oa, sa), (ob, sb) = _local_ops(params, obs1, obs2, a_side)
    N, dim = params.N, params.dim
    A0 = _Local(oa, sa, N)
    B = _Local(ob, sb, N)
    U = CompositePropagator.from_params(params)
    At = A0.dense().astype(complex)
    rows = []
    for t in range(int(t_max) + 1):
        if t:
            At = U.heisenberg(At)
        if B.diag is not None and A0.diag is not None:
            W = At.real ** 2 + At.imag ** 2
            rows.append(_pair_diag(W, B.full_diag.real, dim)
                        + _pair_diag(W, A0.full_diag.real, dim))
        else:
            rows.append(_pair_exact(At, B, dim) + _pair_exact(At, A0, dim))
        log.debug("otoc_exact t=%d c_ab=%.3e", t, rows[-1][0])
    r = np.array(rows)
    series = OtocSeries(np.arange(int(t_max) + 1), c_ab=r[:, 0], c2=r[:, 1],
                        c4=r[:, 2], c_aa=r[:, 3], c2_aa=r[:, 4], c4_aa=r[:, 5],
                        params=params, estimator="exact")
    return series.to_raw() if normalization == RAW_TRACE else series


def _probe_block(U, A0, B, probes, t_max):
    """Per-probe estimates for one block of probe vectors.

    Returns an array ``(6, P, t_max+1)`` ordered as the series columns
    ``c_ab, c2, c4, c_aa, c2_aa, c4_aa``.
    """
    P = len(probes)
    out = np.empty((6, P, t_max + 1))
    # forward-evolved r, B r, A r stacked as rows
    fwd = np.concatenate([probes, B.left(probes), A0.left(probes)])
    for t in range(t_max + 1):
        if t:
            fwd = U.forward(fwd)
        X = A0.left(fwd)
        for _ in range(t):
            X = U.backward(X)
        x, y, z = X[:P], X[P:2 * P], X[2 * P:]
        for k, (other, w) in enumerate(((B, y), (A0, z))):
            ox = other.left(x)
            n_w = np.sum(np.abs(w) ** 2, axis=1)
            n_ox = np.sum(np.abs(ox) ** 2, axis=1)
            c4 = np.sum(w.conj() * ox, axis=1).real
            out[3 * k + 0, :, t] = 0.5 * np.sum(np.abs(w - ox) ** 2, axis=1)
            out[3 * k + 1, :, t] = 0.5 * (n_w + n_ox)
            out[3 * k + 2, :, t] = c4
    return out


def _random_phase_probes(seeds, dim):
    rows = [np.exp(2j * np.pi * np.random.default_rng(s).random(dim)) for s in seeds]
    return np.array(rows) / np.sqrt(dim)


def otoc_stochastic(params: SimParams, t_max, n_probe=64, seed=0, obs1=None,
                    obs2=None, a_side=1, normalization=NORMALIZED, n_jobs=1,
                    block_size=16):
    """Random-phase trace estimate of the same series as :func:`otoc_exact`.

    Each probe ``r`` has entries ``exp(i phi) / N`` so ``E[r r^dag] = I / N^2``.
    Per probe, ``C = |[A(t), B] r|^2 / 2`` and ``C2``, ``C4`` are the
    symmetrized pieces with ``C = C2 - C4`` exactly.  Probe ``k`` is seeded
    by the ``k``-th child of ``SeedSequence(seed)`` and blocks are fixed by
    ``block_size``, so results do not depend on ``n_jobs``.
    """
    if n_probe < 2:
        raise ParameterError("n_probe must be >= 2")
    t_max = int(t_max)
    (oa, sa), (ob, sb) = _local_ops(params, obs1, obs2, a_side)
    A0 = _Local(oa, sa, params.N)
    B = _Local(ob, sb, params.N)
    U = CompositePropagator.from_params(params)
    seeds = np.random.SeedSequence(seed).spawn(n_probe)
    blocks = [seeds[i:i + block_size] for i in range(0, n_probe, block_size)]

    def work(block):
        return _probe_block(U, A0, B, _random_phase_probes(block, params.dim), t_max)

    if n_jobs == 1:
        parts = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(work, blocks))
    per_probe = np.concatenate(parts, axis=1)
    mean = per_probe.mean(axis=1)
    err = per_probe.std(axis=1, ddof=1) / np.sqrt(n_probe)
    names = ("c_ab", "c2", "c4", "c_aa", "c2_aa", "c4_aa")
    series = OtocSeries(np.arange(t_max + 1), params=params,
                        stderr=dict(zip(names, err)), estimator="stochastic",
                        **dict(zip(names, mean)))
    return series.to_raw() if normalization == RAW_TRACE else series
