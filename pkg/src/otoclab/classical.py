"""Classical coupled standard map on the 4-torus.

Coordinates are ordered ``(q1, p1, q2, p2)`` along the last axis of every
array, so all routines act on single points and on batches alike.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import ParameterError

__all__ = [
    "ClassicalParams",
    "LyapunovEstimate",
    "ClassicalOtoc",
    "map_step",
    "jacobian",
    "tangent_step",
    "lyapunov_max",
    "lyapunov_spectrum",
    "classical_otoc",
    "SYMPLECTIC_FORM",
]

TWO_PI = 2.0 * np.pi

SYMPLECTIC_FORM = np.array([[0.0, 1.0, 0.0, 0.0],
                            [-1.0, 0.0, 0.0, 0.0],
                            [0.0, 0.0, 0.0, 1.0],
                            [0.0, 0.0, -1.0, 0.0]])


@dataclass(frozen=True)
class ClassicalParams:
    K1: float
    K2: float
    b: float

    def __post_init__(self):
        if not all(np.isfinite([self.K1, self.K2, self.b])):
            raise ParameterError("K1, K2 and b must be finite")


def map_step(x, c: ClassicalParams):
    """One kick followed by free rotation; the new momenta drive the positions."""
    x = np.asarray(x, dtype=float)
    q1, p1, q2, p2 = np.moveaxis(x, -1, 0)
    coupling = c.b / TWO_PI * np.sin(TWO_PI * (q1 + q2))
    p1n = (p1 + c.K1 / TWO_PI * np.sin(TWO_PI * q1) + coupling) % 1.0
    p2n = (p2 + c.K2 / TWO_PI * np.sin(TWO_PI * q2) + coupling) % 1.0
    return np.stack([(q1 + p1n) % 1.0, p1n, (q2 + p2n) % 1.0, p2n], axis=-1)


def jacobian(x, c: ClassicalParams):
    """Exact Jacobian of :func:`map_step` at ``x``, shape ``(..., 4, 4)``."""
    x = np.asarray(x, dtype=float)
    q1, q2 = x[..., 0], x[..., 2]
    cc = c.b * np.cos(TWO_PI * (q1 + q2))
    a1 = c.K1 * np.cos(TWO_PI * q1) + cc
    a2 = c.K2 * np.cos(TWO_PI * q2) + cc
    J = np.zeros(x.shape[:-1] + (4, 4))
    J[..., 1, 0], J[..., 1, 1], J[..., 1, 2] = a1, 1.0, cc
    J[..., 3, 0], J[..., 3, 2], J[..., 3, 3] = cc, a2, 1.0
    J[..., 0, :] = J[..., 1, :]
    J[..., 0, 0] += 1.0
    J[..., 2, :] = J[..., 3, :]
    J[..., 2, 2] += 1.0
    return J


def tangent_step(x, M, c: ClassicalParams):
    """Propagate a tangent matrix (or vectors as columns) through one step at ``x``."""
    return jacobian(x, c) @ M


@dataclass(frozen=True)
class LyapunovEstimate:
    """Largest Lyapunov exponent and the Poisson-bracket growth rate.

    ``lambda_max`` is the usual time-averaged log stretch.  ``bracket_rate``
    is ``(1/k) ln <s_k^2>``, the growth rate of the mean squared stretch
    over renormalization intervals of ``k`` steps; this is the rate at
    which averaged squared Poisson brackets grow and exceeds
    ``2 * lambda_max`` because of stretch fluctuations.
    """

    lambda_max: float
    spread: float
    bracket_rate: float
    per_trajectory: np.ndarray


def _random_points(rng, n):
    return rng.random((n, 4))


def lyapunov_max(c: ClassicalParams, n_traj=100, t_steps=10_000, seed=0,
                 renorm_every=1, transient=100) -> LyapunovEstimate:
    """Tangent-vector estimate with norm renormalization every ``renorm_every`` steps.

    The first ``transient`` steps align the tangent vector and are not
    counted.
    """
    if t_steps < 100:
        raise ParameterError("t_steps must be >= 100")
    k = int(renorm_every)
    rng = np.random.default_rng(seed)
    x = _random_points(rng, n_traj)
    v = rng.standard_normal((n_traj, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(transient):
        v = np.einsum("nij,nj->ni", jacobian(x, c), v)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        x = map_step(x, c)
    n_int = t_steps // k
    logs = np.empty((n_int, n_traj))
    for i in range(n_int):
        for _ in range(k):
            v = np.einsum("nij,nj->ni", jacobian(x, c), v)
            x = map_step(x, c)
        s = np.linalg.norm(v, axis=1)
        logs[i] = np.log(s)
        v /= s[:, None]
    per_traj = logs.sum(axis=0) / (n_int * k)
    bracket = (logsumexp(2.0 * logs) - np.log(logs.size)) / k
    return LyapunovEstimate(float(per_traj.mean()), float(per_traj.std(ddof=1)),
                            float(bracket), per_traj)


def lyapunov_spectrum(c: ClassicalParams, n_traj=10, t_steps=2000, seed=0):
    """All four exponents by QR re-orthonormalization every step."""
    rng = np.random.default_rng(seed)
    x = _random_points(rng, n_traj)
    Q = np.tile(np.eye(4), (n_traj, 1, 1))
    acc = np.zeros((n_traj, 4))
    for _ in range(t_steps):
        Q, R = np.linalg.qr(tangent_step(x, Q, c))
        acc += np.log(np.abs(np.diagonal(R, axis1=1, axis2=2)))
        x = map_step(x, c)
    return np.sort(acc.mean(axis=0) / t_steps)[::-1]


@dataclass(frozen=True)
class ClassicalOtoc:
    """Phase-space averages of the squared Poisson bracket.

    ``mean``/``log_mean`` refer to ``hbar^2/4 {cos 2pi q1(t), cos 2pi q2(0)}^2``,
    ``bare_*`` to ``(dq1(t)/dp2(0))^2``.  ``mean`` is ``inf`` where the
    value overflows doubles; ``log_mean`` stays finite.
    """

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    log_mean: np.ndarray
    bare_mean: np.ndarray
    bare_log_mean: np.ndarray


def _log_stats(logv):
    n = logv.shape[-1]
    lm = logsumexp(logv, axis=-1) - np.log(n)
    with np.errstate(over="ignore", invalid="ignore"):
        m = np.max(logv, axis=-1)
        scaled = np.exp(logv - m[..., None])
        scale = np.exp(m)
        mean = np.exp(lm)
        err = scale * scaled.std(axis=-1, ddof=1) / np.sqrt(n)
    err = np.where(np.isneginf(m), 0.0, err)
    return lm, mean, err


def classical_otoc(c: ClassicalParams, t_max, n_samples=10_000, seed=0,
                   hbar=1.0) -> ClassicalOtoc:
    """Monte Carlo average over uniform points of the 4-torus.

    The tangent matrix is renormalized every step and its scale kept as a
    per-sample logarithm, so squared derivatives never overflow.
    """
    if n_samples < 100:
        raise ParameterError("n_samples must be >= 100")
    rng = np.random.default_rng(seed)
    x = _random_points(rng, n_samples)
    sin_q20 = np.sin(TWO_PI * x[:, 2])
    M = np.tile(np.eye(4), (n_samples, 1, 1))
    log_scale = np.zeros(n_samples)
    log_pref = np.log(hbar ** 2 / 4.0 * TWO_PI ** 4)
    logs, bare = [], []
    with np.errstate(divide="ignore"):
        for t in range(int(t_max) + 1):
            if t:
                M = tangent_step(x, M, c)
                x = map_step(x, c)
                nrm = np.max(np.abs(M), axis=(1, 2))
                M /= nrm[:, None, None]
                log_scale += np.log(nrm)
            ld = 2.0 * (np.log(np.abs(M[:, 0, 3])) + log_scale)
            bare.append(ld)
            logs.append(ld + log_pref + 2.0 * np.log(np.abs(np.sin(TWO_PI * x[:, 0]) * sin_q20)))
        lm, mean, err = _log_stats(np.array(logs))
        blm, bmean, _ = _log_stats(np.array(bare))
    return ClassicalOtoc(np.arange(int(t_max) + 1), mean, err, lm, bmean, blm)
