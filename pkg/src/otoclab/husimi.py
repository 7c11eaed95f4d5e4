"""Torus coherent states, reduced density matrices and Husimi grids.

Position eigenvalues sit at ``q_n = (n + alpha) / N`` so coherent states
share the boundary phase of ``T_p``.  Husimi values are raw overlaps
``<qp|rho|qp>`` in ``[0, 1]``; no ``N/pi`` rescaling is applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import DimensionError, ParameterError, SimParams, check_square
from .floquet import CompositePropagator

__all__ = [
    "HUSIMI_NORMALIZATION",
    "SNAPSHOT_TIMES",
    "HusimiGrid",
    "coherent_state",
    "coherent_states",
    "product_state",
    "reduced_density",
    "purity",
    "check_density",
    "husimi_grid",
    "evolve_snapshots",
    "mean_purity",
    "HusimiTransformer",
]

HUSIMI_NORMALIZATION = "raw-overlap"

# default snapshot list; 10 is absent on purpose
SNAPSHOT_TIMES = (0, 2, 4, 6, 8, 12, 14, 16, 18, 20)


@dataclass(frozen=True)
class HusimiGrid:
    """``values[i, j] = <q_i p_j|rho|q_i p_j>`` with ``q_i = i/G``, ``p_j = j/G``."""

    values: np.ndarray
    q: np.ndarray
    p: np.ndarray
    normalization: str = HUSIMI_NORMALIZATION

    @property
    def resolution(self):
        return self.values.shape[0]


def _n_images(N, tol=1e-14):
    # exp(-pi N d^2) < tol once d exceeds this many periods
    return int(math.ceil(math.sqrt(-math.log(tol) / (math.pi * N)))) + 1


def coherent_states(q0, p0, N, alpha=0.35):
    """Rows of unit-norm coherent states for arrays of centers ``(q0, p0)``."""
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if q0.shape != p0.shape:
        raise ParameterError("q0 and p0 must have the same shape")
    if int(N) != N or N < 2:
        raise ParameterError(f"N must be an integer >= 2, got {N!r}")
    x = (np.arange(N) + alpha) / N
    w = np.arange(-_n_images(N), _n_images(N) + 1)
    # shape (centers, images, n)
    s = x[None, None, :] + w[None, :, None]
    d = s - q0[:, None, None]
    amp = np.exp(-math.pi * N * d ** 2 + 2j * math.pi * N * p0[:, None, None] * s)
    psi = amp.sum(axis=1)
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def coherent_state(q0, p0, N, alpha=0.35):
    """Periodized Gaussian centered at ``(q0, p0)`` with equal widths in q and p."""
    for v in (q0, p0):
        if not 0.0 <= v < 1.0:
            raise ParameterError("coherent-state center must lie in [0, 1)^2")
    return coherent_states([q0], [p0], N, alpha)[0]


def product_state(phi1, phi2):
    """``phi1 kron phi2`` in the ``n1 * N + n2`` ordering."""
    return np.kron(phi1, phi2)


def _as_square_state(psi):
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise DimensionError("expected a single composite state vector")
    N = math.isqrt(psi.size)
    if N * N != psi.size:
        raise DimensionError(f"state dimension {psi.size} is not a perfect square")
    return psi.reshape(N, N)


def reduced_density(psi, subsystem=1):
    """Partial trace of ``|psi><psi|`` onto ``subsystem``."""
    M = _as_square_state(psi)
    if subsystem == 1:
        return M @ M.conj().T
    if subsystem == 2:
        return M.T @ M.conj()
    raise ParameterError("subsystem must be 1 or 2")


def check_density(rho, tol=1e-10):
    """Validate Hermiticity, unit trace and positivity; returns ``rho``."""
    rho = check_square(np.asarray(rho, dtype=complex))
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
        raise ParameterError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ParameterError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ParameterError("density matrix has a negative eigenvalue")
    return rho


def purity(rho):
    """``tr(rho^2)`` for Hermitian ``rho``."""
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho) ** 2))


def husimi_grid(rho, G=64, alpha=0.35) -> HusimiGrid:
    rho = check_density(rho)
    N = rho.shape[0]
    if G < 1:
        raise ParameterError("G must be positive")
    axis = np.arange(G) / G
    Q, P = np.meshgrid(axis, axis, indexing="ij")
    Z = coherent_states(Q.ravel(), P.ravel(), N, alpha)
    vals = np.einsum("kn,nm,km->k", Z.conj(), rho, Z)
    # rho >= 0 makes these real and non-negative up to rounding
    return HusimiGrid(np.maximum(vals.real, 0.0).reshape(G, G), axis, axis.copy())


def evolve_snapshots(params: SimParams, psi0, times=SNAPSHOT_TIMES):
    """Composite states at the requested kick counts, in ascending order."""
    times = sorted(int(t) for t in times)
    if times and times[0] < 0:
        raise ParameterError("snapshot times must be non-negative")
    U = CompositePropagator.from_params(params)
    psi = np.asarray(psi0, dtype=complex)
    out, t = {}, 0
    for target in times:
        while t < target:
            psi = U.forward(psi)
            t += 1
        out[target] = psi.copy()
    return out


def mean_purity(params: SimParams, t, n_states=10, seed=0, subsystem=1):
    """Subsystem purity at kick ``t`` averaged over random product coherent states.

    Centers for both subsystems are drawn uniformly from the unit square.
    Returns ``(mean, per_state)``.
    """
    rng = np.random.default_rng(seed)
    centers = rng.random((n_states, 4))
    N, a = params.N, params.alpha
    phi1 = coherent_states(centers[:, 0], centers[:, 1], N, a)
    phi2 = coherent_states(centers[:, 2], centers[:, 3], N, a)
    psi = np.einsum("ki,kj->kij", phi1, phi2).reshape(n_states, N * N)
    U = CompositePropagator.from_params(params)
    for _ in range(int(t)):
        psi = U.forward(psi)
    vals = np.array([purity(reduced_density(p, subsystem)) for p in psi])
    return float(vals.mean()), vals


class HusimiTransformer(TransformerMixin, BaseEstimator):
    """Map composite states (rows) to flattened subsystem Husimi grids."""

    def __init__(self, G=64, subsystem=1, alpha=0.35):
        self.G = G
        self.subsystem = subsystem
        self.alpha = alpha

    def fit(self, X, y=None):
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        _as_square_state(X[0])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.array([
            husimi_grid(reduced_density(x, self.subsystem), self.G, self.alpha).values.ravel()
            for x in X])
