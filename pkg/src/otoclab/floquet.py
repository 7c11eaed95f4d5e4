"""Quantized coupled standard maps on the torus.

Composite basis index convention: ``|n1 n2> -> n1 * N + n2`` (subsystem 1
is the slow index), so a composite state reshaped to ``(N, N)`` has rows
labelled by ``n1``.  The ``N**2 x N**2`` propagator is never formed except
by :meth:`CompositePropagator.dense`, which exists for test oracles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import DimensionError, ParameterError, SimParams

__all__ = [
    "build_single_floquet",
    "kinetic_propagator",
    "build_interaction",
    "momentum_translation",
    "position_translation",
    "cosine_observable",
    "CompositePropagator",
    "apply_propagator",
    "CoupledKickedRotors",
]

TWO_PI = 2.0 * np.pi


def _check_N(N):
    if int(N) != N or N < 2:
        raise ParameterError(f"N must be an integer >= 2, got {N!r}")
    return int(N)


def kinetic_propagator(N, beta=0.0, method="fft"):
    """Free-rotation part of the single rotor Floquet operator.

    ``G[n', n] = 1/N sum_m exp(-i pi (m+beta)^2 / N) exp(2 pi i (m+beta)(n-n') / N)``
    """
    N = _check_N(N)
    m = np.arange(N)
    kin = np.exp(-1j * np.pi * (m + beta) ** 2 / N)
    if method == "direct":
        d = m[None, :] - m[:, None]  # n - n'
        phase = np.exp(2j * np.pi * np.multiply.outer(d, m + beta) / N)
        return phase @ kin / N
    if method != "fft":
        raise ParameterError(f"unknown method {method!r}")
    # g[d] for d = 0..N-1; negative offsets pick up exp(-2 pi i beta)
    g = np.fft.ifft(kin) * np.exp(2j * np.pi * beta * m / N)
    d = m[None, :] - m[:, None]
    G = g[d % N]
    if beta:
        G = np.where(d < 0, G * np.exp(-2j * np.pi * beta), G)
    return G


def build_single_floquet(K, N, alpha=0.35, beta=0.0, method="fft"):
    """Position-basis Floquet matrix of one kicked rotor.

    The kick is diagonal in position and acts first; ``method`` selects
    how the kinetic sum is evaluated (``"fft"`` or ``"direct"``).
    """
    N = _check_N(N)
    n = np.arange(N)
    kick = np.exp(-1j * N * K / TWO_PI * np.cos(TWO_PI * (n + alpha) / N))
    return kinetic_propagator(N, beta, method) * kick[None, :]


def build_interaction(b, N, alpha=0.35):
    """Diagonal of the interaction ``U_b`` over the composite basis."""
    N = _check_N(N)
    n = np.arange(N)
    s = n[:, None] + n[None, :] + 2.0 * alpha
    return np.exp(-1j * N * b / TWO_PI * np.cos(TWO_PI * s / N)).ravel()


def position_translation(N):
    """``T_q |n> = |n+1 mod N>``."""
    N = _check_N(N)
    return np.roll(np.eye(N, dtype=complex), 1, axis=0)


def momentum_translation(N, alpha=0.35):
    """``T_p |n> = exp(2 pi i (n + alpha) / N) |n>``."""
    N = _check_N(N)
    return np.diag(np.exp(2j * np.pi * (np.arange(N) + alpha) / N))


def cosine_observable(N, alpha=0.35):
    """``(T_p + T_p^dag) / 2``, the quantum version of ``cos(2 pi q)``."""
    Tp = momentum_translation(N, alpha)
    return 0.5 * (Tp + Tp.conj().T)


def _apply_local(M1, M2, X):
    """``(M1 kron M2) @ X`` for ``X`` of shape ``(N*N, P)``."""
    N = M1.shape[0]
    P = X.shape[1]
    Y = (M1 @ X.reshape(N, N * P)).reshape(N, N, P)
    return np.matmul(M2, Y).reshape(N * N, P)


@dataclass(frozen=True, eq=False)
class CompositePropagator:
    """``U = (F1 kron F2) diag(phases)`` in factored form."""

    f1: np.ndarray
    f2: np.ndarray
    phases: np.ndarray
    params: SimParams = None

    @classmethod
    def from_params(cls, params: SimParams) -> "CompositePropagator":
        p = params
        return cls(
            f1=build_single_floquet(p.K1, p.N, p.alpha, p.beta),
            f2=build_single_floquet(p.K2, p.N, p.alpha, p.beta),
            phases=build_interaction(p.b, p.N, p.alpha),
            params=p,
        )

    @property
    def N(self):
        return self.f1.shape[0]

    @property
    def dim(self):
        return self.N * self.N

    def _as_rows(self, psi):
        psi = np.asarray(psi, dtype=complex)
        if psi.shape[-1] != self.dim or psi.ndim > 2:
            raise DimensionError(
                f"state has shape {psi.shape}, expected (..., {self.dim})")
        return psi.reshape(-1, self.N, self.N)

    def forward(self, psi):
        """``U @ psi``; ``psi`` is one state or a stack of row states."""
        shape = np.shape(psi)
        X = self._as_rows(psi).reshape(-1, self.dim) * self.phases
        X = X.reshape(-1, self.N, self.N)
        X = np.matmul(self.f1, X) @ self.f2.T
        return X.reshape(shape)

    def backward(self, psi):
        """``U^dag @ psi``."""
        shape = np.shape(psi)
        X = self._as_rows(psi)
        X = np.matmul(self.f1.conj().T, X) @ self.f2.conj()
        return X.reshape(shape) * self.phases.conj()

    def heisenberg(self, A):
        """One Heisenberg step ``U^dag A U`` of a Hermitian operator."""
        A = np.asarray(A)
        if A.shape != (self.dim, self.dim):
            raise DimensionError(f"operator has shape {A.shape}")
        f1h, f2h = self.f1.conj().T, self.f2.conj().T
        X = _apply_local(f1h, f2h, A)
        # (F^dag A) F = (F^dag (F^dag A)^dag)^dag for Hermitian A
        X = _apply_local(f1h, f2h, X.conj().T).conj().T
        d = self.phases
        X *= d.conj()[:, None]
        X *= d[None, :]
        return X

    def dense(self):
        """Explicit ``N**2 x N**2`` matrix (oracle use only)."""
        return np.kron(self.f1, self.f2) * self.phases[None, :]


def apply_propagator(U: CompositePropagator, psi, direction="forward"):
    if direction == "forward":
        return U.forward(psi)
    if direction == "backward":
        return U.backward(psi)
    raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")


class CoupledKickedRotors(TransformerMixin, BaseEstimator):
    """Stroboscopic evolution of composite states as a transformer.

    ``transform`` propagates each row of ``X`` (shape ``(n_states, N**2)``)
    forward by ``n_kicks`` periods; ``inverse_transform`` undoes it.

    Examples
    --------
    >>> import numpy as np
    >>> rot = CoupledKickedRotors(N=8, K1=9.0, K2=10.0, b=0.1).fit()
    >>> psi = np.eye(64)[:2]
    >>> np.allclose(rot.inverse_transform(rot.transform(psi)), psi)
    True
    """

    def __init__(self, N=64, K1=9.0, K2=10.0, b=0.0, alpha=0.35, beta=0.0,
                 n_kicks=1):
        self.N = N
        self.K1 = K1
        self.K2 = K2
        self.b = b
        self.alpha = alpha
        self.beta = beta
        self.n_kicks = n_kicks

    def fit(self, X=None, y=None):
        self.params_ = SimParams(self.N, self.K1, self.K2, self.b,
                                 self.alpha, self.beta)
        self.propagator_ = CompositePropagator.from_params(self.params_)
        self.n_features_in_ = self.params_.dim
        return self

    def _check(self, X):
        check_is_fitted(self, "propagator_")
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def transform(self, X):
        X = self._check(X)
        for _ in range(self.n_kicks):
            X = self.propagator_.forward(X)
        return X

    def inverse_transform(self, X):
        X = self._check(X)
        for _ in range(self.n_kicks):
            X = self.propagator_.backward(X)
        return X
