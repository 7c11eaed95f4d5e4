"""Shared types and trace conventions for bipartite OTOC computations.

All OTOC values produced by this package follow one convention::

    C(t) = -1/2 <[A(t), B]^2> = C2(t) - C4(t)

where ``<X>`` is the normalized trace ``Tr(X) / dim``.  With the default
cosine observables the saturation value of ``C_AB`` is therefore
``<O1^2><O2^2> = 1/4``.  Series can also be emitted as raw traces
(multiplied by ``N**2``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "SimParams",
    "OtocSeries",
    "DimensionError",
    "ParameterError",
    "FitDomainError",
    "normalized_trace",
    "commutator_hs_norm",
    "check_hermitian",
    "check_square",
]

RAW_TRACE = "raw-trace"
NORMALIZED = "trace-over-N2"


class ParameterError(ValueError):
    """Invalid physical or numerical parameter."""


class DimensionError(ValueError):
    """Operator or state dimensions are inconsistent."""


class FitDomainError(ValueError):
    """Data cannot be fitted by the requested log-linear model."""


@dataclass(frozen=True)
class SimParams:
    """Parameters of two coupled quantum kicked rotors on the torus.

    ``alpha`` breaks parity and ``beta`` time reversal; defaults give
    time-reversal invariant, parity-broken rotors.
    """

    N: int
    K1: float
    K2: float
    b: float
    alpha: float = 0.35
    beta: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N!r}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ParameterError(f"{name} must lie in [0, 1), got {v!r}")
        for name in ("K1", "K2", "b"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dim(self) -> int:
        return self.N * self.N

    def replace(self, **changes) -> "SimParams":
        kw = dict(N=self.N, K1=self.K1, K2=self.K2, b=self.b,
                  alpha=self.alpha, beta=self.beta)
        kw.update(changes)
        return SimParams(**kw)


@dataclass
class OtocSeries:
    """Time-indexed OTOC record.

    ``c2``/``c4`` belong to the ``c_ab`` pair and ``c2_aa``/``c4_aa`` to
    ``c_aa``.  ``stderr`` maps column names to standard errors and is
    empty for exact series.
    """

    times: np.ndarray
    c_aa: np.ndarray
    c_ab: np.ndarray
    c2: np.ndarray
    c4: np.ndarray
    c2_aa: np.ndarray
    c4_aa: np.ndarray
    params: Optional[SimParams] = None
    normalization: str = NORMALIZED
    stderr: dict = field(default_factory=dict)
    estimator: str = "exact"

    COLUMNS = ("c_aa", "c_ab", "c2", "c4", "c2_aa", "c4_aa")

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=int)
        for name in self.COLUMNS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.times.shape:
                raise DimensionError(f"column {name} has shape {arr.shape}")
            setattr(self, name, arr)

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        if name not in self.COLUMNS:
            raise KeyError(name)
        return getattr(self, name)

    def to_raw(self) -> "OtocSeries":
        """Return the same series with unnormalized traces."""
        if self.normalization == RAW_TRACE:
            return self
        scale = float(self.params.dim) if self.params is not None else None
        if scale is None:
            raise ParameterError("raw traces need params to know the dimension")
        cols = {c: getattr(self, c) * scale for c in self.COLUMNS}
        err = {k: v * scale for k, v in self.stderr.items()}
        return OtocSeries(self.times, params=self.params,
                          normalization=RAW_TRACE, stderr=err,
                          estimator=self.estimator, **cols)


def check_square(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return M


def check_hermitian(M, atol=1e-12) -> np.ndarray:
    M = check_square(M)
    if not np.allclose(M, M.conj().T, rtol=0.0, atol=atol):
        raise ParameterError("operator is not Hermitian")
    return M


def normalized_trace(M) -> complex:
    """Infinite-temperature average ``Tr(M) / dim``."""
    M = check_square(M)
    return complex(np.trace(M) / M.shape[0])


def commutator_hs_norm(A, B) -> float:
    """``-<[A, B]^2>`` for Hermitian ``A`` and ``B``.

    Evaluated as ``<[A,B]^dag [A,B]>`` so that round-off cannot make it
    negative.
    """
    A = check_square(A)
    B = check_square(B)
    if A.shape != B.shape:
        raise DimensionError(f"shapes differ: {A.shape} vs {B.shape}")
    comm = A @ B - B @ A
    return float(np.sum(np.abs(comm) ** 2).real / A.shape[0])
