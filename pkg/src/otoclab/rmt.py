"""Random-matrix model of the post-Ehrenfest OTOC and its relaxation rates.

Each step of the model propagator is ``(F1 kron F2) diag(exp(i eps xi))``
with ``F1``, ``F2`` fresh circular-ensemble samples and ``xi`` fresh
uniform phases.  Randomness for realization ``r`` and step ``j`` comes from
``default_rng([seed, r, j])`` so any realization can be regenerated alone.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import j0, roots_legendre

from .core import ParameterError, check_hermitian
from .floquet import CompositePropagator, cosine_observable
from .otoc import _Local, _pair_diag, _pair_exact

__all__ = [
    "RmtParams",
    "RmtOtocResult",
    "AccuracyError",
    "sample_cue",
    "sample_coe",
    "sample_diag_interaction",
    "rmt_otoc",
    "analytic_otoc",
    "sinc",
    "mu_rmt",
    "mu_rmt_quadratic",
    "mu_kicked",
    "mu_kicked_quadratic",
    "mu_general",
]


class AccuracyError(ArithmeticError):
    """Quadrature did not converge under refinement."""


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_cue(N, seed=None):
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix.

    The phases of ``diag(R)`` are moved into ``Q`` so the result is exactly
    Haar distributed.
    """
    if N < 2:
        raise ParameterError("N must be >= 2")
    rng = _rng(seed)
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))[None, :]


def sample_coe(N, seed=None):
    """Symmetric unitary ``U^T U`` with ``U`` drawn from the CUE."""
    U = sample_cue(N, seed)
    return U.T @ U


def sample_diag_interaction(epsilon, dim, seed=None):
    """Pure phases ``exp(i eps xi)`` with ``xi`` uniform on ``[-pi, pi)``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ParameterError("epsilon must lie in [0, 1]")
    xi = _rng(seed).uniform(-np.pi, np.pi, size=dim)
    return np.exp(1j * epsilon * xi)


_SAMPLERS = {"CUE": sample_cue, "COE": sample_coe}


@dataclass(frozen=True)
class RmtParams:
    N: int
    epsilon: float
    ensemble: str = "CUE"
    n_real: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ParameterError("N must be >= 2")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ParameterError("epsilon must lie in [0, 1]")
        if self.ensemble not in _SAMPLERS:
            raise ParameterError(f"ensemble must be COE or CUE, got {self.ensemble!r}")
        if self.n_real < 2:
            raise ParameterError("n_real must be >= 2")


@dataclass
class RmtOtocResult:
    times: np.ndarray
    c_ab: np.ndarray
    c2: np.ndarray
    c4: np.ndarray
    stderr: dict
    analytic: Optional[np.ndarray]
    params: RmtParams
    samples: dict = field(default_factory=dict, repr=False)


def _step(params: RmtParams, r, j):
    rng = np.random.default_rng([params.seed, r, j])
    sampler = _SAMPLERS[params.ensemble]
    f1 = sampler(params.N, rng)
    f2 = sampler(params.N, rng)
    phases = sample_diag_interaction(params.epsilon, params.N ** 2, rng)
    return CompositePropagator(f1, f2, phases)


def _realization(params, r, t_max, A0, B):
    dim = params.N ** 2
    At = A0.dense().astype(complex)
    out = np.empty((3, t_max + 1))
    for t in range(t_max + 1):
        if t:
            At = _step(params, r, t).heisenberg(At)
        if A0.diag is not None and B.diag is not None:
            W = At.real ** 2 + At.imag ** 2
            out[:, t] = _pair_diag(W, B.full_diag.real, dim)
        else:
            out[:, t] = _pair_exact(At, B, dim)
    return out


def rmt_otoc(params: RmtParams, t_max, O1=None, O2=None) -> RmtOtocResult:
    """Ensemble-averaged ``C_AB``, ``C2`` and ``C4`` of the random model.

    Traces are exact for every realization.  The closed form assumes
    observables diagonal in the interaction basis; for other observables a
    warning is issued and ``analytic`` is ``None``.
    """
    N = params.N
    O1 = cosine_observable(N, 0.35) if O1 is None else check_hermitian(O1)
    O2 = cosine_observable(N, 0.35) if O2 is None else check_hermitian(O2)
    A0 = _Local(np.asarray(O1, complex), 1, N)
    B = _Local(np.asarray(O2, complex), 2, N)
    t_max = int(t_max)
    runs = np.array([_realization(params, r, t_max, A0, B)
                     for r in range(params.n_real)])
    mean = runs.mean(axis=0)
    err = runs.std(axis=0, ddof=1) / math.sqrt(params.n_real)
    names = ("c_ab", "c2", "c4")
    times = np.arange(t_max + 1)
    analytic = None
    if A0.diag is None or B.diag is None:
        warnings.warn("observables are not diagonal in the interaction basis; "
                      "analytic comparison disabled", RuntimeWarning, stacklevel=2)
    else:
        tr1 = np.trace(O1 @ O1).real / N
        tr2 = np.trace(O2 @ O2).real / N
        analytic = np.array([0.0] + [analytic_otoc(params.epsilon, t, tr1, tr2)
                                     for t in times[1:]])
    return RmtOtocResult(times, mean[0], mean[1], mean[2],
                         dict(zip(names, err)), analytic, params,
                         samples=dict(zip(names, np.moveaxis(runs, 1, 0))))


def sinc(x):
    """``sin(x)/x`` with ``sinc(0) = 1`` (unnormalized, unlike ``np.sinc``)."""
    return np.sinc(np.asarray(x) / np.pi)


def analytic_otoc(epsilon, t, trO1sq, trO2sq):
    """Closed-form ensemble OTOC ``Tr O1^2 Tr O2^2 [1 - sinc^(4(t-1))(pi eps)]``."""
    if t < 1:
        raise ParameterError("the closed form holds for t >= 1")
    s = float(sinc(np.pi * epsilon))
    return trO1sq * trO2sq * (1.0 - s ** (4 * (t - 1)))


def mu_rmt(epsilon):
    """Relaxation rate ``-4 ln|sinc(pi eps)|``; ``inf`` at ``eps = 1``."""
    if epsilon == 0:
        return 0.0
    if not 0.0 < epsilon <= 1.0:
        raise ParameterError("epsilon must lie in [0, 1]")
    s = abs(float(sinc(np.pi * epsilon)))
    if s < 1e-15:
        return math.inf
    return -4.0 * math.log(s)


def mu_rmt_quadratic(epsilon):
    """Small-coupling form ``2 pi^2 eps^2 / 3``."""
    return 2.0 * math.pi ** 2 * epsilon ** 2 / 3.0


def mu_kicked(b, N):
    """Kicked-rotor relaxation rate ``-4 ln|J0(N b / 2 pi)|``; ``inf`` at zeros of J0."""
    x = N * b / (2.0 * math.pi)
    j = abs(float(j0(x)))
    if j < 1e-14:
        return math.inf
    return -4.0 * math.log(j)


def mu_kicked_quadratic(b, N):
    return (N * b) ** 2 / (4.0 * math.pi ** 2)


def _gl_average(V, phase, n):
    x, w = roots_legendre(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    vals = np.exp(-1j * phase * V(X1, X2))
    return np.einsum("i,j,ij->", w, w, vals)


def mu_general(V, epsilon, scale=1.0, quadrature_n=64, tol=1e-10):
    """Relaxation rate ``-4 ln|int_0^1 int_0^1 exp(-i scale eps V) dxi1 dxi2|``.

    ``scale`` plays the role of ``1/hbar``; for the kicked rotor with
    ``V = cos(2 pi (xi1 + xi2)) / 4 pi^2`` and ``eps = b`` use
    ``scale = 2 pi N``, which gives :func:`mu_kicked`.  Gauss-Legendre
    rules of order ``n`` and ``2n`` must agree to ``tol``.
    """
    phase = scale * epsilon
    coarse = _gl_average(V, phase, quadrature_n)
    fine = _gl_average(V, phase, 2 * quadrature_n)
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise AccuracyError(
            f"quadrature unstable: |I_2n - I_n| = {abs(fine - coarse):.2e}; "
            "increase quadrature_n")
    a = abs(fine)
    if a < 1e-300:
        return math.inf
    return -4.0 * math.log(a)
