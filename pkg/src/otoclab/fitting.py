"""Log-linear fits of OTOC growth and relaxation.

The regressors follow the scikit-learn estimator protocol: ``X`` is the
vector of kick counts (1-D, or a single column) and ``y`` the OTOC values.
Fit windows are inclusive ``(t_lo, t_hi)`` pairs in kick units.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .core import FitDomainError, OtocSeries, ParameterError

__all__ = [
    "GrowthFit",
    "RelaxationFit",
    "ExponentialGrowthRegressor",
    "PowerLawRegressor",
    "RelaxationRegressor",
    "fit_lyapunov",
    "fit_power_law",
    "fit_relaxation",
    "ehrenfest_time",
    "growth_onset",
    "growth_window",
    "relaxation_window",
    "saturation_onset",
    "RegularDynamicsError",
]

MIN_POINTS = 3


class RegularDynamicsError(ParameterError):
    """Non-positive Lyapunov exponent; use the sqrt(N) time scale instead."""


@dataclass(frozen=True)
class GrowthFit:
    model: str
    rate: float
    amplitude: float
    window: Tuple[int, int]
    residual: float
    stderr: float


@dataclass(frozen=True)
class RelaxationFit:
    c_inf: float
    gamma: float
    mu: float
    window: Tuple[int, int]
    residual: float = 0.0
    stderr: float = 0.0


def _as_times(X):
    t = np.asarray(X, dtype=float)
    if t.ndim == 2:
        if t.shape[1] != 1:
            raise ParameterError("X must be a vector of times or a single column")
        t = t[:, 0]
    if t.ndim != 1:
        raise ParameterError("X must be one-dimensional")
    return t


def _select(t, y, window):
    y = np.asarray(y, dtype=float)
    if y.shape != t.shape:
        raise ParameterError(f"X and y lengths differ: {t.shape} vs {y.shape}")
    if window is None:
        return t, y, (int(t.min()), int(t.max()))
    lo, hi = window
    if lo > hi:
        raise FitDomainError(f"empty window {window}")
    mask = (t >= lo) & (t <= hi)
    if not mask.any():
        raise FitDomainError(f"window {window} outside available times")
    return t[mask], y[mask], (int(lo), int(hi))


def _drop_nonpositive(x, y, what="OTOC"):
    keep = y > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} non-positive {what} "
                      "values from log fit", RuntimeWarning, stacklevel=3)
    x, y = x[keep], y[keep]
    if len(x) < MIN_POINTS:
        raise FitDomainError(
            f"need at least {MIN_POINTS} positive points, got {len(x)}")
    return x, y


def _linfit(x, ly):
    res = stats.linregress(x, ly)
    resid = ly - (res.intercept + res.slope * x)
    stderr = float(res.stderr) if np.isfinite(res.stderr) else 0.0
    return float(res.slope), float(res.intercept), float(np.sum(resid ** 2)), stderr


class ExponentialGrowthRegressor(RegressorMixin, BaseEstimator):
    """Fit ``y = amplitude * exp(rate * t)`` by least squares on ``ln y``.

    For an OTOC the fitted ``rate_`` is ``2 * lambda_L``.
    """

    def __init__(self, window=None):
        self.window = window

    def fit(self, X, y):
        t, y, win = _select(_as_times(X), y, self.window)
        t, y = _drop_nonpositive(t, y)
        slope, icpt, resid, err = _linfit(t, np.log(y))
        self.rate_ = slope
        self.amplitude_ = math.exp(icpt)
        self.window_ = win
        self.residual_ = resid
        self.stderr_ = err
        return self

    def predict(self, X):
        check_is_fitted(self, "rate_")
        return self.amplitude_ * np.exp(self.rate_ * _as_times(X))

    def to_fit(self) -> GrowthFit:
        check_is_fitted(self, "rate_")
        return GrowthFit("exponential", self.rate_, self.amplitude_,
                         self.window_, self.residual_, self.stderr_)


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Fit ``y = amplitude * t**exponent`` on log-log axes."""

    def __init__(self, window=None):
        self.window = window

    def fit(self, X, y):
        t, y, win = _select(_as_times(X), y, self.window)
        if np.any(t <= 0):
            raise FitDomainError("power-law window must exclude t <= 0")
        t, y = _drop_nonpositive(t, y)
        slope, icpt, resid, err = _linfit(np.log(t), np.log(y))
        self.exponent_ = slope
        self.amplitude_ = math.exp(icpt)
        self.window_ = win
        self.residual_ = resid
        self.stderr_ = err
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        return self.amplitude_ * _as_times(X) ** self.exponent_

    def to_fit(self) -> GrowthFit:
        check_is_fitted(self, "exponent_")
        return GrowthFit("power-law", self.exponent_, self.amplitude_,
                         self.window_, self.residual_, self.stderr_)


class RelaxationRegressor(RegressorMixin, BaseEstimator):
    """Fit ``y = c_inf * (1 - gamma * exp(-mu * (t - t_ref)))``.

    ``t_ref`` defaults to the start of the window, so ``gamma`` is the
    relative distance from saturation there.
    """

    def __init__(self, c_inf=0.25, window=None, t_ref=None):
        self.c_inf = c_inf
        self.window = window
        self.t_ref = t_ref

    def fit(self, X, y):
        if not self.c_inf > 0:
            raise ParameterError("c_inf must be positive")
        t, y, win = _select(_as_times(X), y, self.window)
        t, gap = _drop_nonpositive(t, self.c_inf - y, what="headroom (c_inf - C)")
        t_ref = win[0] if self.t_ref is None else self.t_ref
        slope, icpt, resid, err = _linfit(t - t_ref, np.log(gap))
        self.mu_ = -slope
        self.gamma_ = math.exp(icpt) / self.c_inf
        self.window_ = win
        self.t_ref_ = t_ref
        self.residual_ = resid
        self.stderr_ = err
        return self

    def predict(self, X):
        check_is_fitted(self, "mu_")
        t = _as_times(X)
        return self.c_inf * (1.0 - self.gamma_ * np.exp(-self.mu_ * (t - self.t_ref_)))

    def to_fit(self) -> RelaxationFit:
        check_is_fitted(self, "mu_")
        return RelaxationFit(self.c_inf, self.gamma_, self.mu_, self.window_,
                             self.residual_, self.stderr_)


def fit_lyapunov(series: OtocSeries, window, column="c_ab") -> GrowthFit:
    """Exponential growth fit; ``rate`` is ``2 * lambda_L``."""
    est = ExponentialGrowthRegressor(window=window)
    return est.fit(series.times, series.column(column)).to_fit()


def fit_power_law(series: OtocSeries, window, column="c_ab") -> GrowthFit:
    est = PowerLawRegressor(window=window)
    return est.fit(series.times, series.column(column)).to_fit()


def _default_c_inf(series, obs1=None, obs2=None):
    if obs1 is None and obs2 is None:
        # <O^2> = 1/2 for the cosine observable
        c = 0.25
    else:
        c = (np.trace(obs1 @ obs1).real / len(obs1)) * (np.trace(obs2 @ obs2).real / len(obs2))
    if series.normalization == "raw-trace":
        c *= series.params.dim
    return c


def fit_relaxation(series: OtocSeries, window, c_inf: Optional[float] = None,
                   column="c_ab") -> RelaxationFit:
    """Fit the approach of ``column`` to saturation ``c_inf``.

    ``c_inf`` defaults to ``<O1^2><O2^2>`` of the cosine observables in the
    series' normalization.
    """
    if c_inf is None:
        c_inf = _default_c_inf(series)
    est = RelaxationRegressor(c_inf=c_inf, window=window)
    return est.fit(series.times, series.column(column)).to_fit()


def ehrenfest_time(N, lambda_cl) -> float:
    """``ln(N) / lambda_cl``, the time for an hbar-cell to cover the torus."""
    if not lambda_cl > 0:
        raise RegularDynamicsError(
            f"lambda_cl = {lambda_cl!r} <= 0: regular dynamics, the Ehrenfest "
            f"time scales as sqrt(N) = {math.sqrt(N):.3g} instead")
    return math.log(N) / lambda_cl


def growth_onset(series: OtocSeries, column="c_ab", rtol=1e-10) -> int:
    """First kick ``t >= 1`` at which ``column`` is distinguishable from zero."""
    y = series.column(column)
    scale = np.max(np.abs(y))
    if scale == 0:
        raise FitDomainError(f"{column} vanishes identically")
    for t, v in zip(series.times, y):
        if t >= 1 and v > rtol * scale:
            return int(t)
    raise FitDomainError(f"{column} never grows")


def growth_window(series: OtocSeries, t_ef, column="c_ab"):
    """Pre-Ehrenfest window ``[t_on, t_on + max(2, floor(t_ef))]``.

    ``t_on`` is the first nonzero kick: ``C_AB`` needs one kick for the
    interaction to act, so it vanishes at ``t = 1``.
    """
    t_on = growth_onset(series, column)
    hi = t_on + max(MIN_POINTS - 1, int(math.floor(t_ef)))
    return t_on, min(hi, int(series.times[-1]))


def relaxation_window(series: OtocSeries, t_ef, c_inf=None, column="c_ab",
                      floor=0.02):
    """Post-Ehrenfest window.

    Starts at ``t_on + ceil(t_ef) + 1`` and ends at the last time before
    ``c_inf - C`` drops below ``max(10 * stderr, floor * c_inf)``.
    """
    if c_inf is None:
        c_inf = _default_c_inf(series)
    y = series.column(column)
    err = series.stderr.get(column, np.zeros_like(y))
    lo = growth_onset(series, column) + int(math.ceil(t_ef)) + 1
    hi = lo
    for t, v, e in zip(series.times, y, err):
        if t < lo:
            continue
        if c_inf - v < max(10.0 * e, floor * c_inf):
            break
        hi = int(t)
    if hi - lo + 1 < MIN_POINTS:
        raise FitDomainError(
            f"post-Ehrenfest window [{lo}, {hi}] too short; increase t_max")
    return lo, hi


def saturation_onset(series: OtocSeries, column="c_ab", c_inf=None,
                     fraction=0.5) -> float:
    """Time at which ``column`` first reaches ``fraction * c_inf``.

    Interpolates linearly in ``ln C`` between the bracketing kicks.
    """
    if c_inf is None:
        c_inf = _default_c_inf(series)
    target = fraction * c_inf
    t = series.times
    y = series.column(column)
    above = np.nonzero(y >= target)[0]
    if len(above) == 0:
        raise FitDomainError(f"{column} never reaches {target:g}")
    i = above[0]
    if i == 0 or y[i - 1] <= 0:
        return float(t[i])
    l0, l1 = np.log(y[i - 1]), np.log(y[i])
    return float(t[i - 1] + (np.log(target) - l0) / (l1 - l0) * (t[i] - t[i - 1]))
