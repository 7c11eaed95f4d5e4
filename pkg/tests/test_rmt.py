import math

import numpy as np
import pytest
from scipy import optimize, stats
from scipy.special import sici

from otoclab.core import ParameterError
from otoclab.rmt import (AccuracyError, RmtParams, analytic_otoc, mu_general,
                         mu_kicked, mu_kicked_quadratic, mu_rmt, mu_rmt_quadratic,
                         rmt_otoc, sample_coe, sample_cue, sample_diag_interaction,
                         sinc)


def j0_series(x, terms=40):
    """Power series of J0, independent of scipy.special."""
    return sum((-1) ** k * (x / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(terms))


def wigner_unitary_cdf(s):
    # integral of (32/pi^2) s^2 exp(-4 s^2/pi)
    a = 4.0 / np.pi
    return (stats.gamma.cdf(a * s ** 2, 1.5))


def test_samples_unitary_and_symmetric():
    for seed in range(3):
        U = sample_cue(12, seed)
        assert np.allclose(U.conj().T @ U, np.eye(12), atol=1e-10)
        W = sample_coe(12, seed)
        assert np.allclose(W.conj().T @ W, np.eye(12), atol=1e-10)
        assert np.max(np.abs(W - W.T)) < 1e-12


def test_cue_spacings_follow_unitary_surmise():
    rng = np.random.default_rng(0)
    N, spacings = 32, []
    for _ in range(200):
        th = np.sort(np.angle(np.linalg.eigvals(sample_cue(N, rng))))
        d = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
        spacings.append(d * N / (2 * np.pi))
    s = np.concatenate(spacings)
    assert stats.kstest(s, wigner_unitary_cdf).statistic < 0.05


def test_gamma_form_of_surmise_cdf():
    s = np.linspace(0, 3, 301)
    pdf = 32 / np.pi ** 2 * s ** 2 * np.exp(-4 * s ** 2 / np.pi)
    cdf = np.concatenate([[0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(s))])
    assert np.allclose(cdf, wigner_unitary_cdf(s), atol=1e-4)


def test_diag_interaction():
    assert np.allclose(sample_diag_interaction(0.0, 16, 0), 1.0)
    d = sample_diag_interaction(0.3, 4096, 1)
    assert np.allclose(np.abs(d), 1.0, atol=1e-15)
    assert abs(d.mean() - sinc(0.3 * np.pi)) < 0.05
    with pytest.raises(ParameterError):
        sample_diag_interaction(1.5, 4)


def test_params_validation():
    with pytest.raises(ParameterError):
        RmtParams(8, 0.1, ensemble="GUE")
    with pytest.raises(ParameterError):
        RmtParams(8, 1.1)


def test_rmt_otoc_zero_coupling():
    res = rmt_otoc(RmtParams(6, 0.0, n_real=4), 5)
    assert np.max(np.abs(res.c_ab)) < 1e-12


def test_rmt_c2_is_saturation_value():
    res = rmt_otoc(RmtParams(8, 0.3, n_real=100, seed=2), 6)
    dev = np.abs(res.c2[1:] - 0.25)
    assert np.all(dev <= 3 * res.stderr["c2"][1:])
    assert np.allclose(res.c_ab, res.c2 - res.c4, atol=1e-12)
    assert res.samples["c_ab"].shape == (100, 7)


def test_rmt_otoc_reproducible_and_coe():
    a = rmt_otoc(RmtParams(6, 0.2, "COE", n_real=3, seed=5), 3)
    b = rmt_otoc(RmtParams(6, 0.2, "COE", n_real=3, seed=5), 3)
    assert np.array_equal(a.c_ab, b.c_ab)


def test_rmt_non_diagonal_observable_warns():
    X = np.ones((4, 4))
    with pytest.warns(RuntimeWarning, match="not diagonal"):
        res = rmt_otoc(RmtParams(4, 0.2, n_real=2), 2, O1=X)
    assert res.analytic is None


def test_analytic_otoc():
    assert analytic_otoc(0.0, 7, 0.5, 0.5) == 0.0
    for eps in (0.1, 0.5, 1.0):
        assert analytic_otoc(eps, 1, 0.5, 0.5) == 0.0
    assert analytic_otoc(0.5, 400, 0.5, 0.5) == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        analytic_otoc(0.1, 0, 0.5, 0.5)


def test_mu_rmt():
    x = 0.1 * math.pi
    assert mu_rmt(0.1) == pytest.approx(-4 * math.log(math.sin(x) / x), rel=1e-12)
    assert mu_rmt(0.1) == pytest.approx(0.0660, abs=5e-5)
    assert mu_rmt_quadratic(0.1) == pytest.approx(0.0658, abs=5e-5)
    assert mu_rmt(0.1) == pytest.approx(mu_rmt_quadratic(0.1), rel=0.01)
    assert mu_rmt(1.0) == math.inf
    assert mu_rmt(0.0) == 0.0
    grid = [mu_rmt(e) for e in np.linspace(0.01, 0.99, 99)]
    assert np.all(np.diff(grid) > 0)


def test_mu_kicked():
    assert mu_kicked(0.0, 64) == 0.0
    x = 1 / (2 * np.pi)
    assert mu_kicked(1 / 64, 64) == pytest.approx(-4 * math.log(j0_series(x)), rel=1e-12)
    assert mu_kicked(1 / 64, 64) == pytest.approx(mu_kicked_quadratic(1 / 64, 64), rel=0.02)
    assert mu_kicked_quadratic(1 / 64, 64) == pytest.approx(1 / (4 * np.pi ** 2))


def test_mu_kicked_at_bessel_zero():
    zero = optimize.brentq(j0_series, 2.0, 3.0, xtol=1e-15)
    assert zero == pytest.approx(2.404825557695773, abs=1e-12)
    N = 64
    assert mu_kicked(2 * np.pi * zero / N, N) == math.inf


def test_mu_general_constant_and_kicked():
    assert mu_general(lambda a, b: np.full_like(a, 3.0), 0.7) == pytest.approx(0.0, abs=1e-12)
    V = lambda a, b: np.cos(2 * np.pi * (a + b)) / (4 * np.pi ** 2)
    for nb in (1.0, 2.0, 3.0):
        N = 64
        b = nb / N
        assert mu_general(V, b, scale=2 * np.pi * N) == pytest.approx(mu_kicked(b, N), rel=1e-9)


def test_mu_general_product_potential():
    a = 0.5
    si, ci = sici(a)
    cin = np.euler_gamma + np.log(a) - ci
    ref = -4 * np.log(abs((si - 1j * cin) / a))
    assert mu_general(lambda x, y: x * y, a) == pytest.approx(ref, abs=1e-8)


def test_mu_general_refuses_unresolved_quadrature():
    with pytest.raises(AccuracyError):
        mu_general(lambda x, y: np.cos(2 * np.pi * (x + y)), 1.0, scale=2000.0, quadrature_n=8)


def test_finite_size_rate_deficit_shrinks_like_inverse_N():
    """The closed form is the large-N limit; the relaxation rate of the
    finite ensemble falls short of it by a relative amount ~ 2/N."""
    from otoclab.fitting import RelaxationRegressor

    eps, deficits = 0.2, {}
    for N, n_real in ((8, 400), (16, 200)):
        r = rmt_otoc(RmtParams(N, eps, n_real=n_real, seed=1), 12)
        mu = RelaxationRegressor(window=(2, 12)).fit(r.times, r.c_ab).mu_
        deficits[N] = 1 - mu / mu_rmt(eps)
    assert 0 < deficits[16] < deficits[8]
    assert deficits[16] / deficits[8] == pytest.approx(0.5, abs=0.15)
