"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (printed in the terminal summary)
before asserting.  Parts that the implementation does not meet are strict
xfails with the reason; they are not loosened.
"""
import json
import math
import time
import warnings

import numpy as np
import pytest

from otoclab.classical import (SYMPLECTIC_FORM, ClassicalParams, classical_otoc,
                               jacobian, lyapunov_max)
from otoclab.config import parse_config
from otoclab.core import OtocSeries, SimParams
from otoclab.fitting import ExponentialGrowthRegressor, saturation_onset
from otoclab.floquet import CompositePropagator, cosine_observable
from otoclab.husimi import (check_density, coherent_state, mean_purity,
                            product_state, reduced_density)
from otoclab.io import read_csv
from otoclab.otoc import otoc_exact, otoc_stochastic
from otoclab.rmt import mu_rmt
from otoclab.runner import run_experiment

from oracles import dense_otoc, random_state, record

pytestmark = pytest.mark.slow

K_SETS = {"9,10": (9.0, 10.0, (3.7, 4.1)), "19,20": (19.0, 20.0, (4.7, 5.3))}


def _series_from_csv(path, params):
    d = read_csv(path)
    cols = {c: d[c] for c in OtocSeries.COLUMNS}
    return OtocSeries(d["t"].astype(int), params=params, **cols)


# -- 1 ------------------------------------------------------------------------

@pytest.mark.parametrize("kset", list(K_SETS))
def test_criterion_1_averaged_quantum_rate(tmp_path, kset):
    K1, K2, (lo, hi) = K_SETS[kset]
    grid = ", ".join(repr(k / 64) for k in range(1, 6))
    cfg = parse_config(f"mode = sweep\nN = 64\nK1 = {K1}\nK2 = {K2}\nt_max = 4\n"
                       f"fits = lyapunov\n[grid]\nb = {grid}\n")
    t0 = time.time()
    manifest = run_experiment(cfg, tmp_path)
    rate = manifest["derived"]["mean"]["lyapunov.rate"]
    ok = lo <= rate <= hi
    record(f"1 (K={kset})", ok, f"mean 2lambda_L = {rate:.3f}, target [{lo}, {hi}], "
                                f"{time.time() - t0:.0f} s")
    assert ok


# -- 2 ------------------------------------------------------------------------

@pytest.mark.parametrize("kset,target", [("9,10", 3.91), ("19,20", 5.34)])
def test_criterion_2_classical_exponent(kset, target):
    K1, K2, _ = K_SETS[kset]
    t0 = time.time()
    est = lyapunov_max(ClassicalParams(K1, K2, 1e-3), n_traj=100, t_steps=10_000)
    dt = time.time() - t0
    rel = abs(est.bracket_rate / target - 1)
    ok = rel < 0.05 and dt < 10
    record(f"2 (K={kset})", ok,
           f"2lambda_cl = {est.bracket_rate:.3f} vs {target} ({100 * rel:.1f}%), {dt:.1f} s; "
           f"tangent 2lambda_max = {2 * est.lambda_max:.3f}")
    assert ok


# -- 3 ------------------------------------------------------------------------

def _classical_fit(b):
    co = classical_otoc(ClassicalParams(9.0, 10.0, b), 4, n_samples=10_000, seed=0)
    with warnings.catch_warnings():
        # C(1) = 0 exactly and is dropped from the log fit
        warnings.simplefilter("ignore", RuntimeWarning)
        est = ExponentialGrowthRegressor(window=(1, 4)).fit(co.times, co.mean)
    return est


@pytest.mark.xfail(strict=True, reason=(
    "Fit over t in [1, 4] gives ~4.4, 13% above 3.91: early steps carry a transient "
    "(per-step increments 4.6, 4.3, 4.2, 4.1) and only approach ~3.98 later."))
def test_criterion_3a_classical_otoc_rate():
    rate = _classical_fit(0.01).rate_
    rel = abs(rate / 3.91 - 1)
    record("3a", rel < 0.10, f"classical OTOC rate {rate:.3f} vs 3.91 ({100 * rel:.1f}%, tol 10%)")
    assert rel < 0.10


def test_criterion_3b_classical_otoc_b_squared():
    a1 = _classical_fit(0.01).amplitude_
    a2 = _classical_fit(0.02).amplitude_
    ratio = a2 / a1
    ok = abs(ratio / 4 - 1) < 0.20
    record("3b", ok, f"amplitude ratio for b -> 2b = {ratio:.3f} (expect 4 within 20%)")
    assert ok


# -- 4 ------------------------------------------------------------------------

def test_criterion_4_power_laws(tmp_path):
    cfg = parse_config(f"mode = otoc\nN = 64\nK1 = 0\nK2 = 0\nb = {2 / 64!r}\nt_max = 10\n"
                       "fits = power\n")
    manifest = run_experiment(cfg, tmp_path)
    fits = json.loads((tmp_path / "fits.json").read_text())
    p_aa, p_ab = fits["power_c_aa"]["rate"], fits["power_c_ab"]["rate"]
    ok = 1.5 <= p_aa <= 2.5 and 4.3 <= p_ab <= 5.7 and p_ab > p_aa + 2
    record(4, ok, f"p_AA = {p_aa:.2f} over {fits['power_c_aa']['window']}, "
                  f"p_AB = {p_ab:.2f} over {fits['power_c_ab']['window']} "
                  f"({manifest['derived']['regime']}, t_EF = {manifest['derived']['t_ehrenfest']:.1f})")
    assert ok


# -- 5 ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def rmt_runs(tmp_path_factory):
    out = {}
    for eps in (0.1, 0.2, 0.3):
        path = tmp_path_factory.mktemp(f"rmt{eps}")
        cfg = parse_config(f"mode = rmt\nN = 32\nepsilon = {eps}\nn_real = 200\n"
                           "t_max = 12\nfits = relaxation\n")
        run_experiment(cfg, path)
        out[eps] = (read_csv(path / "rmt.csv"), json.loads((path / "fits.json").read_text()))
    return out


@pytest.mark.xfail(strict=True, reason=(
    "The closed form is the large-N limit: at N = 32 the ensemble relaxes ~7% slower "
    "(relative deficit ~2/N), which is 10-30 standard errors at 200 realizations."))
def test_criterion_5a_rmt_pointwise(rmt_runs):
    worst = {}
    for eps, (data, _) in rmt_runs.items():
        z = np.abs(data["c_ab"] - data["analytic"]) - 1e-12
        worst[eps] = float(np.max(z / np.maximum(data["stderr_c_ab"], 1e-300)))
    ok = all(w <= 3 for w in worst.values())
    record("5a", ok, "max |mean - closed form| / stderr over t <= 12: "
           + ", ".join(f"eps={e}: {w:.1f}" for e, w in worst.items()) + " (tol 3)")
    assert ok


def test_criterion_5b_rmt_rate(rmt_runs):
    rel = {eps: fits["relaxation"]["mu"] / mu_rmt(eps) - 1 for eps, (_, fits) in rmt_runs.items()}
    ok = all(abs(r) < 0.10 for r in rel.values())
    record("5b", ok, "fitted mu vs mu_rmt: "
           + ", ".join(f"eps={e}: {100 * r:+.1f}%" for e, r in rel.items()) + " (tol 10%)")
    assert ok


# -- 6 ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def kicked_relaxation(tmp_path_factory):
    out = {}
    for nb in (1, 2, 3):
        path = tmp_path_factory.mktemp(f"relax{nb}")
        cfg = parse_config(f"mode = otoc\nN = 64\nK1 = 9\nK2 = 10\nb = {nb / 64!r}\n"
                           "t_max = 20\nfits = relaxation\n")
        run_experiment(cfg, path)
        out[nb] = path
    return out


def test_criterion_6_kicked_relaxation(kicked_relaxation):
    rows, rel = [], {}
    for nb, path in kicked_relaxation.items():
        f = json.loads((path / "fits.json").read_text())["relaxation"]
        rel[nb] = f["mu"] / f["mu_bessel"] - 1
        rows.append(f"Nb={nb}: mu={f['mu']:.4f} vs {f['mu_bessel']:.4f} ({100 * rel[nb]:+.1f}%)")
    mus = [json.loads((p / "fits.json").read_text())["relaxation"]["mu"]
           for p in kicked_relaxation.values()]
    ok = all(abs(r) < 0.25 for r in rel.values()) and np.all(np.diff(mus) > 0)
    record(6, ok, "; ".join(rows) + " (tol 25%)")
    assert ok


# -- 7 ------------------------------------------------------------------------

def test_criterion_7_oracle_equivalence(rng):
    worst_prop = 0.0
    for N in (4, 8):
        U = CompositePropagator.from_params(SimParams(N, 9.0, 10.0, 0.3))
        D = U.dense()
        for _ in range(3):
            psi = random_state(rng, N * N)
            worst_prop = max(worst_prop, np.max(np.abs(U.forward(psi) - D @ psi)),
                             np.max(np.abs(U.backward(psi) - D.conj().T @ psi)))
    p = SimParams(4, 9.0, 10.0, 0.5)
    O = cosine_observable(4)
    s = otoc_exact(p, 5)
    ref = dense_otoc(p, 5, O, O)
    rel = np.max(np.abs(s.c_ab - ref[:, 0])) / np.max(np.abs(ref[:, 0]))
    ok = worst_prop < 1e-10 and rel < 1e-8
    record(7, ok, f"propagation max diff {worst_prop:.1e} (tol 1e-10); "
                  f"OTOC relative diff {rel:.1e} (tol 1e-8)")
    assert ok


# -- 8 ------------------------------------------------------------------------

def test_criterion_8_structural_invariants(rng):
    checks = {}
    U = CompositePropagator.from_params(SimParams(6, 9.0, 10.0, 0.4, beta=0.2))
    D = U.dense()
    checks["unitarity"] = np.allclose(D.conj().T @ D, np.eye(36), atol=1e-10)
    psi = random_state(rng, 36)
    for _ in range(50):
        psi = U.forward(psi)
    checks["norm"] = abs(np.linalg.norm(psi) - 1) < 1e-12
    s = otoc_exact(SimParams(8, 9.0, 10.0, 0.3), 8)
    checks["C=C2-C4"] = np.allclose(s.c_ab, s.c2 - s.c4, atol=1e-12)
    checks["non-negative"] = bool(np.all(s.c_ab >= 0) and np.all(s.c_aa >= 0))
    s0 = otoc_exact(SimParams(8, 9.0, 10.0, 0.0), 8)
    checks["C_AB=0 at b=0"] = np.max(np.abs(s0.c_ab)) < 1e-12
    J = jacobian(rng.random((500, 4)), ClassicalParams(9.0, 10.0, 0.5))
    W = np.einsum("nji,jk,nkl->nil", J, SYMPLECTIC_FORM, J)
    checks["symplectic"] = np.allclose(W, SYMPLECTIC_FORM, atol=1e-10)
    try:
        for side in (1, 2):
            check_density(reduced_density(psi, side))
        checks["density"] = True
    except ValueError:
        checks["density"] = False
    ok = all(checks.values())
    record(8, ok, ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok


# -- 9 ------------------------------------------------------------------------

def test_criterion_9_husimi_decoherence():
    pur = {b: mean_purity(SimParams(64, 0.0, 10.0, b), 20, n_states=10, seed=0)[0]
           for b in (0.4, 0.06, 0.0)}
    ok = pur[0.4] < pur[0.06] < pur[0.0] and abs(pur[0.0] - 1) < 1e-10
    record(9, ok, "mean purity at t=20: " + ", ".join(f"b={b}: {v:.4f}" for b, v in pur.items()))
    assert ok


# -- 10 -----------------------------------------------------------------------

def test_criterion_10_ehrenfest_scaling(kicked_relaxation):
    onsets = {}
    onsets[32] = saturation_onset(otoc_exact(SimParams(32, 9.0, 10.0, 3 / 32), 12))
    # b = 3/N at N = 64 is the Nb = 3 run of criterion 6
    onsets[64] = saturation_onset(_series_from_csv(kicked_relaxation[3] / "otoc.csv",
                                                   SimParams(64, 9.0, 10.0, 3 / 64)))
    onsets[128] = saturation_onset(
        otoc_stochastic(SimParams(128, 9.0, 10.0, 3 / 128), 12, n_probe=16, seed=0))
    vals = [onsets[n] for n in (32, 64, 128)]
    ok = bool(np.all(np.diff(vals) > 0))
    record(10, ok, "saturation onset (C_AB = C_inf/2) at Nb = 3: "
           + ", ".join(f"N={n}: {v:.2f}" for n, v in onsets.items())
           + f"; ln N = {', '.join(f'{math.log(n):.2f}' for n in onsets)}")
    assert ok
