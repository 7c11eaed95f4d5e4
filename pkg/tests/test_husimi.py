import numpy as np
import pytest

from otoclab.core import DimensionError, ParameterError, SimParams
from otoclab.husimi import (SNAPSHOT_TIMES, HusimiTransformer, check_density,
                            coherent_state, evolve_snapshots, husimi_grid,
                            mean_purity, product_state, purity, reduced_density)
from otoclab.floquet import CompositePropagator

from oracles import random_state


def test_coherent_state_norm(rng):
    for q, p in rng.random((5, 2)):
        assert np.linalg.norm(coherent_state(q, p, 64)) == pytest.approx(1.0, abs=1e-12)


def test_coherent_states_far_apart_are_orthogonal():
    z1 = coherent_state(0.2, 0.4, 64)
    z2 = coherent_state(0.7, 0.4, 64)
    assert abs(np.vdot(z1, z2)) < 1e-8


def test_coherent_state_position_mean():
    z = coherent_state(0.5, 0.3, 64, alpha=0.0)
    q = np.sum(np.abs(z) ** 2 * np.arange(64) / 64)
    assert abs(q - 0.5) < 1 / 64


def test_coherent_state_momentum_mean():
    # the discrete Fourier transform puts the weight near p0
    N, p0 = 64, 0.3
    z = coherent_state(0.5, p0, N, alpha=0.0)
    w = np.abs(np.fft.fft(z)) ** 2
    assert abs(np.argmax(w) / N - p0) <= 1 / N


def test_coherent_state_rejects_outside_square():
    with pytest.raises(ParameterError):
        coherent_state(1.0, 0.2, 8)


def test_reduced_density_product(rng):
    phi1, phi2 = random_state(rng, 8), random_state(rng, 8)
    rho1 = reduced_density(product_state(phi1, phi2), 1)
    assert np.allclose(rho1, np.outer(phi1, phi1.conj()), atol=1e-12)
    assert purity(rho1) == pytest.approx(1.0, abs=1e-12)


def test_reduced_density_maximally_entangled():
    N = 8
    psi = np.eye(N).ravel() / np.sqrt(N)
    rho = reduced_density(psi, 2)
    assert np.allclose(rho, np.eye(N) / N)
    assert purity(rho) == pytest.approx(1 / N)


def test_reduced_density_matches_dense_partial_trace(rng):
    N = 8
    psi = random_state(rng, N * N)
    full = np.outer(psi, psi.conj()).reshape(N, N, N, N)
    assert np.max(np.abs(reduced_density(psi, 1) - np.einsum("ikjk->ij", full))) < 1e-12
    assert np.max(np.abs(reduced_density(psi, 2) - np.einsum("kikj->ij", full))) < 1e-12
    for s in (1, 2):
        check_density(reduced_density(psi, s))


def test_reduced_density_errors():
    with pytest.raises(DimensionError):
        reduced_density(np.ones(10))
    with pytest.raises(ParameterError):
        reduced_density(np.ones(4) / 2, subsystem=3)


def test_check_density_rejects():
    with pytest.raises(ParameterError):
        check_density(np.diag([1.5, -0.5]))
    with pytest.raises(ParameterError):
        check_density(np.eye(2))


def test_husimi_peak_at_center():
    q0, p0 = 0.3, 0.7
    z = coherent_state(q0, p0, 64)
    g = husimi_grid(np.outer(z, z.conj()), G=64)
    i, j = np.unravel_index(np.argmax(g.values), g.values.shape)
    assert abs(g.q[i] - q0) <= 1 / 64 and abs(g.p[j] - p0) <= 1 / 64
    assert g.values.max() <= 1 + 1e-10 and g.values.min() >= -1e-12


def test_husimi_maximally_mixed_is_flat():
    g = husimi_grid(np.eye(64) / 64, G=64)
    assert np.ptp(g.values) / g.values.mean() < 0.05


def test_husimi_resolution_of_identity(rng):
    N = 16
    psi = random_state(rng, N * N)
    g = husimi_grid(reduced_density(psi), G=2 * N)
    assert g.values.mean() == pytest.approx(1 / N, rel=0.1)


def test_uncoupled_purity_stays_one():
    params = SimParams(16, 0.0, 0.0, 0.0)
    psi0 = product_state(coherent_state(0.2, 0.3, 16), coherent_state(0.6, 0.1, 16))
    for t, psi in evolve_snapshots(params, psi0, range(0, 21)).items():
        assert purity(reduced_density(psi)) == pytest.approx(1.0, abs=1e-10)


def test_decoherence_trend_on_average():
    means = [mean_purity(SimParams(32, 0.0, 10.0, 0.2), t, n_states=10)[0]
             for t in range(0, 21, 4)]
    assert means[-1] < means[0]
    assert np.all(np.diff(means) < 0.05)


def test_snapshot_defaults():
    assert SNAPSHOT_TIMES == (0, 2, 4, 6, 8, 12, 14, 16, 18, 20)
    snaps = evolve_snapshots(SimParams(4, 1, 1, 0.1), np.eye(16)[0], (3, 1))
    U = CompositePropagator.from_params(SimParams(4, 1, 1, 0.1))
    assert np.allclose(snaps[3], U.forward(U.forward(snaps[1])))


def test_transformer(rng):
    X = np.array([random_state(rng, 64) for _ in range(2)])
    tr = HusimiTransformer(G=4).fit(X)
    out = tr.transform(X)
    assert out.shape == (2, 16)
    assert np.allclose(out[0], husimi_grid(reduced_density(X[0]), 4).values.ravel())
