import numpy as np
import pytest

from romkit import DMD


def _linear_sequence(A, x0, K):
    X = [x0]
    for _ in range(K - 1):
        X.append(A @ X[-1])
    return np.array(X)


def _system(rng, n=12):
    rho, theta = 0.95, 0.3
    block = np.zeros((4, 4))
    block[0, 0], block[1, 1] = 0.9, 0.5
    block[2:, 2:] = rho * np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    Q, _ = np.linalg.qr(rng.normal(size=(n, 4)))
    return Q @ block @ Q.T, Q


def test_exact_dmd_recovers_spectrum(rng):
    A, Q = _system(rng)
    X = _linear_sequence(A, Q @ np.ones(4), 20)
    dmd = DMD(rank=4).fit(X)
    expected = [0.95 * np.exp(0.3j), 0.95 * np.exp(-0.3j), 0.9, 0.5]
    np.testing.assert_allclose(np.sort_complex(dmd.eigenvalues_), np.sort_complex(expected), atol=1e-10)
    # eigenpairs of the full operator
    for lam, phi in zip(dmd.eigenvalues_, dmd.modes_.T):
        np.testing.assert_allclose(A @ phi, lam * phi, atol=1e-9 * np.linalg.norm(phi))


def test_eigenvalues_sorted_by_magnitude(rng):
    A, Q = _system(rng)
    dmd = DMD().fit(_linear_sequence(A, Q @ np.ones(4), 15))
    assert np.all(np.diff(np.abs(dmd.eigenvalues_)) <= 1e-12)
    assert np.iscomplexobj(dmd.eigenvalues_)


def test_reconstruct_on_physical_times(rng):
    A, Q = _system(rng)
    X = _linear_sequence(A, Q @ np.ones(4), 10)
    t = 2.0 + 0.25 * np.arange(10)
    dmd = DMD(rank=4).fit(X, times=t)
    states, imag = dmd.reconstruct(t)
    np.testing.assert_allclose(states, X, atol=1e-10)
    assert imag < 1e-10
    np.testing.assert_allclose(dmd.predict(np.arange(10)), X, atol=1e-10)


def test_full_operator_matches_on_data_span(rng):
    A, Q = _system(rng)
    dmd = DMD(rank=4).fit(_linear_sequence(A, Q @ np.ones(4), 12))
    np.testing.assert_allclose(dmd.full_operator() @ Q, A @ Q, atol=1e-9)


def test_energy_fraction_rank(rng):
    A, Q = _system(rng)
    X = _linear_sequence(A, Q @ np.ones(4), 12)
    assert DMD(rank=0.999999999).fit(X).rank_ <= 4
    assert DMD(rank=0.5).fit(X).rank_ == 1


def test_rank_above_numerical_rank_warns(rng):
    A, Q = _system(rng)
    X = _linear_sequence(A, Q @ np.ones(4), 12)
    with pytest.warns(RuntimeWarning, match="numerical rank"):
        dmd = DMD(rank=8).fit(X)
    assert dmd.rank_ == 4


def test_input_validation():
    with pytest.raises(ValueError, match="two snapshots"):
        DMD().fit(np.ones((1, 3)))
    with pytest.raises(ValueError, match="uniformly"):
        DMD().fit(np.ones((3, 3)), times=[0.0, 1.0, 3.0])
    with pytest.raises(ValueError, match="zero"):
        DMD().fit(np.zeros((4, 3)))


def test_pooled_fit_shares_one_operator(rng):
    A, Q = _system(rng)
    starts = [Q @ rng.normal(size=4) for _ in range(3)]
    seqs = [_linear_sequence(A, x0, 6) for x0 in starts]
    dmd = DMD(rank=4).fit_pooled(seqs)
    np.testing.assert_allclose(np.sort_complex(dmd.eigenvalues_), np.sort_complex(np.linalg.eigvals(Q.T @ A @ Q)), atol=1e-10)
    np.testing.assert_allclose(dmd.predict(np.arange(6)), seqs[0], atol=1e-10)
    for X in seqs[1:]:
        rebuilt, _ = dmd.reconstruct(np.arange(6.0), dmd.amplitudes_for(X[0]))
        np.testing.assert_allclose(rebuilt, X, atol=1e-10)


def test_pooled_pairs_do_not_straddle_trajectories(rng):
    A, Q = _system(rng)
    seqs = [_linear_sequence(A, Q @ rng.normal(size=4), 4) for _ in range(2)]
    # concatenating would pair the end of one trajectory with the start of the next
    pooled = DMD(rank=4).fit_pooled(seqs)
    np.testing.assert_allclose(pooled.full_operator() @ seqs[1][0], seqs[1][1], atol=1e-10)
    with pytest.raises(ValueError):
        DMD().fit_pooled([seqs[0], seqs[1][:3]])
