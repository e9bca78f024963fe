import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from romkit import POD, ActiveSubspace
from romkit.reduction import finite_difference_gradient


def _low_rank(rng, n=40, K=12, r=3):
    return rng.normal(size=(K, r)) @ rng.normal(size=(r, n))


def test_pod_energy_one_gives_numerical_rank(rng):
    X = _low_rank(rng)
    pod = POD(energy=1.0).fit(X)
    assert pod.n_components_ == 3
    np.testing.assert_allclose(pod.inverse_transform(pod.transform(X)), X, atol=1e-10)


def test_pod_rank_and_orthonormal_modes(rng):
    X = rng.normal(size=(10, 30))
    pod = POD(rank=4).fit(X)
    assert pod.modes_.shape == (30, 4)
    np.testing.assert_allclose(pod.modes_.T @ pod.modes_, np.eye(4), atol=1e-12)


@given(st.floats(0.5, 0.999), st.integers(0, 1000))
def test_pod_energy_criterion_is_smallest_rank(eta, seed):
    X = np.random.default_rng(seed).normal(size=(8, 15))
    pod = POD(energy=eta).fit(X)
    s2 = pod.singular_values_**2
    ratio = np.cumsum(s2) / s2.sum()
    r = pod.n_components_
    assert ratio[r - 1] >= eta - 1e-12
    assert r == 1 or ratio[r - 2] < eta


def test_pod_truncation_error_matches_discarded_energy(rng):
    X = rng.normal(size=(9, 20))
    pod = POD(rank=3).fit(X)
    resid = X - pod.inverse_transform(pod.transform(X))
    s = np.linalg.svd(X, compute_uv=False)
    assert np.linalg.norm(resid) ** 2 == pytest.approx(np.sum(s[3:] ** 2), rel=1e-10)


def test_pod_centering(rng):
    X = _low_rank(rng) + 5.0
    pod = POD(rank=3, center=True).fit(X)
    np.testing.assert_allclose(pod.mean_, X.mean(axis=0))
    np.testing.assert_allclose(pod.inverse_transform(pod.transform(X)), X, atol=1e-9)


def test_active_subspace_ridge_function(rng):
    w = rng.normal(size=6)
    w /= np.linalg.norm(w)
    X = rng.uniform(-1, 1, size=(50, 6))
    grads = np.cos(X @ w)[:, None] * w[None, :]
    asub = ActiveSubspace(1).fit(grads)
    assert abs(asub.W_[:, 0] @ w) == pytest.approx(1.0, abs=1e-12)
    assert asub.eigenvalues_[1] <= 1e-14 * asub.eigenvalues_[0]
    np.testing.assert_allclose(asub.transform(X)[:, 0], X @ asub.W_[:, 0])


def test_active_subspace_eigenvalues_nonnegative_and_sorted(rng):
    asub = ActiveSubspace(2).fit(rng.normal(size=(30, 5)))
    assert np.all(asub.eigenvalues_ >= 0)
    assert np.all(np.diff(asub.eigenvalues_) <= 0)
    np.testing.assert_allclose(asub.covariance_, asub.covariance_.T)


def test_finite_difference_gradient(rng):
    A = rng.normal(size=(3, 3))
    f = lambda x: np.sin(x) @ A @ x  # noqa: E731
    x = rng.normal(size=3)
    exact = np.cos(x) * (A @ x) + A.T @ np.sin(x)
    np.testing.assert_allclose(finite_difference_gradient(f, x), exact, rtol=1e-8, atol=1e-9)
