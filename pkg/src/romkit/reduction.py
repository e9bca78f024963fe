"""Proper Orthogonal Decomposition and Active Subspaces."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import numerics
from .exceptions import NumericalError


class POD(TransformerMixin, BaseEstimator):
    """Proper Orthogonal Decomposition of a snapshot matrix.

    ``X`` holds one snapshot per row; the modes are the leading left
    singular vectors of ``X.T`` (dof x K), computed by a thin SVD.

    Parameters
    ----------
    rank : int, optional
        Keep exactly this many modes (capped by the numerical rank).
    energy : float, optional
        Keep the smallest number of modes whose squared singular values
        reach this fraction of the total. Ignored when ``rank`` is set.
    center : bool
        Subtract the snapshot mean before decomposing.
    tol : float
        Relative singular value cut-off defining the numerical rank.
    """

    def __init__(self, rank=None, energy=None, center=False, tol=numerics.DEFAULT_SVD_TOL):
        self.rank = rank
        self.energy = energy
        self.center = center
        self.tol = tol

    def fit(self, X, y=None):
        X = check_array(X)
        if self.energy is not None and not 0 < self.energy <= 1:
            raise ValueError("energy fraction must lie in (0, 1]")
        self.mean_ = X.mean(axis=0) if self.center else np.zeros(X.shape[1])
        S = (X - self.mean_).T
        if not np.any(S):
            raise ValueError("cannot extract modes from an all-zero snapshot matrix")
        res = numerics.svd(S, tol=self.tol)
        self.singular_values_ = res.singular_values
        r = res.rank
        if self.rank is not None:
            r = min(int(self.rank), r)
        elif self.energy is not None and self.energy < 1:
            ratio = np.cumsum(res.singular_values**2) / np.sum(res.singular_values**2)
            r = int(np.searchsorted(ratio, self.energy) + 1)
        self.n_components_ = r
        self.modes_ = res.U[:, :r]
        self.energies_ = res.singular_values[:r]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.modes_.shape[0]:
            raise ValueError(f"expected {self.modes_.shape[0]} dofs, got {X.shape[1]}")
        return (X - self.mean_) @ self.modes_

    def inverse_transform(self, C):
        check_is_fitted(self)
        C = check_array(C)
        if C.shape[1] != self.n_components_:
            raise ValueError(f"expected {self.n_components_} coefficients, got {C.shape[1]}")
        return C @ self.modes_.T + self.mean_

    def project(self, state):
        return self.transform(np.asarray(state, dtype=float)[None, :])[0]

    def lift(self, coeffs):
        return self.inverse_transform(np.asarray(coeffs, dtype=float)[None, :])[0]

    def truncation_error(self):
        """Relative Frobenius error of reconstructing the training snapshots."""
        check_is_fitted(self)
        s2 = self.singular_values_**2
        return float(np.sqrt(s2[self.n_components_ :].sum() / s2.sum()))


class ActiveSubspace(TransformerMixin, BaseEstimator):
    """Dominant eigenspace of the averaged gradient outer product.

    ``fit`` takes gradient samples: either ``(N, m)`` for scalar functions
    or ``(N, n, m)`` Jacobians of vector functions, in which case
    ``C = mean(J^T J)``. ``transform`` maps parameters ``x`` to ``W^T x``.
    """

    def __init__(self, n_components=1):
        self.n_components = n_components

    def fit(self, gradients, y=None):
        G = np.asarray(gradients, dtype=np.float64)
        if G.ndim == 2:
            G = G[:, None, :]
        if G.ndim != 3 or G.shape[0] < 1:
            raise ValueError("gradients must have shape (N, m) or (N, n, m)")
        if not np.all(np.isfinite(G)):
            raise NumericalError("non-finite gradient sample")
        m = G.shape[2]
        if not 1 <= self.n_components <= m:
            raise ValueError(f"n_components must be in [1, {m}]")
        C = np.einsum("kij,kil->jl", G, G) / G.shape[0]
        C = 0.5 * (C + C.T)
        eig = numerics.eig_sym(C)
        self.covariance_ = C
        # eigenvalues of a Gram matrix: negatives are round-off
        self.eigenvalues_ = np.clip(eig.eigenvalues, 0.0, None)
        self.eigenvectors_ = eig.eigenvectors
        self.W_ = eig.eigenvectors[:, : self.n_components]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.W_.shape[0]:
            raise ValueError(f"expected {self.W_.shape[0]} parameters, got {X.shape[1]}")
        return X @ self.W_

    def fit_function(self, func, X):
        """Fit from a black-box function using central finite differences."""
        X = check_array(X)
        return self.fit(np.stack([finite_difference_gradient(func, x) for x in X]))


def finite_difference_gradient(func, x):
    """Central-difference Jacobian with step ``1e-5 * (1 + |x_j|)``.

    Returns shape ``(m,)`` for scalar ``func`` and ``(n, m)`` otherwise.
    """
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(x.size):
        h = 1e-5 * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(func(x + e), float) - np.asarray(func(x - e), float)) / (2 * h))
    J = np.stack(cols, axis=-1)
    return J
