"""Kernel surrogates: RBF interpolation with a polynomial tail and exact GPR."""
import itertools
import math
import warnings

import numpy as np
from scipy.spatial.distance import cdist, pdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import numerics
from .exceptions import NotPositiveDefiniteError, NumericalError, SingularMatrixError

RBF_COST_WARNING_CENTERS = 5000


def _gaussian(r, eps):
    return np.exp(-((eps * r) ** 2))


def _multiquadric(r, eps):
    return np.sqrt(1.0 + (eps * r) ** 2)


def _thin_plate(r, eps):
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] ** 2 * np.log(r[pos])
    return out


def _linear(r, eps):
    return r


KERNELS = {
    "gaussian": _gaussian,
    "multiquadric": _multiquadric,
    "thin_plate": _thin_plate,
    "linear": _linear,
}
TAILS = ("none", "linear", "coordinates")


def _tail_matrix(X, tail):
    if tail == "none":
        return np.zeros((X.shape[0], 0))
    if tail == "coordinates":
        return X.copy()
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _as_2d_targets(y):
    y = np.asarray(y, dtype=np.float64)
    return (y[:, None], True) if y.ndim == 1 else (y, False)


class RBFInterpolator(RegressorMixin, BaseEstimator):
    """Radial basis function interpolant with an optional polynomial tail.

    ``f(x) = sum_i w_i psi(|x - x_i|) + sum_j c_j p_j(x)``, with weights from
    the saddle-point system ``[[Psi, P], [P^T, 0]] [w; c] = [y; 0]``.

    Parameters
    ----------
    kernel : {'gaussian', 'multiquadric', 'thin_plate', 'linear'}
    epsilon : float, optional
        Shape parameter. Defaults to the inverse median pairwise distance.
    tail : {'linear', 'coordinates', 'none'}
        ``'linear'`` adds a constant and the coordinates; ``'coordinates'``
        uses the coordinates only.
    """

    def __init__(self, kernel="gaussian", epsilon=None, tail="linear"):
        self.kernel = kernel
        self.epsilon = epsilon
        self.tail = tail

    def fit(self, X, y):
        X = check_array(X)
        Y, _ = _as_2d_targets(y)
        if Y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} points but {Y.shape[0]} values")
        if not np.all(np.isfinite(Y)):
            raise NumericalError("non-finite interpolation values")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from {sorted(KERNELS)}")
        if self.tail not in TAILS:
            raise ValueError(f"unknown tail {self.tail!r}; choose from {TAILS}")
        n = X.shape[0]
        if n > RBF_COST_WARNING_CENTERS:
            warnings.warn(f"RBF fit with {n} centers: cost grows cubically", RuntimeWarning, stacklevel=2)
        dists = pdist(X) if n > 1 else np.zeros(0)
        if dists.size and dists.min() <= 1e-12:
            raise ValueError("interpolation points must be pairwise distinct")
        if self.epsilon is not None:
            eps = float(self.epsilon)
        else:
            eps = 1.0 / float(np.median(dists)) if dists.size else 1.0

        Psi = KERNELS[self.kernel](cdist(X, X), eps)
        P = _tail_matrix(X, self.tail)
        q = P.shape[1]
        A = np.zeros((n + q, n + q))
        A[:n, :n] = Psi
        A[:n, n:] = P
        A[n:, :n] = P.T
        rhs = np.vstack([Y, np.zeros((q, Y.shape[1]))])
        try:
            sol = numerics.solve_general(A, rhs)
        except SingularMatrixError as exc:
            raise SingularMatrixError(
                f"RBF augmented system is singular (condition estimate {numerics.condition_estimate(A):.3e}): {exc}",
                pivot=exc.pivot,
            ) from exc
        self.centers_ = X
        self.epsilon_ = eps
        # contiguous copies keep predictions bitwise stable across save/load
        self.weights_ = np.ascontiguousarray(sol[:n])
        self.tail_coef_ = np.ascontiguousarray(sol[n:])
        self.n_features_in_ = X.shape[1]
        self._scalar_output = np.asarray(y).ndim == 1
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = KERNELS[self.kernel](cdist(X, self.centers_), self.epsilon_) @ self.weights_
        if self.tail_coef_.shape[0]:
            out = out + _tail_matrix(X, self.tail) @ self.tail_coef_
        return out[:, 0] if self._scalar_output else out


def squared_exponential(A, B, signal_variance, length_scale):
    ls = np.asarray(length_scale, dtype=np.float64)
    return signal_variance * np.exp(-0.5 * cdist(A / ls, B / ls, "sqeuclidean"))


class GaussianProcess(RegressorMixin, BaseEstimator):
    """Gaussian process regression with a squared-exponential kernel.

    Posterior at query points ``Xq``::

        mean = g(Xq) + Khat (K + noise^2 I)^-1 (y - g(X))
        cov  = Kbar - Khat (K + noise^2 I)^-1 Khat^T

    ``noise`` is a standard deviation. Vector targets are treated as
    independent outputs sharing the kernel and one factorization.

    Parameters
    ----------
    signal_variance : float
    length_scale : float or array of shape (n_features,)
    noise : float
    prior_mean : {'zero', 'constant'}
        ``'constant'`` uses the training mean of each output.
    """

    def __init__(self, signal_variance=1.0, length_scale=1.0, noise=0.0, prior_mean="zero"):
        self.signal_variance = signal_variance
        self.length_scale = length_scale
        self.noise = noise
        self.prior_mean = prior_mean

    def _kernel(self, A, B):
        return squared_exponential(A, B, self.signal_variance, self.length_scale)

    def fit(self, X, y):
        X = check_array(X)
        Y, _ = _as_2d_targets(y)
        if Y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {Y.shape[0]} targets")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.prior_mean not in ("zero", "constant"):
            raise ValueError(f"unknown prior mean {self.prior_mean!r}")
        n = X.shape[0]
        self.prior_offset_ = Y.mean(axis=0) if self.prior_mean == "constant" else np.zeros(Y.shape[1])
        K = self._kernel(X, X) + self.noise**2 * np.eye(n)
        self.L_, self.jitter_ = _jittered_cholesky(K)
        self.alpha_ = np.ascontiguousarray(numerics.cho_solve_factor(self.L_, Y - self.prior_offset_))
        self.X_train_ = X
        self.y_train_ = Y
        self.n_features_in_ = X.shape[1]
        self._scalar_output = np.asarray(y).ndim == 1
        return self

    def predict(self, X, return_cov=False, return_std=False):
        check_is_fitted(self)
        X = check_array(X)
        Khat = self._kernel(X, self.X_train_)
        mean = Khat @ self.alpha_ + self.prior_offset_
        if self._scalar_output:
            mean = mean[:, 0]
        if not (return_cov or return_std):
            return mean
        v = np.linalg.solve(self.L_, Khat.T) if Khat.size else np.zeros((self.X_train_.shape[0], 0))
        cov = self._kernel(X, X) - v.T @ v
        cov = 0.5 * (cov + cov.T)
        diag = np.diag(cov).copy()
        if np.any(diag < -1e-10):
            warnings.warn(f"negative posterior variance {diag.min():.3e} clamped to 0", RuntimeWarning, stacklevel=2)
        np.fill_diagonal(cov, np.clip(diag, 0.0, None))
        if return_cov:
            return mean, cov
        return mean, np.sqrt(np.diag(cov))

    def log_marginal_likelihood(self):
        """Exact log evidence, summed over independent outputs."""
        check_is_fitted(self)
        n, q = self.y_train_.shape
        resid = self.y_train_ - self.prior_offset_
        data_fit = -0.5 * float(np.sum(resid * self.alpha_))
        logdet = 2.0 * float(np.sum(np.log(np.diag(self.L_))))
        return data_fit - 0.5 * q * logdet - 0.5 * q * n * math.log(2 * math.pi)


def _jittered_cholesky(K):
    try:
        return numerics.cholesky(K), 0.0
    except NotPositiveDefiniteError:
        pass
    n = K.shape[0]
    scale = max(np.trace(K) / n, np.finfo(float).tiny)
    jitter = 1e-12 * scale
    while jitter <= 1e-6 * scale * (1 + 1e-9):
        try:
            return numerics.cholesky(K + jitter * np.eye(n)), jitter
        except NotPositiveDefiniteError:
            jitter *= 10
    raise NotPositiveDefiniteError(
        f"kernel matrix not positive definite even with jitter {1e-6 * scale:.3e}"
    )


def select_hyperparams(X, y, grid, prior_mean="zero"):
    """Grid point ``(signal_variance, length_scale, noise)`` of maximal evidence.

    Ties go to the smallest length scale, then the smallest noise.
    """
    best, best_key = None, None
    for s2, ell, sigma in grid:
        try:
            gp = GaussianProcess(s2, ell, sigma, prior_mean).fit(X, y)
        except NumericalError:
            continue
        lml = gp.log_marginal_likelihood()
        if not np.isfinite(lml):
            continue
        key = (-lml, float(np.max(ell)), sigma)
        if best_key is None or key < best_key:
            best, best_key = (s2, ell, sigma), key
    if best is None:
        raise NumericalError("every hyperparameter grid point failed to factorize")
    return best


def default_grid(X, y):
    """Log-spaced grid scaled to the data, used when no grid is given."""
    X = check_array(X)
    Y, _ = _as_2d_targets(y)
    spread = np.ptp(X, axis=0)
    spread[spread == 0] = 1.0
    var = float(np.mean(np.var(Y, axis=0))) or 1.0
    s2s = var * np.array([0.1, 1.0, 10.0])
    ells = [spread * f for f in (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)]
    sigmas = [0.0] + list(math.sqrt(var) * np.array([1e-6, 1e-4, 1e-2]))
    return [(s2, ell, sig) for s2, ell, sig in itertools.product(s2s, ells, sigmas)]
