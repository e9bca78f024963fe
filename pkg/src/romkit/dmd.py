"""Dynamic Mode Decomposition (exact DMD)."""
import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import numerics


class DMD(BaseEstimator):
    """Rank-truncated linear time-advance operator fitted to a sequence.

    ``fit`` takes one snapshot per row in time order. With ``S1`` the first
    ``K-1`` snapshots and ``S2`` the last ``K-1`` (as columns), the reduced
    operator is ``Atilde = U^T S2 V inv(Sigma)`` where ``S1 ~ U Sigma V^T``.
    Modes are the exact DMD modes ``S2 V inv(Sigma) w_i``.

    Parameters
    ----------
    rank : int or float, optional
        ``int`` caps the SVD rank; a float in (0, 1) selects the smallest
        rank reaching that fraction of the squared singular values; ``None``
        keeps the numerical rank.
    tol : float
        Relative singular value cut-off.
    """

    def __init__(self, rank=None, tol=numerics.DEFAULT_SVD_TOL):
        self.rank = rank
        self.tol = tol

    def fit(self, X, y=None, times=None):
        X = check_array(X)
        if X.shape[0] < 2:
            raise ValueError("DMD needs at least two snapshots")
        self._set_clock(times)
        return self._fit_pairs(X[:-1].T, X[1:].T, X[0])

    def fit_pooled(self, sequences, times=None):
        """One operator shared by several trajectories sampled at ``times``.

        Pairs never straddle two trajectories. Amplitudes are fitted to the
        first state of the first sequence; use ``amplitudes_for`` for others.
        """
        seqs = [check_array(X) for X in sequences]
        if not seqs or any(X.shape[0] < 2 for X in seqs):
            raise ValueError("DMD needs at least two snapshots per trajectory")
        if len({X.shape for X in seqs}) != 1:
            raise ValueError("pooled trajectories must share one shape")
        self._set_clock(times)
        S1 = np.hstack([X[:-1].T for X in seqs])
        S2 = np.hstack([X[1:].T for X in seqs])
        return self._fit_pairs(S1, S2, seqs[0][0])

    def _set_clock(self, times):
        if times is None:
            self.t0_, self.dt_ = 0.0, 1.0
        else:
            times = np.asarray(times, dtype=float)
            steps = np.diff(times)
            if steps.size and (np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps.mean())):
                raise ValueError("DMD requires strictly increasing, uniformly spaced times")
            self.t0_, self.dt_ = float(times[0]), float(steps.mean())

    def _fit_pairs(self, S1, S2, x0):
        n = S1.shape[0]
        full = numerics.svd(S1, tol=self.tol)
        r = full.rank
        if isinstance(self.rank, (int, np.integer)):
            if self.rank > r:
                warnings.warn(
                    f"requested DMD rank {self.rank} exceeds the numerical rank {r}; using {r}",
                    RuntimeWarning,
                    stacklevel=2,
                )
            r = min(int(self.rank), r)
        elif self.rank is not None:
            ratio = np.cumsum(full.singular_values**2) / np.sum(full.singular_values**2)
            r = int(np.searchsorted(ratio, float(self.rank)) + 1)
        if r == 0:
            raise ValueError("snapshot sequence is identically zero")
        U, s, V = full.U[:, :r], full.singular_values[:r], full.V[:, :r]
        S2VSinv = (S2 @ V) / s
        Atilde = U.T @ S2VSinv
        lam, W = np.linalg.eig(Atilde)
        lam, W = lam.astype(complex), W.astype(complex)
        order = np.lexsort((-lam.imag, -np.abs(lam)))
        lam, W = lam[order], W[:, order]
        Phi = S2VSinv @ W
        b, *_ = np.linalg.lstsq(Phi, np.asarray(x0).astype(complex), rcond=None)

        self.basis_ = U
        self.singular_values_ = s
        self.Atilde_ = Atilde
        self.eigenvalues_ = lam
        self.modes_ = Phi
        self.amplitudes_ = b
        self.rank_ = r
        self.n_features_in_ = n
        return self

    def amplitudes_for(self, x0):
        """Least-squares mode amplitudes of an initial state."""
        check_is_fitted(self)
        b, *_ = np.linalg.lstsq(self.modes_, np.asarray(x0, dtype=float).astype(complex), rcond=None)
        return b

    def predict_complex(self, steps, amplitudes=None):
        check_is_fitted(self)
        b = self.amplitudes_ if amplitudes is None else amplitudes
        k = np.atleast_1d(np.asarray(steps, dtype=float))
        dyn = self.eigenvalues_[None, :] ** k[:, None] * b[None, :]
        return dyn @ self.modes_.T

    def predict(self, steps):
        """States at the given step indices, one per row (real part)."""
        return self.predict_complex(steps).real

    def reconstruct(self, times, amplitudes=None):
        """States at physical times plus the largest discarded imaginary part."""
        check_is_fitted(self)
        steps = (np.asarray(times, dtype=float) - self.t0_) / self.dt_
        Z = self.predict_complex(steps, amplitudes)
        return Z.real, float(np.max(np.abs(Z.imag))) if Z.size else 0.0

    def full_operator(self):
        """``U Atilde U^T``; only sensible for small state dimensions."""
        check_is_fitted(self)
        return self.basis_ @ self.Atilde_ @ self.basis_.T
