"""Intrusive reduced basis method for affine, symmetric coercive problems.

An :class:`AffineProblem` provides parameter-independent operator terms
``A_i`` and right-hand sides ``F_i`` combined with scalar coefficient
functions. Projecting onto an orthonormal basis ``Z`` gives small terms
``Z^T A_i Z`` and ``Z^T F_i`` that are assembled once; each online solve
costs only a dense ``N_rb x N_rb`` factorization.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import numerics
from .exceptions import NotPositiveDefiniteError, NumericalError
from .reduction import POD


def _theta_identity(mu):
    return np.asarray(mu, dtype=float)


def _theta_fixed_first(mu):
    return np.concatenate(([1.0], np.asarray(mu, dtype=float)))


def _theta_one(mu):
    return np.ones(1)


# named coefficient functions so reduced operators can be persisted
THETA_REGISTRY = {
    "identity": _theta_identity,
    "fixed_first": _theta_fixed_first,
    "one": _theta_one,
}


def _resolve_theta(theta):
    if isinstance(theta, str):
        try:
            return THETA_REGISTRY[theta]
        except KeyError:
            raise ValueError(f"unknown coefficient function {theta!r}; known: {sorted(THETA_REGISTRY)}") from None
    return theta


@dataclass
class AffineProblem:
    """``sum_i theta_a_i(mu) A_i u = sum_i theta_f_i(mu) F_i``.

    ``alpha_lb(mu)`` must bound the smallest eigenvalue of the assembled
    operator from below; it drives the residual error indicator.
    ``theta_a``/``theta_f`` may be callables or names in ``THETA_REGISTRY``.
    """

    operators: Sequence
    theta_a: object
    rhs: Sequence
    theta_f: object
    alpha_lb: Callable
    name: str = "affine"

    def __post_init__(self):
        self.operators = [sp.csr_matrix(A) for A in self.operators]
        self.rhs = [np.asarray(F, dtype=np.float64).ravel() for F in self.rhs]
        n = self.operators[0].shape[0]
        for i, A in enumerate(self.operators):
            if A.shape != (n, n):
                raise ValueError(f"operator {i} has shape {A.shape}, expected {(n, n)}")
            if abs(A - A.T).max() > 1e-12 * max(abs(A).max(), 1.0):
                raise ValueError(f"operator {i} is not symmetric")
        for i, F in enumerate(self.rhs):
            if F.shape != (n,):
                raise ValueError(f"rhs {i} has length {F.shape[0]}, expected {n}")
        self._theta_a = _resolve_theta(self.theta_a)
        self._theta_f = _resolve_theta(self.theta_f)

    @property
    def n_dofs(self):
        return self.operators[0].shape[0]

    def coefficients(self, mu):
        ta = np.atleast_1d(np.asarray(self._theta_a(mu), dtype=float))
        tf = np.atleast_1d(np.asarray(self._theta_f(mu), dtype=float))
        if ta.shape != (len(self.operators),) or tf.shape != (len(self.rhs),):
            raise ValueError("coefficient functions returned the wrong number of terms")
        return ta, tf

    def assemble(self, mu):
        ta, tf = self.coefficients(mu)
        A = sum(t * Ai for t, Ai in zip(ta, self.operators))
        F = sum(t * Fi for t, Fi in zip(tf, self.rhs))
        return A.tocsc(), F

    def solve(self, mu):
        """Full-order solution at ``mu``."""
        if self.alpha_lb(mu) <= 0:
            raise NotPositiveDefiniteError(f"operator is not coercive at mu={mu}")
        A, F = self.assemble(mu)
        u = spla.spsolve(A, F)
        res = np.linalg.norm(A @ u - F)
        scale = np.linalg.norm(F) + spla.norm(A, np.inf) * np.linalg.norm(u)
        if not np.all(np.isfinite(u)) or res > 1e-10 * scale:
            raise NumericalError(f"full-order solve inaccurate at mu={mu}: residual {res:.3e}")
        return u


@dataclass
class ReducedOperator:
    """Projected affine terms plus cached data for the residual indicator."""

    basis: np.ndarray
    reduced_operators: list
    reduced_rhs: list
    problem: AffineProblem
    history: list = field(default_factory=list)

    _residual_factor = None

    def _residual_r(self):
        # r(mu) lies in the span of [F_i, A_k Z]; an orthogonal factor of
        # those columns gives ||r|| in O(columns^2) without cancellation
        if self._residual_factor is None:
            Z = self.basis
            terms = [np.column_stack(self.problem.rhs)] + [A @ Z for A in self.problem.operators]
            R = np.hstack(terms) if Z.shape[1] else terms[0]
            self._residual_factor = np.linalg.qr(R, mode="r")
        return self._residual_factor

    @property
    def n_rb(self):
        return self.basis.shape[1]

    def system(self, mu):
        ta, tf = self.problem.coefficients(mu)
        A = sum(t * Ai for t, Ai in zip(ta, self.reduced_operators))
        F = sum(t * Fi for t, Fi in zip(tf, self.reduced_rhs))
        return A, F

    def solve(self, mu):
        """Reduced coefficients ``alpha(mu)``."""
        A, F = self.system(mu)
        try:
            return numerics.solve_spd(A, F)
        except NotPositiveDefiniteError as exc:
            raise NotPositiveDefiniteError(f"reduced operator not positive definite at mu={mu} (coercivity violated)", exc.pivot) from exc

    def lift(self, alpha):
        return self.basis @ alpha

    def residual_norm(self, mu, alpha):
        ta, tf = self.problem.coefficients(mu)
        coef = np.concatenate([tf] + [-t * np.asarray(alpha) for t in ta]) if self.n_rb else tf
        return float(np.linalg.norm(self._residual_r() @ coef))

    def error_indicator(self, mu, alpha=None):
        """``||r(mu)||_2 / alpha_LB(mu)``: bounds the Euclidean error."""
        alb = self.problem.alpha_lb(mu)
        if alb <= 0:
            raise ValueError(f"coercivity lower bound must be positive, got {alb}")
        if alpha is None:
            alpha = self.solve(mu) if self.n_rb else np.zeros(0)
        return self.residual_norm(mu, alpha) / alb


def assemble_reduced(problem, basis, history=None):
    Z = np.asarray(basis, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != problem.n_dofs:
        raise ValueError(f"basis must have {problem.n_dofs} rows, got shape {Z.shape}")
    if Z.shape[1] and np.max(np.abs(Z.T @ Z - np.eye(Z.shape[1]))) > 1e-8:
        raise ValueError("basis columns must be orthonormal")
    red_A = []
    for A in problem.operators:
        Ah = Z.T @ (A @ Z)
        red_A.append(0.5 * (Ah + Ah.T))
    red_F = [Z.T @ F for F in problem.rhs]
    return ReducedOperator(Z, red_A, red_F, problem, list(history or []))


def _orthonormalize_against(Z, u, drift=1e-10):
    """Modified Gram-Schmidt with one reorthogonalization pass."""
    v = u.copy()
    for _ in range(2):
        for j in range(Z.shape[1]):
            v -= (Z[:, j] @ v) * Z[:, j]
    return v, np.linalg.norm(v)


def greedy_build(problem, training_set, tol=1e-6, max_rank=50, solutions=None):
    """Weak greedy construction driven by the residual indicator.

    ``solutions`` may map a training index to a precomputed full solution.
    The returned operator's ``history`` lists, per iteration, the selected
    index, its parameter and the maximal indicator before enrichment.
    """
    mus = np.atleast_2d(np.asarray(training_set, dtype=float))
    if mus.shape[0] == 0:
        raise ValueError("training set is empty")
    Z = np.zeros((problem.n_dofs, 0))
    op = assemble_reduced(problem, Z)
    history = []
    while True:
        deltas = np.array([op.error_indicator(mu) for mu in mus])
        k = int(np.argmax(deltas))
        if op.n_rb and deltas[k] <= tol:
            history.append({"index": None, "mu": None, "max_indicator": float(deltas[k]), "stop": "tolerance"})
            break
        if op.n_rb >= max_rank:
            history.append({"index": None, "mu": None, "max_indicator": float(deltas[k]), "stop": "max_rank"})
            break
        u = solutions[k] if solutions is not None and k in solutions else problem.solve(mus[k])
        v, nv = _orthonormalize_against(Z, u)
        if nv <= 1e-10 * max(np.linalg.norm(u), 1e-300):
            history.append({"index": k, "mu": mus[k].tolist(), "max_indicator": float(deltas[k]), "stop": "stagnation"})
            break
        Z = np.column_stack([Z, v / nv])
        history.append({"index": k, "mu": mus[k].tolist(), "max_indicator": float(deltas[k])})
        op = assemble_reduced(problem, Z, history)
    op.history = history
    return op


def pod_build(problem, training_set, rank=None, energy=None, snapshots=None):
    """POD basis of full solutions at the training parameters, then assemble."""
    mus = np.atleast_2d(np.asarray(training_set, dtype=float))
    if snapshots is None:
        snapshots = np.column_stack([problem.solve(mu) for mu in mus])
    pod = POD(rank=rank, energy=energy).fit(np.asarray(snapshots).T)
    op = assemble_reduced(problem, pod.modes_)
    op.pod = pod
    return op


class GalerkinROM(BaseEstimator):
    """Estimator wrapper: ``fit`` builds the basis, ``predict`` lifts solves.

    Parameters
    ----------
    problem : AffineProblem
    method : {'pod', 'greedy'}
    rank, energy : POD truncation (rank wins when both given)
    tol, max_rank : greedy stopping rules
    """

    def __init__(self, problem=None, method="pod", rank=None, energy=None, tol=1e-6, max_rank=50):
        self.problem = problem
        self.method = method
        self.rank = rank
        self.energy = energy
        self.tol = tol
        self.max_rank = max_rank

    def fit(self, X, y=None):
        """``X``: training parameters; ``y``: optional FOM snapshots (rows)."""
        X = check_array(X)
        if self.method == "pod":
            snaps = None if y is None else np.asarray(y).T
            self.operator_ = pod_build(self.problem, X, self.rank, self.energy, snaps)
        elif self.method == "greedy":
            sols = None if y is None else {i: np.asarray(row) for i, row in enumerate(y)}
            self.operator_ = greedy_build(self.problem, X, self.tol, self.max_rank, sols)
        else:
            raise ValueError(f"unknown basis method {self.method!r}")
        self.n_features_in_ = X.shape[1]
        return self

    def coefficients(self, X):
        check_is_fitted(self)
        return np.array([self.operator_.solve(mu) for mu in check_array(X)])

    def predict(self, X):
        return self.coefficients(X) @ self.operator_.basis.T

    def error_indicator(self, X):
        check_is_fitted(self)
        return np.array([self.operator_.error_indicator(mu) for mu in check_array(X)])
