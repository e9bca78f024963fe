"""Dense linear algebra kernels.

Thin, validated wrappers over LAPACK (through numpy/scipy). Every routine
checks finiteness, never mutates its inputs and returns results in a
deterministic order.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, eigh, lapack, lu_factor, lu_solve

from .exceptions import NotPositiveDefiniteError, NumericalError, SingularMatrixError

DEFAULT_SVD_TOL = 1e-12


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.singular_values.shape[0]


@dataclass(frozen=True)
class EigSymResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(A, name="A"):
    """Return ``A`` as a finite 2-D float64 array (a copy is not forced)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        bad = np.argwhere(~np.isfinite(A))[0]
        raise NumericalError(f"{name} has a non-finite entry at {tuple(int(i) for i in bad)}")
    return A


def svd(A, rank_cap=None, tol=DEFAULT_SVD_TOL):
    """Truncated thin SVD.

    Keeps ``r = min(rank_cap, #{sigma_i > tol * sigma_1})`` triplets. A zero
    matrix yields rank 0.
    """
    A = as_matrix(A)
    m, n = A.shape
    if rank_cap is not None and not 0 <= rank_cap <= min(m, n):
        raise ValueError(f"rank_cap={rank_cap} outside [0, {min(m, n)}]")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.count_nonzero(s > tol * s[0])) if s[0] > 0 else 0
    if rank_cap is not None:
        r = min(r, rank_cap)
    return SvdResult(U[:, :r].copy(), s[:r].copy(), Vt[:r].T.copy())


def eig_sym(A):
    """Eigendecomposition of a symmetric matrix, eigenvalues nonincreasing."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"eig_sym needs a square matrix, got {A.shape}")
    fro = np.linalg.norm(A)
    asym = np.max(np.abs(A - A.T))
    if asym > 1e-10 * fro:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    w, V = eigh(0.5 * (A + A.T))
    return EigSymResult(w[::-1].copy(), V[:, ::-1].copy())


def cholesky(A):
    """Lower Cholesky factor; reports the failing pivot (1-based) on error."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"cholesky needs a square matrix, got {A.shape}")
    L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: non-positive pivot at index {info}", pivot=int(info)
        )
    if info < 0:
        raise NumericalError(f"dpotrf rejected argument {-info}")
    return L


def cho_solve_factor(L, B):
    """Solve ``L L^T X = B`` given the lower Cholesky factor ``L``."""
    X, info = lapack.dpotrs(L, np.asarray(B, dtype=np.float64), lower=1)
    if info != 0:
        raise NumericalError(f"dpotrs failed with info={info}")
    return X


def solve_spd(A, B):
    """Solve ``A X = B`` for symmetric positive definite ``A``."""
    A = as_matrix(A)
    B_arr = np.asarray(B, dtype=np.float64)
    vector = B_arr.ndim == 1
    B2 = as_matrix(B_arr, "B")
    if B2.shape[0] != A.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, B has {B2.shape[0]} rows")
    X = cho_solve_factor(cholesky(A), B2)
    return X[:, 0] if vector else X


def solve_general(A, B):
    """Solve ``A X = B`` by partial-pivot LU with a singularity check."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"solve_general needs a square matrix, got {A.shape}")
    B_arr = np.asarray(B, dtype=np.float64)
    vector = B_arr.ndim == 1
    B2 = as_matrix(B_arr, "B")
    if B2.shape[0] != A.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, B has {B2.shape[0]} rows")
    with warnings.catch_warnings():
        # exact singularity is reported below with the pivot position
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    threshold = 1e-13 * np.max(np.abs(A))
    small = np.flatnonzero(diag <= threshold)
    if small.size:
        raise SingularMatrixError(
            f"matrix is singular to working precision: pivot {int(small[0])} is {diag[small[0]]:.3e}",
            pivot=int(small[0]),
        )
    X = lu_solve((lu, piv), B2, check_finite=False)
    return X[:, 0] if vector else X


def condition_estimate(A):
    """2-norm condition number (used for diagnostics only)."""
    s = np.linalg.svd(as_matrix(A), compute_uv=False)
    return np.inf if s[-1] == 0 else s[0] / s[-1]
