"""Parameter spaces, sampling, snapshot databases and normalization."""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import NumericalError

MAX_NORMAL_DRAWS = 10**6


@dataclass(frozen=True)
class ParameterSpace:
    lower: np.ndarray
    upper: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size == 0:
            raise ValueError("lower/upper must be equal-length non-empty vectors")
        if not np.all(lower < upper):
            raise ValueError(f"need lower < upper componentwise, got {lower} / {upper}")
        labels = tuple(self.labels) or tuple(f"mu_{i + 1}" for i in range(lower.size))
        if len(labels) != lower.size:
            raise ValueError("one label per dimension required")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self):
        return self.lower.size

    def contains(self, points, atol=0.0):
        points = np.atleast_2d(points)
        return np.all((points >= self.lower - atol) & (points <= self.upper + atol), axis=1)


@dataclass(frozen=True)
class SamplingPlan:
    kind: str = "uniform"
    count: int = 60
    seed: int = 0
    normal_center: Optional[Sequence[float]] = None
    normal_spread: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "normal", "grid"):
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if int(self.count) < 1:
            raise ValueError("count must be >= 1")
        if self.kind == "normal" and self.normal_spread is not None:
            if np.any(np.asarray(self.normal_spread, dtype=float) <= 0):
                raise ValueError("normal_spread must be positive")


def sample(space, plan):
    """Draw ``plan.count`` parameter vectors inside ``space``.

    Returns an array of shape ``(count, space.dim)``; output depends only on
    ``(space, plan)``.
    """
    rng = np.random.default_rng(plan.seed)
    n, d = int(plan.count), space.dim
    if plan.kind == "uniform":
        return space.lower + (space.upper - space.lower) * rng.random((n, d))
    if plan.kind == "grid":
        if d == 1:
            return np.linspace(space.lower[0], space.upper[0], n)[:, None]
        per_axis = round(n ** (1.0 / d))
        if per_axis**d != n:
            raise ValueError(f"grid sampling in {d} dimensions needs count = k**{d}, got {n}")
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(space.lower, space.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    center = np.broadcast_to(
        0.5 * (space.lower + space.upper) if plan.normal_center is None else np.asarray(plan.normal_center, float),
        (d,),
    )
    spread = np.broadcast_to(
        (space.upper - space.lower) / 4 if plan.normal_spread is None else np.asarray(plan.normal_spread, float),
        (d,),
    )
    accepted = []
    n_accepted = draws = 0
    batch = max(64, 2 * n)
    while n_accepted < n:
        z = center + spread * rng.standard_normal((batch, d))
        draws += batch
        keep = z[space.contains(z)]
        accepted.append(keep)
        n_accepted += keep.shape[0]
        if n_accepted == 0 and draws >= MAX_NORMAL_DRAWS:
            raise NumericalError(
                f"normal sampling accepted no points inside the parameter space after {draws} draws"
            )
    return np.concatenate(accepted)[:n]


@dataclass
class SnapshotSet:
    """Full-order states stored one snapshot per column (``dof x K``)."""

    snapshots: np.ndarray
    params: np.ndarray
    times: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        S = np.asarray(self.snapshots, dtype=np.float64)
        if S.ndim == 1:
            S = S[:, None]
        if S.ndim != 2:
            raise ValueError(f"snapshots must be 2-D (dof x K), got shape {S.shape}")
        K = S.shape[1]
        P = np.asarray(self.params, dtype=np.float64)
        if P.ndim == 1:
            P = P.reshape(K, -1) if K else P.reshape(0, max(P.size, 1))
        if P.shape[0] != K:
            raise ValueError(f"{P.shape[0]} parameter rows for {K} snapshots")
        T = np.zeros(K) if self.times is None else np.asarray(self.times, dtype=np.float64).ravel()
        if T.shape[0] != K:
            raise ValueError(f"{T.shape[0]} time stamps for {K} snapshots")
        if not (np.all(np.isfinite(S)) and np.all(np.isfinite(P)) and np.all(np.isfinite(T))):
            raise NumericalError("snapshot set contains non-finite values")
        self.snapshots, self.params, self.times = S, P, T

    @property
    def dof(self):
        return self.snapshots.shape[0]

    @property
    def n_snapshots(self):
        return self.snapshots.shape[1]

    @property
    def param_dim(self):
        return self.params.shape[1]

    def unique_params(self):
        """Distinct parameter vectors in order of first appearance."""
        _, first = np.unique(self.params, axis=0, return_index=True)
        return self.params[np.sort(first)]

    def select_param(self, mu):
        mask = np.all(self.params == np.asarray(mu, dtype=np.float64), axis=1)
        return self.subset(mask)

    def subset(self, mask):
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return SnapshotSet(self.snapshots[:, idx], self.params[idx], self.times[idx], dict(self.metadata))

    def groups(self):
        """Yield ``(mu, SnapshotSet)`` per distinct parameter, time-ordered."""
        for mu in self.unique_params():
            sub = self.select_param(mu)
            order = np.argsort(sub.times, kind="stable")
            yield mu, sub.subset(order)

    @classmethod
    def concatenate(cls, sets, metadata=None):
        sets = list(sets)
        return cls(
            np.concatenate([s.snapshots for s in sets], axis=1),
            np.concatenate([s.params for s in sets], axis=0),
            np.concatenate([s.times for s in sets]),
            dict(sets[0].metadata if metadata is None else metadata),
        )


def split_train_test(snapshots, fraction, seed=0):
    """Partition by parameter value into (train, test)."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    mus = snapshots.unique_params()
    n = mus.shape[0]
    if n < 2:
        raise ValueError("need at least 2 distinct parameters to split")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train_mus = mus[np.sort(perm[:n_train])]
    in_train = (snapshots.params[:, None, :] == train_mus[None, :, :]).all(axis=2).any(axis=1)
    return snapshots.subset(in_train), snapshots.subset(~in_train)


class Normalizer(TransformerMixin, BaseEstimator):
    """Per-feature shift/scale with exact inverse.

    Works in the usual estimator orientation: rows are snapshots, columns
    are degrees of freedom.

    Parameters
    ----------
    mode : {'none', 'mean-center', 'center-and-scale'}
    per_dof_scale : bool
        With ``center-and-scale``, scale each dof by its own standard
        deviation (``True``) or all dofs by the global one.
    """

    def __init__(self, mode="mean-center", per_dof_scale=True):
        self.mode = mode
        self.per_dof_scale = per_dof_scale

    def fit(self, X, y=None):
        X = check_array(X)
        if self.mode not in ("none", "mean-center", "center-and-scale"):
            raise ValueError(f"unknown normalization mode {self.mode!r}")
        n = X.shape[1]
        self.shift_ = np.zeros(n) if self.mode == "none" else X.mean(axis=0)
        if self.mode == "center-and-scale":
            if self.per_dof_scale:
                scale = X.std(axis=0)
                scale[scale == 0] = 1.0
            else:
                s = float(np.std(X - self.shift_))
                scale = np.full(n, s if s > 0 else 1.0)
        else:
            scale = np.ones(n)
        self.scale_ = scale
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if self.mode == "none":
            return X.copy()
        return (X - self.shift_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if self.mode == "none":
            return X.copy()
        return X * self.scale_ + self.shift_
