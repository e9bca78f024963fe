"""Fully connected networks: data-driven regression and physics-informed fits.

Networks map rows of inputs to rows of outputs. Layer ``i`` holds a weight
matrix of shape ``(l_i, l_{i-1})`` and a bias of length ``l_i``; hidden
layers apply the activation, the last layer applies the output map.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import NumericalError


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


ACTIVATIONS = {
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "sigmoid": (_sigmoid, lambda z, a: a * (1.0 - a)),
}


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


class Mlp:
    """A plain multilayer perceptron with explicit forward and reverse passes."""

    def __init__(self, weights, biases, activation="tanh", output="identity"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if output not in ("identity", "softmax"):
            raise ValueError(f"unknown output map {output!r}")
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for i, (A, b) in enumerate(zip(weights, biases)):
            if A.ndim != 2 or b.shape != (A.shape[0],):
                raise ValueError(f"layer {i}: weight {A.shape} incompatible with bias {b.shape}")
            if i and A.shape[1] != weights[i - 1].shape[0]:
                raise ValueError(f"layer {i} expects {A.shape[1]} inputs, previous layer gives {weights[i - 1].shape[0]}")
        self.weights = [np.asarray(A, dtype=np.float64) for A in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.activation = activation
        self.output = output

    @classmethod
    def init(cls, sizes, activation="tanh", output="identity", seed=0):
        """Glorot-uniform weights and zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (n_in + n_out))
            weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases, activation, output)

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[1]] + [A.shape[0] for A in self.weights]

    def forward(self, X, return_cache=False):
        f = ACTIVATIONS[self.activation][0]
        a = np.atleast_2d(X)
        if a.shape[1] != self.weights[0].shape[1]:
            raise ValueError(f"expected {self.weights[0].shape[1]} inputs, got {a.shape[1]}")
        cache = [(None, a)]
        last = len(self.weights) - 1
        for i, (A, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ A.T + b
            if i < last:
                a = f(z)
            else:
                a = _softmax(z) if self.output == "softmax" else z
            cache.append((z, a))
        return (a, cache) if return_cache else a

    def backward(self, cache, grad_output):
        """Gradients of a scalar loss given ``dLoss/dOutput`` and a forward cache."""
        dfun = ACTIVATIONS[self.activation][1]
        n = len(self.weights)
        gW, gb = [None] * n, [None] * n
        z, a = cache[-1]
        if self.output == "softmax":
            delta = a * (grad_output - np.sum(grad_output * a, axis=1, keepdims=True))
        else:
            delta = grad_output
        for i in range(n - 1, -1, -1):
            a_prev = cache[i][1]
            gW[i] = delta.T @ a_prev
            gb[i] = delta.sum(axis=0)
            if i:
                z_prev = cache[i][0]
                delta = (delta @ self.weights[i]) * dfun(z_prev, a_prev)
        return gW, gb

    def get_flat(self):
        return np.concatenate([p.ravel() for pair in zip(self.weights, self.biases) for p in pair])

    def set_flat(self, theta):
        off = 0
        for i, (A, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = theta[off : off + A.size].reshape(A.shape).copy()
            off += A.size
            self.biases[i] = theta[off : off + b.size].copy()
            off += b.size

    def copy(self):
        return Mlp([A.copy() for A in self.weights], [b.copy() for b in self.biases], self.activation, self.output)


def flatten_grads(gW, gb):
    return np.concatenate([g.ravel() for pair in zip(gW, gb) for g in pair])


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 1000
    batch_size: Optional[int] = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class _Optimizer:
    def __init__(self, config, n_params):
        self.cfg = config
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, theta, grad):
        cfg = self.cfg
        if cfg.optimizer == "sgd":
            return theta - cfg.learning_rate * grad
        self.t += 1
        self.m = cfg.beta1 * self.m + (1 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1 - cfg.beta2) * grad * grad
        m_hat = self.m / (1 - cfg.beta1**self.t)
        v_hat = self.v / (1 - cfg.beta2**self.t)
        return theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train_mse(net, X, Y, config):
    """Minimise the mean squared error in place; returns the per-epoch loss."""
    rng = np.random.default_rng(config.seed)
    opt = _Optimizer(config, net.get_flat().size)
    n = X.shape[0]
    batch = n if config.batch_size is None else min(int(config.batch_size), n)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if batch < n else np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            out, cache = net.forward(X[idx], return_cache=True)
            resid = out - Y[idx]
            with np.errstate(over="ignore", invalid="ignore"):
                loss = float(np.mean(resid**2))
            if not np.isfinite(loss):
                raise NumericalError(f"training diverged at epoch {epoch}")
            gW, gb = net.backward(cache, 2.0 * resid / resid.size)
            net.set_flat(opt.step(net.get_flat(), flatten_grads(gW, gb)))
            epoch_loss += loss * idx.size
        history.append(epoch_loss / n)
    return history


class DDNNRegressor(RegressorMixin, BaseEstimator):
    """Data-driven network regressing parameters onto discretised states.

    Parameters
    ----------
    hidden_layers : tuple of int
    activation : {'tanh', 'relu', 'sigmoid'}
    optimizer : {'adam', 'sgd'}
    learning_rate, epochs, batch_size, seed
        Training settings; ``batch_size=None`` means full batch.
    standardize : bool
        Standardize inputs and targets internally (undone on predict).
    """

    def __init__(
        self,
        hidden_layers=(32, 32),
        activation="tanh",
        optimizer="adam",
        learning_rate=1e-3,
        epochs=1000,
        batch_size=None,
        seed=0,
        standardize=True,
    ):
        self.hidden_layers = hidden_layers
        self.activation = activation
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.standardize = standardize

    def fit(self, X, y):
        X = check_array(X)
        y_arr = np.asarray(y, dtype=np.float64)
        Y = y_arr[:, None] if y_arr.ndim == 1 else y_arr
        if self.standardize:
            self.x_shift_, self.x_scale_ = X.mean(axis=0), X.std(axis=0)
            self.y_shift_, self.y_scale_ = Y.mean(axis=0), Y.std(axis=0)
            self.x_scale_[self.x_scale_ == 0] = 1.0
            self.y_scale_[self.y_scale_ == 0] = 1.0
        else:
            self.x_shift_, self.x_scale_ = np.zeros(X.shape[1]), np.ones(X.shape[1])
            self.y_shift_, self.y_scale_ = np.zeros(Y.shape[1]), np.ones(Y.shape[1])
        sizes = [X.shape[1], *self.hidden_layers, Y.shape[1]]
        self.net_ = Mlp.init(sizes, self.activation, seed=self.seed)
        cfg = TrainConfig(self.optimizer, self.learning_rate, self.epochs, self.batch_size, self.seed)
        self.loss_curve_ = train_mse(
            self.net_, (X - self.x_shift_) / self.x_scale_, (Y - self.y_shift_) / self.y_scale_, cfg
        )
        self.n_features_in_ = X.shape[1]
        self._scalar_output = y_arr.ndim == 1
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X)
        out = self.net_.forward((X - self.x_shift_) / self.x_scale_) * self.y_scale_ + self.y_shift_
        return out[:, 0] if self._scalar_output else out


# ---------------------------------------------------------------------------
# physics-informed training


class StencilField:
    """Network values and finite-difference derivatives at a batch of inputs.

    Residual functions receive one of these. Spatial axes are indexed from
    0 within ``x``; derivatives use central differences of step ``h``.
    Residual code must stay complex-analytic (no ``abs``/comparisons on field
    values) so that its Jacobian can be taken by complex step.
    """

    def __init__(self, inputs, layout, h, evaluate=None, values=None):
        self.inputs = inputs
        self.layout = layout
        self.h = h
        self._evaluate = evaluate
        self.values = {} if values is None else values

    @property
    def mu(self):
        return self.inputs[:, self.layout.mu]

    @property
    def t(self):
        return self.inputs[:, self.layout.t]

    @property
    def x(self):
        return self.inputs[:, self.layout.x]

    def _at(self, *shifts):
        key = tuple(sorted((ax, s) for ax, s in shifts if s))
        if key not in self.values:
            if self._evaluate is None:
                raise KeyError(f"stencil offset {key} not available")
            self.values[key] = self._evaluate(key)
        return self.values[key]

    def value(self):
        return self._at()

    def _axis(self, j):
        return self.layout.x.start + j

    def dx(self, j=0):
        a = self._axis(j)
        return (self._at((a, 1)) - self._at((a, -1))) / (2 * self.h)

    def dxx(self, j=0):
        a = self._axis(j)
        return (self._at((a, 1)) - 2 * self._at() + self._at((a, -1))) / self.h**2

    def dxy(self, j, k):
        a, b = self._axis(j), self._axis(k)
        return (
            self._at((a, 1), (b, 1)) - self._at((a, 1), (b, -1)) - self._at((a, -1), (b, 1)) + self._at((a, -1), (b, -1))
        ) / (4 * self.h**2)

    def laplacian(self):
        return sum(self.dxx(j) for j in range(self.layout.n_space))

    def dt(self):
        a = self.layout.t
        return (self._at((a, 1)) - self._at((a, -1))) / (2 * self.h)


@dataclass(frozen=True)
class InputLayout:
    n_params: int
    n_space: int
    steady: bool = True

    @property
    def mu(self):
        return slice(0, self.n_params)

    @property
    def t(self):
        return None if self.steady else self.n_params

    @property
    def x(self):
        start = self.n_params + (0 if self.steady else 1)
        return slice(start, start + self.n_space)

    @property
    def width(self):
        return self.n_params + self.n_space + (0 if self.steady else 1)


@dataclass
class PinnProblem:
    """Residual operators and collocation samplers for a physics-informed fit.

    Network inputs are rows ``[mu..., t, x...]`` (``t`` omitted when
    ``steady``). Each residual maps a :class:`StencilField` to an array of
    shape ``(B,)`` or ``(B, k)``; samplers map ``(rng, count)`` to input
    rows, or to ``(rows, aux)`` in which case the residual is called as
    ``residual(field, aux)``. Optional predicates validate sampled points.
    """

    layout: InputLayout
    n_outputs: int
    interior: Callable
    sample_interior: Callable
    boundary: Optional[Callable] = None
    sample_boundary: Optional[Callable] = None
    initial: Optional[Callable] = None
    sample_initial: Optional[Callable] = None
    weights: tuple = (1.0, 1.0, 1.0)
    fd_step: float = 1e-4
    predicates: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (3,) or np.any(w < 0) or not np.any(w > 0):
            raise ValueError("loss weights must be three nonnegative numbers, not all zero")
        if self.layout.steady and self.initial is not None:
            raise ValueError("steady problems have no initial-condition term")

    def terms(self):
        yield "interior", self.interior, self.sample_interior, self.weights[0]
        if self.boundary is not None:
            yield "boundary", self.boundary, self.sample_boundary, self.weights[1]
        if self.initial is not None:
            yield "initial", self.initial, self.sample_initial, self.weights[2]


_CS_STEP = 1e-30


def _shifted_inputs(inputs, key, h):
    out = inputs.copy()
    for ax, s in key:
        out[:, ax] += s * h
    return out


def residual_loss_and_grad(net, problem, residual, inputs, aux=None):
    """Mean squared residual over ``inputs`` and its parameter gradient.

    ``aux`` (whatever the sampler returned next to the points) is passed to
    the residual as a second argument when not ``None``.
    """
    h = problem.fd_step
    if aux is not None:
        base_residual = residual
        residual = lambda f: base_residual(f, aux)  # noqa: E731
    caches = {}

    def evaluate(key):
        out, cache = net.forward(_shifted_inputs(inputs, key, h), return_cache=True)
        caches[key] = cache
        return out

    fld = StencilField(inputs, problem.layout, h, evaluate=evaluate)
    r = np.asarray(residual(fld), dtype=np.float64)
    r2 = r.reshape(r.shape[0], -1)
    B = r2.shape[0]
    loss = float(np.sum(r2**2) / B)

    gW = [np.zeros_like(A) for A in net.weights]
    gb = [np.zeros_like(b) for b in net.biases]
    base = {k: v.astype(complex) for k, v in fld.values.items()}
    for key, vals in fld.values.items():
        dL_dv = np.zeros_like(vals)
        for c in range(vals.shape[1]):
            pert = dict(base)
            bumped = base[key].copy()
            bumped[:, c] += 1j * _CS_STEP
            pert[key] = bumped
            rc = np.asarray(residual(StencilField(inputs, problem.layout, h, values=pert)))
            dr = rc.imag.reshape(B, -1) / _CS_STEP
            dL_dv[:, c] = 2.0 * np.sum(r2 * dr, axis=1) / B
        kW, kb = net.backward(caches[key], dL_dv)
        for i in range(len(gW)):
            gW[i] += kW[i]
            gb[i] += kb[i]
    return loss, gW, gb


class PINN(BaseEstimator):
    """Physics-informed network trained on Monte Carlo collocation residuals.

    The loss is ``w_L * mean|L|^2 + w_B * mean|B|^2 + w_T * mean|T|^2`` over
    points resampled every epoch.
    """

    def __init__(
        self,
        hidden_layers=(20, 20),
        activation="tanh",
        optimizer="adam",
        learning_rate=1e-3,
        epochs=2000,
        n_interior=64,
        n_boundary=16,
        n_initial=16,
        seed=0,
    ):
        self.hidden_layers = hidden_layers
        self.activation = activation
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.n_interior = n_interior
        self.n_boundary = n_boundary
        self.n_initial = n_initial
        self.seed = seed

    def fit(self, problem):
        counts = {"interior": self.n_interior, "boundary": self.n_boundary, "initial": self.n_initial}
        sizes = [problem.layout.width, *self.hidden_layers, problem.n_outputs]
        net = Mlp.init(sizes, self.activation, seed=self.seed)
        cfg = TrainConfig(self.optimizer, self.learning_rate, self.epochs, seed=self.seed)
        opt = _Optimizer(cfg, net.get_flat().size)
        rng = np.random.default_rng(self.seed)
        history = []
        for epoch in range(self.epochs):
            gW = [np.zeros_like(A) for A in net.weights]
            gb = [np.zeros_like(b) for b in net.biases]
            parts = {"interior": 0.0, "boundary": 0.0, "initial": 0.0}
            for name, residual, sampler, weight in problem.terms():
                if counts[name] < 1:
                    raise ValueError(f"{name} collocation count must be >= 1")
                drawn = sampler(rng, counts[name])
                pts, aux = drawn if isinstance(drawn, tuple) else (drawn, None)
                pts = np.asarray(pts, dtype=np.float64)
                pred = problem.predicates.get(name)
                if pred is not None and not np.all(pred(pts)):
                    raise NumericalError(f"{name} sampler produced points outside its domain")
                loss, tW, tb = residual_loss_and_grad(net, problem, residual, pts, aux)
                parts[name] = loss
                for i in range(len(gW)):
                    gW[i] += weight * tW[i]
                    gb[i] += weight * tb[i]
            w = problem.weights
            total = w[0] * parts["interior"] + w[1] * parts["boundary"] + w[2] * parts["initial"]
            if not np.isfinite(total):
                raise NumericalError(f"PINN training diverged at epoch {epoch}")
            history.append((total, parts["interior"], parts["boundary"], parts["initial"]))
            net.set_flat(opt.step(net.get_flat(), flatten_grads(gW, gb)))
        self.net_ = net
        self.loss_history_ = np.array(history)
        self.layout_ = problem.layout
        return self

    def predict(self, inputs):
        check_is_fitted(self)
        return self.net_.forward(np.atleast_2d(np.asarray(inputs, dtype=np.float64)))
