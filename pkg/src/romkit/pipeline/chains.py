"""Surrogate chains: parameter -> states maps built from training snapshots.

Every chain exposes ``fit(train, bench, cfg)``, ``predict(mu)`` returning a
``dof x T`` state matrix on the benchmark's time grid, and a flat
``(meta, arrays)`` state used for persistence.
"""
import numpy as np

from ..dmd import DMD
from ..exceptions import ConfigError, RomkitError
from ..ffd import from_parameters
from ..galerkin import THETA_REGISTRY, GalerkinROM, ReducedOperator, assemble_reduced
from ..io import load_arrays, save_arrays
from ..kernel_regression import GaussianProcess, RBFInterpolator, default_grid, select_hyperparams
from ..neural import PINN, DDNNRegressor, InputLayout, Mlp, PinnProblem
from ..reduction import POD

# ---------------------------------------------------------------------------
# estimator persistence: fitted ``*_`` attributes go to arrays or metadata

_ESTIMATORS = {cls.__name__: cls for cls in (POD, DMD, RBFInterpolator, GaussianProcess, DDNNRegressor)}
_EXTRA_ATTRS = ("_scalar_output",)


def _pack(prefix, est, meta, arrays):
    entry = {"class": type(est).__name__, "params": _jsonable(est.get_params()), "scalars": {}, "arrays": []}
    for name, val in vars(est).items():
        if not (name.endswith("_") and not name.startswith("_")) and name not in _EXTRA_ATTRS:
            continue
        if isinstance(val, Mlp):
            entry["scalars"][name] = {"mlp": len(val.weights), "activation": val.activation, "output": val.output}
            for i, (W, b) in enumerate(zip(val.weights, val.biases)):
                arrays[f"{prefix}.{name}.W{i}"] = W
                arrays[f"{prefix}.{name}.b{i}"] = b
        elif isinstance(val, (np.ndarray, list)):
            arrays[f"{prefix}.{name}"] = np.asarray(val)
            entry["arrays"].append(name)
        elif isinstance(val, (bool, int, float, str, np.integer, np.floating)) or val is None:
            entry["scalars"][name] = val.item() if isinstance(val, np.generic) else val
    meta[prefix] = entry


def _unpack(prefix, meta, arrays):
    entry = meta[prefix]
    params = dict(entry["params"])
    if "hidden_layers" in params:
        params["hidden_layers"] = tuple(params["hidden_layers"])
    if isinstance(params.get("length_scale"), list):
        params["length_scale"] = np.asarray(params["length_scale"])
    est = _ESTIMATORS[entry["class"]](**params)
    for name in entry["arrays"]:
        setattr(est, name, arrays[f"{prefix}.{name}"])
    for name, val in entry["scalars"].items():
        if isinstance(val, dict) and "mlp" in val:
            n = val["mlp"]
            W = [arrays[f"{prefix}.{name}.W{i}"] for i in range(n)]
            b = [arrays[f"{prefix}.{name}.b{i}"] for i in range(n)]
            val = Mlp(W, b, val["activation"], val["output"])
        setattr(est, name, val)
    return est


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# regressors


def make_regressor(name, cfg, X, Y):
    """Configured, unfitted regressor ``name`` for inputs ``X``/targets ``Y``."""
    seed = cfg.seed
    if name == "rbf":
        return RBFInterpolator(
            kernel=cfg.get("rbf", "kernel", "thin_plate"),
            epsilon=cfg.get_float("rbf", "epsilon"),
            tail=cfg.get("rbf", "tail", "linear"),
        )
    if name == "gpr":
        prior = cfg.get("gpr", "prior_mean", "constant")
        if cfg.get_bool("gpr", "select", True):
            s2, ell, noise = select_hyperparams(X, Y, default_grid(X, Y), prior)
            return GaussianProcess(s2, ell, noise, prior)
        return GaussianProcess(
            cfg.get_float("gpr", "signal_variance", 1.0),
            cfg.get_float("gpr", "length_scale", 1.0),
            cfg.get_float("gpr", "noise", 0.0),
            prior,
        )
    if name == "ddnn":
        batch = cfg.get_int("ddnn", "batch_size")
        return DDNNRegressor(
            hidden_layers=cfg.get_ints("ddnn", "hidden", (32, 32)),
            activation=cfg.get("ddnn", "activation", "tanh"),
            optimizer=cfg.get("ddnn", "optimizer", "adam"),
            learning_rate=cfg.get_float("ddnn", "learning_rate", 1e-3),
            epochs=cfg.get_int("ddnn", "epochs", 2000),
            batch_size=batch,
            seed=seed,
        )
    raise ConfigError(f"unknown regressor {name!r}")


def _relative(pred, target):
    den = np.linalg.norm(target)
    return float(np.linalg.norm(pred - target) / den) if den > 0 else float(np.linalg.norm(pred))


def _grouped(train):
    """Training parameters ``(n, p)`` and their state blocks ``[dof x T]``."""
    mus, blocks = [], []
    for mu, g in train.groups():
        mus.append(np.atleast_1d(mu))
        blocks.append(g.snapshots)
    T = {b.shape[1] for b in blocks}
    if len(T) != 1:
        raise ConfigError("every training parameter needs the same number of snapshots")
    return np.array(mus, dtype=float), blocks


# ---------------------------------------------------------------------------
# chains


class Chain:
    kind = None
    # relative error of the regression stage at its own training nodes
    regression_train_error = None

    def __init__(self, method):
        self.method = method

    def fit(self, train, bench, cfg):
        raise NotImplementedError

    def predict(self, mu):
        raise NotImplementedError

    def state(self):
        raise NotImplementedError

    @classmethod
    def from_state(cls, meta, arrays, bench=None):
        raise NotImplementedError


class PodRegression(Chain):
    """POD of all training states; ``mu -> coefficients over time`` regression."""

    kind = "pod-regression"

    def __init__(self, method):
        super().__init__(method)
        self.regressor_name = method.split("+")[1]

    def _pod(self, cfg):
        energy = cfg.get_float("pod", "energy")
        rank = cfg.get_int("pod", "rank")
        if rank is None and energy is None:
            energy = 1.0 - 1e-8
        return POD(rank=rank, energy=energy, center=cfg.get_bool("pod", "center", False))

    def _fit_coefficients(self, mus, blocks, cfg):
        self.pod_ = self._pod(cfg).fit(np.hstack(blocks).T)
        self.n_times_ = blocks[0].shape[1]
        C = np.array([self.pod_.transform(S.T).ravel() for S in blocks])
        self.regressor_ = make_regressor(self.regressor_name, cfg, mus, C).fit(mus, C)
        self.regression_train_error = _relative(self.regressor_.predict(mus), C)

    def fit(self, train, bench, cfg):
        mus, blocks = _grouped(train)
        self._fit_coefficients(mus, blocks, cfg)
        return self

    def predict(self, mu):
        c = self.regressor_.predict(np.atleast_2d(np.asarray(mu, dtype=float)))[0]
        return self.pod_.inverse_transform(c.reshape(self.n_times_, -1)).T

    def state(self):
        meta = {"n_times": self.n_times_, "regression_train_error": self.regression_train_error}
        arrays = {}
        _pack("pod", self.pod_, meta, arrays)
        _pack("regressor", self.regressor_, meta, arrays)
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays, bench=None):
        chain = cls(meta["method"])
        chain.n_times_ = meta["n_times"]
        chain.regression_train_error = meta["regression_train_error"]
        chain.pod_ = _unpack("pod", meta, arrays)
        chain.regressor_ = _unpack("regressor", meta, arrays)
        return chain


class DmdRegression(PodRegression):
    """DMD of the training trajectories, then POD + regression of the DMD states.

    ``[dmd] mode`` is ``per-parameter`` (default: one operator per training
    parameter) or ``pooled`` (one operator shared by all trajectories, with
    per-parameter amplitudes).
    """

    kind = "dmd-regression"

    def fit(self, train, bench, cfg):
        mus, blocks = _grouped(train)
        if blocks[0].shape[1] < 2:
            raise ConfigError("DMD chains need at least two snapshots per parameter")
        times = bench.times()
        raw = cfg.get("dmd", "rank")
        rank = None
        if raw is not None:
            rank = float(raw) if "." in raw or "e" in raw.lower() else int(raw)
        mode = cfg.get("dmd", "mode", "per-parameter")
        if mode not in ("per-parameter", "pooled"):
            raise ConfigError(f"[dmd] mode must be per-parameter or pooled, got {mode!r}")
        self.dmds_, rebuilt, self.imag_residue_ = [], [], 0.0
        if mode == "pooled":
            dmd = DMD(rank=rank).fit_pooled([S.T for S in blocks], times=times)
            self.dmds_.append(dmd)
            fits = [dmd.reconstruct(times, dmd.amplitudes_for(S[:, 0])) for S in blocks]
        else:
            for S in blocks:
                self.dmds_.append(DMD(rank=rank).fit(S.T, times=times))
            fits = [d.reconstruct(times) for d in self.dmds_]
        for Xr, imag in fits:
            self.imag_residue_ = max(self.imag_residue_, imag)
            rebuilt.append(Xr.T)
        self._fit_coefficients(mus, rebuilt, cfg)
        return self

    def state(self):
        meta, arrays = super().state()
        meta["n_dmd"] = len(self.dmds_)
        meta["imag_residue"] = self.imag_residue_
        for i, dmd in enumerate(self.dmds_):
            _pack(f"dmd{i}", dmd, meta, arrays)
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays, bench=None):
        chain = super().from_state(meta, arrays, bench)
        chain.imag_residue_ = meta["imag_residue"]
        chain.dmds_ = [_unpack(f"dmd{i}", meta, arrays) for i in range(meta["n_dmd"])]
        return chain


class RawDDNN(Chain):
    """Network from parameters straight to the flattened state history."""

    kind = "ddnn"

    def fit(self, train, bench, cfg):
        mus, blocks = _grouped(train)
        self.shape_ = blocks[0].shape
        Y = np.array([S.ravel() for S in blocks])
        self.regressor_ = make_regressor("ddnn", cfg, mus, Y).fit(mus, Y)
        self.regression_train_error = _relative(self.regressor_.predict(mus), Y)
        return self

    def predict(self, mu):
        return self.regressor_.predict(np.atleast_2d(np.asarray(mu, dtype=float)))[0].reshape(self.shape_)

    def state(self):
        meta = {"shape": list(self.shape_), "regression_train_error": self.regression_train_error}
        arrays = {}
        _pack("regressor", self.regressor_, meta, arrays)
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays, bench=None):
        chain = cls(meta["method"])
        chain.shape_ = tuple(meta["shape"])
        chain.regression_train_error = meta["regression_train_error"]
        chain.regressor_ = _unpack("regressor", meta, arrays)
        return chain


class _ThetaOnly:
    """Coefficient functions of a persisted affine problem (no operators)."""

    def __init__(self, theta_a, theta_f):
        self.theta_a, self.theta_f = theta_a, theta_f

    def coefficients(self, mu):
        return THETA_REGISTRY[self.theta_a](mu), THETA_REGISTRY[self.theta_f](mu)


class PodGalerkin(Chain):
    """Projection-based reduced basis solve of the affine full-order problem."""

    kind = "pod-galerkin"

    def fit(self, train, bench, cfg):
        problem = getattr(bench, "problem", None)
        if problem is None:
            raise ConfigError("pod-galerkin needs an affine full-order problem")
        if not (isinstance(problem.theta_a, str) and isinstance(problem.theta_f, str)):
            raise ConfigError("pod-galerkin persistence needs registered coefficient functions")
        mus, blocks = _grouped(train)
        Y = np.hstack(blocks).T
        method = cfg.get("galerkin", "method", "pod")
        if method not in ("pod", "greedy"):
            raise ConfigError(f"[galerkin] method must be 'pod' or 'greedy', got {method!r}")
        rank = cfg.get_int("galerkin", "rank", cfg.get_int("pod", "rank"))
        energy = cfg.get_float("galerkin", "energy")
        if method == "pod":
            full = POD().fit(Y)
            if rank is None:
                rank = POD(energy=energy).fit(Y).n_components_ if energy is not None else min(15, full.n_components_)
            self.full_basis_ = full.modes_
            self.operator_ = assemble_reduced(problem, full.modes_[:, :rank])
        else:
            rom = GalerkinROM(
                problem,
                "greedy",
                tol=cfg.get_float("galerkin", "tol", 1e-6),
                max_rank=cfg.get_int("galerkin", "max_rank", rank or 50),
            ).fit(mus, Y)
            self.operator_ = rom.operator_
            self.full_basis_ = rom.operator_.basis
        self.theta_ = (problem.theta_a, problem.theta_f)
        return self

    @property
    def n_rb(self):
        return self.operator_.n_rb

    def predict(self, mu):
        return self.operator_.lift(self.operator_.solve(np.atleast_1d(mu)))[:, None]

    def operator_of_rank(self, problem, rank):
        """Reduced operator on the leading ``rank`` basis vectors."""
        return assemble_reduced(problem, self.full_basis_[:, :rank])

    def state(self):
        op = self.operator_
        meta = {"theta": list(self.theta_), "n_rb": op.n_rb, "n_terms": [len(op.reduced_operators), len(op.reduced_rhs)]}
        arrays = {"basis": op.basis, "full_basis": self.full_basis_}
        for i, A in enumerate(op.reduced_operators):
            arrays[f"A{i}"] = A
        for i, F in enumerate(op.reduced_rhs):
            arrays[f"F{i}"] = F
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays, bench=None):
        chain = cls(meta["method"])
        chain.theta_ = tuple(meta["theta"])
        problem = getattr(bench, "problem", None) or _ThetaOnly(*chain.theta_)
        nA, nF = meta["n_terms"]
        chain.operator_ = ReducedOperator(
            arrays["basis"], [arrays[f"A{i}"] for i in range(nA)], [arrays[f"F{i}"] for i in range(nF)], problem
        )
        chain.full_basis_ = arrays["full_basis"]
        return chain


class PinnChain(Chain):
    """Physics-informed network ``(mu, x) -> u`` on the morphed Poisson domain."""

    kind = "pinn"
    mus_per_batch = 4

    def fit(self, train, bench, cfg):
        fom = getattr(bench, "fom", None)
        if fom is None or fom.name != "morphed-poisson":
            raise ConfigError("the pinn chain is defined for the morphed-poisson benchmark")
        space = fom.parameter_space()
        ref = fom.reference
        areas = np.abs(ref.signed_areas())
        tri_prob = areas / areas.sum()
        bnd = ref.boundary_vertices()
        source, dirichlet = fom.config.source, fom.config.dirichlet

        def draw(rng, count, reference_points):
            # a few parameters per batch; each needs a mesh morph for its barycenter
            per = np.array_split(np.arange(count), self.mus_per_batch)
            rows, centers = [], []
            for idx in per:
                if idx.size == 0:
                    continue
                mu = space.lower + rng.random(space.dim) * (space.upper - space.lower)
                mesh = fom.domain(mu)
                lattice = from_parameters(fom.template, mu)
                pts = lattice.morph(reference_points(rng, idx.size))[:, :2]
                rows.append(np.hstack([np.repeat(mu[None], idx.size, axis=0), pts]))
                centers.append(np.repeat(mesh.barycenter()[None, :2], idx.size, axis=0))
            return np.vstack(rows), np.vstack(centers)

        def interior_points(rng, n):
            tri = ref.triangles[rng.choice(len(tri_prob), size=n, p=tri_prob)]
            a, b = rng.random(n), rng.random(n)
            flip = a + b > 1
            a[flip], b[flip] = 1 - a[flip], 1 - b[flip]
            V = ref.xy
            return V[tri[:, 0]] + a[:, None] * (V[tri[:, 1]] - V[tri[:, 0]]) + b[:, None] * (V[tri[:, 2]] - V[tri[:, 0]])

        def boundary_points(rng, n):
            return ref.xy[rng.choice(bnd, size=n)]

        problem = PinnProblem(
            layout=InputLayout(space.dim, 2),
            n_outputs=1,
            interior=lambda f, c: f.laplacian()[:, 0] - source(f.x, c),
            sample_interior=lambda rng, n: draw(rng, n, interior_points),
            boundary=lambda f, c: f.value()[:, 0] - dirichlet(f.x, c),
            sample_boundary=lambda rng, n: draw(rng, n, boundary_points),
            fd_step=1e-3,
        )
        self.pinn_ = PINN(
            hidden_layers=cfg.get_ints("pinn", "hidden", (20, 20)),
            activation=cfg.get("pinn", "activation", "tanh"),
            learning_rate=cfg.get_float("pinn", "learning_rate", 5e-3),
            epochs=cfg.get_int("pinn", "epochs", 2000),
            n_interior=cfg.get_int("pinn", "n_interior", 64),
            n_boundary=cfg.get_int("pinn", "n_boundary", 32),
            seed=cfg.seed,
        ).fit(problem)
        self.fom_ = fom
        return self

    def predict(self, mu):
        if getattr(self, "fom_", None) is None:
            raise RomkitError("a loaded pinn chain needs its benchmark to place the mesh")
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        pts = self.fom_.domain(mu).xy
        inputs = np.hstack([np.repeat(mu[None], len(pts), axis=0), pts])
        return self.pinn_.net_.forward(inputs)

    def state(self):
        net = self.pinn_.net_
        meta = {"layers": len(net.weights), "activation": net.activation, "final_loss": list(map(float, self.pinn_.loss_history_[-1]))}
        arrays = {"loss_history": self.pinn_.loss_history_}
        for i, (W, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"W{i}"], arrays[f"b{i}"] = W, b
        return meta, arrays

    @classmethod
    def from_state(cls, meta, arrays, bench=None):
        chain = cls(meta["method"])
        n = meta["layers"]
        chain.pinn_ = PINN()
        chain.pinn_.net_ = Mlp([arrays[f"W{i}"] for i in range(n)], [arrays[f"b{i}"] for i in range(n)], meta["activation"])
        chain.pinn_.loss_history_ = arrays["loss_history"]
        chain.fom_ = getattr(bench, "fom", None)
        return chain


CHAIN_KINDS = {c.kind: c for c in (PodRegression, DmdRegression, RawDDNN, PodGalerkin, PinnChain)}


def make_chain(method):
    if method == "pod-galerkin":
        return PodGalerkin(method)
    if method == "pinn":
        return PinnChain(method)
    if method == "ddnn":
        return RawDDNN(method)
    if method.startswith("pod+"):
        return PodRegression(method)
    if method.startswith("dmd+"):
        return DmdRegression(method)
    raise ConfigError(f"unknown method chain {method!r}")


def save_chain(path, chain, fingerprint):
    meta, arrays = chain.state()
    meta.update(method=chain.method, kind=chain.kind, fingerprint=fingerprint)
    save_arrays(path, meta, **arrays)


def load_chain(path, bench=None):
    meta, arrays = load_arrays(path)
    try:
        cls = CHAIN_KINDS[meta["kind"]]
    except KeyError:
        raise RomkitError(f"{path}: unknown model kind {meta.get('kind')!r}") from None
    chain = cls.from_state(meta, arrays, bench)
    chain.fingerprint = meta.get("fingerprint")
    return chain
