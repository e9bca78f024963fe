"""Uniform wrappers around the built-in full-order models."""
import time

import numpy as np

from ..dataset import ParameterSpace, SamplingPlan, SnapshotSet, sample, split_train_test
from ..exceptions import ConfigError
from ..fom.cavity import CavityConfig, CavityFOM
from ..fom.diffusion import DiffusionConfig, DiffusionFOM
from ..fom.poisson import MorphedPoissonConfig, MorphedPoissonFOM
from ..io import load_snapshots


class Benchmark:
    """A FOM seen as ``mu -> states (dof x T)`` plus sampling defaults."""

    transient = False
    has_fom = True

    def __init__(self, fom):
        self.fom = fom

    @property
    def dof(self):
        return self.fom.dof

    def parameter_space(self):
        return self.fom.parameter_space()

    def times(self):
        return np.zeros(1)

    def solve_states(self, mu):
        return np.asarray(self.fom.solve(mu)).reshape(self.dof, -1)

    def timed_solve(self, mu):
        t0 = time.perf_counter()
        S = self.solve_states(mu)
        return S, time.perf_counter() - t0

    def to_snapshot_set(self, mus, states):
        T = self.times()
        cols, params, times = [], [], []
        for mu, S in zip(mus, states):
            cols.append(S)
            params.append(np.repeat(np.atleast_1d(mu)[None], S.shape[1], axis=0))
            times.append(T)
        return SnapshotSet(np.hstack(cols), np.vstack(params), np.concatenate(times), self.metadata())

    def metadata(self):
        return {"fom": self.fom.name}

    def geometry(self):
        """Arrays needed to draw a state: points and triangles or a grid."""
        return {}


class CavityBenchmark(Benchmark):
    transient = True

    def times(self):
        return self.fom.times()

    def solve_states(self, mu):
        return self.fom.solve(float(np.atleast_1d(mu)[0]))

    def geometry(self):
        n = self.fom.config.cells
        return {"grid_shape": np.array([n, n])}


class DiffusionBenchmark(Benchmark):
    @property
    def problem(self):
        return self.fom.problem

    def geometry(self):
        return {"points": self.fom.mesh.xy[self.fom.interior]}


class PoissonBenchmark(Benchmark):
    def geometry(self):
        return {"points": self.fom.reference.xy, "triangles": self.fom.reference.triangles}


class UserSnapshots(Benchmark):
    """Precomputed snapshots: no FOM, test data comes from a split."""

    has_fom = False

    def __init__(self, path, fmt, fraction, seed):
        data = load_snapshots(path, fmt)
        self.data = data
        self.train, self.test = split_train_test(data, fraction, seed)
        first = next(data.groups())[1]
        self._times = first.times
        self.transient = first.n_snapshots > 1
        for _, g in data.groups():
            if g.n_snapshots != first.n_snapshots or not np.array_equal(g.times, first.times):
                raise ConfigError("user snapshots must share one time grid across parameters")
        self.fom = None

    @property
    def dof(self):
        return self.data.dof

    def times(self):
        return self._times

    def parameter_space(self):
        lo, hi = self.data.params.min(axis=0), self.data.params.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        return ParameterSpace(lo, hi)

    def solve_states(self, mu):
        sub = self.data.select_param(mu)
        if sub.n_snapshots == 0:
            raise ConfigError(f"no stored snapshots for parameter {mu}")
        return sub.snapshots[:, np.argsort(sub.times, kind="stable")]

    def metadata(self):
        return {"fom": "user-snapshots"}


def make_benchmark(cfg):
    name = cfg.benchmark
    g = cfg.get
    if name == "cavity":
        kwargs = {}
        for key, conv in (("cells", cfg.get_int), ("dt", cfg.get_float), ("final_time", cfg.get_float),
                          ("n_snapshots", cfg.get_int), ("nu_lower", cfg.get_float), ("nu_upper", cfg.get_float)):
            val = conv("fom", key)
            if val is not None:
                kwargs[key] = val
        if g("fom", "pressure_solver"):
            kwargs["pressure_solver"] = g("fom", "pressure_solver")
        return CavityBenchmark(CavityFOM(CavityConfig(**kwargs)))
    if name == "diffusion-rb":
        kwargs = {}
        for key, conv in (("cells", cfg.get_int), ("mu_lower", cfg.get_float), ("mu_upper", cfg.get_float),
                          ("forcing", cfg.get_float)):
            val = conv("fom", key)
            if val is not None:
                kwargs[key] = val
        blocks = cfg.get_ints("fom", "blocks")
        if blocks is not None:
            if len(blocks) != 2:
                raise ConfigError("[fom] blocks needs two integers")
            kwargs["blocks"] = blocks
        for key in ("coloring", "theta"):
            if g("fom", key):
                kwargs[key] = g("fom", key)
        return DiffusionBenchmark(DiffusionFOM(DiffusionConfig(**kwargs)))
    if name == "morphed-poisson":
        kwargs = {}
        if g("fom", "domain"):
            kwargs["domain"] = g("fom", "domain")
        if cfg.get_int("fom", "resolution") is not None:
            kwargs["resolution"] = cfg.get_int("fom", "resolution")
        if cfg.get_float("fom", "mu_bound") is not None:
            kwargs["mu_bound"] = cfg.get_float("fom", "mu_bound")
        return PoissonBenchmark(MorphedPoissonFOM(MorphedPoissonConfig(**kwargs)))
    if name == "user-snapshots":
        return UserSnapshots(g("fom", "path"), g("fom", "format"), cfg.get_float("fom", "train_fraction", 0.8), cfg.seed)
    raise ConfigError(f"unknown benchmark {name!r}")


def sampling_plan(cfg, default_count=60):
    kind = cfg.get("sampling", "kind", "uniform")
    center = cfg.get_floats("sampling", "normal_center")
    spread = cfg.get_floats("sampling", "normal_spread")
    try:
        return SamplingPlan(
            kind,
            cfg.get_int("sampling", "count", default_count),
            cfg.get_int("sampling", "seed", cfg.seed),
            None if center is None else np.array(center),
            None if spread is None else np.array(spread),
        )
    except ValueError as exc:
        raise ConfigError(f"[sampling] {exc}") from None


def training_parameters(cfg, bench):
    if isinstance(bench, UserSnapshots):
        return bench.train.unique_params()
    return sample(bench.parameter_space(), sampling_plan(cfg))


def holdout_parameters(cfg, bench):
    if isinstance(bench, UserSnapshots):
        return bench.test.unique_params()
    given = cfg.test_params()
    if given is not None:
        if given.shape[1] != bench.parameter_space().dim:
            raise ConfigError(f"test_params need {bench.parameter_space().dim} entries each")
        return given
    count = cfg.get_int("pipeline", "test_count", 1 if bench.transient else 3)
    return sample(bench.parameter_space(), SamplingPlan("uniform", count, cfg.seed + 1))
