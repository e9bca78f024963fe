"""Pipeline configuration files.

Grammar (UTF-8, line oriented, parsed with :mod:`configparser`)::

    # comment
    [section]
    key = value

Only the sections and keys listed in ``SCHEMA`` are accepted; anything else
is a :class:`~romkit.exceptions.ConfigError`. Lists are comma separated;
parameter vectors inside ``test_params`` are whitespace separated and
separated from each other by ``;``.
"""
import configparser
import hashlib
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigError

BENCHMARKS = ("cavity", "diffusion-rb", "morphed-poisson", "user-snapshots")
REGRESSORS = ("rbf", "gpr", "ddnn")
METHODS = ("pod-galerkin", "ddnn", "pinn") + tuple(f"{p}+{r}" for p in ("pod", "dmd") for r in REGRESSORS)

SCHEMA = {
    "pipeline": {"benchmark", "methods", "seed", "output", "test_params", "test_count", "threads", "online_repeats", "fom_repeats"},
    "sampling": {"kind", "count", "seed", "normal_center", "normal_spread"},
    "fom": {
        "cells", "dt", "final_time", "n_snapshots", "nu_lower", "nu_upper", "pressure_solver",
        "blocks", "coloring", "theta", "mu_lower", "mu_upper", "forcing",
        "domain", "resolution", "mu_bound",
        "path", "format", "train_fraction",
    },
    "pod": {"rank", "energy", "center"},
    "dmd": {"rank", "mode"},
    "rbf": {"kernel", "epsilon", "tail"},
    "gpr": {"signal_variance", "length_scale", "noise", "prior_mean", "select"},
    "ddnn": {"hidden", "activation", "optimizer", "learning_rate", "epochs", "batch_size"},
    "galerkin": {"method", "rank", "energy", "tol", "max_rank"},
    "pinn": {"hidden", "activation", "learning_rate", "epochs", "n_interior", "n_boundary"},
}

METHOD_BENCHMARKS = {
    "pod-galerkin": {"diffusion-rb"},
    "pinn": {"morphed-poisson"},
    "dmd+rbf": {"cavity", "user-snapshots"},
    "dmd+gpr": {"cavity", "user-snapshots"},
    "dmd+ddnn": {"cavity", "user-snapshots"},
}


@dataclass
class PipelineConfig:
    text: str
    sections: dict

    @property
    def benchmark(self):
        return self.sections["pipeline"]["benchmark"]

    @property
    def methods(self):
        return [m.strip() for m in self.sections["pipeline"]["methods"].split(",") if m.strip()]

    @property
    def seed(self):
        return self.get_int("pipeline", "seed", 0)

    def section(self, name):
        return self.sections.get(name, {})

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def get_int(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be an integer, got {v!r}") from None

    def get_float(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a number, got {v!r}") from None

    def get_bool(self, section, key, default=False):
        v = self.get(section, key)
        if v is None:
            return default
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key} must be a boolean, got {v!r}")

    def get_floats(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return [float(t) for t in v.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a list of numbers, got {v!r}") from None

    def get_ints(self, section, key, default=None):
        vals = self.get_floats(section, key)
        if vals is None:
            return default
        if any(v != int(v) for v in vals):
            raise ConfigError(f"[{section}] {key} must be a list of integers")
        return tuple(int(v) for v in vals)

    def test_params(self):
        v = self.get("pipeline", "test_params")
        if v is None:
            return None
        try:
            rows = [[float(t) for t in chunk.split()] for chunk in v.split(";") if chunk.strip()]
        except ValueError:
            raise ConfigError(f"[pipeline] test_params is malformed: {v!r}") from None
        if len({len(r) for r in rows}) != 1:
            raise ConfigError("[pipeline] test_params vectors must share one length")
        return np.array(rows)

    def with_overrides(self, seed=None):
        if seed is None:
            return self
        sections = {k: dict(v) for k, v in self.sections.items()}
        sections["pipeline"]["seed"] = str(int(seed))
        return PipelineConfig(self.text, sections)

    def canonical(self):
        """Normalised text: sorted sections and keys, stripped values."""
        lines = []
        for sec in sorted(self.sections):
            for key in sorted(self.sections[sec]):
                lines.append(f"{sec}.{key}={self.sections[sec][key].strip()}")
        return "\n".join(lines) + "\n"

    def fingerprint(self):
        """Hex SHA-256 (32 bytes) of :meth:`canonical`."""
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    sections = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        unknown = set(parser[sec]) - SCHEMA[sec]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(unknown))}")
        sections[sec] = {k: v.strip() for k, v in parser[sec].items()}
    cfg = PipelineConfig(text, sections)
    validate(cfg)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def validate(cfg):
    if "pipeline" not in cfg.sections:
        raise ConfigError("missing [pipeline] section")
    bench = cfg.get("pipeline", "benchmark")
    if bench not in BENCHMARKS:
        raise ConfigError(f"[pipeline] benchmark must be one of {BENCHMARKS}, got {bench!r}")
    if cfg.get("pipeline", "methods") is None or not cfg.methods:
        raise ConfigError("[pipeline] methods must list at least one method chain")
    for m in cfg.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method chain {m!r}; known: {', '.join(METHODS)}")
        allowed = METHOD_BENCHMARKS.get(m)
        if allowed is not None and bench not in allowed:
            raise ConfigError(f"method {m!r} is not compatible with benchmark {bench!r}")
    if bench == "user-snapshots" and cfg.get("fom", "path") is None:
        raise ConfigError("user-snapshots benchmark needs [fom] path")
    cfg.seed  # type check
