"""Offline stages: sampling, full-order solves and surrogate training.

All artifacts live under one output directory::

    manifest.json          fingerprint, per-stage status, validity flag
    params.csv             training parameters
    test_params.csv        held-out parameters
    snapshots/train.roms   training snapshots
    fom_timing.jsonl       one record per full-order solve
    models/<method>.npz    fitted chains

A stage whose recorded fingerprint matches the current configuration is
skipped unless forced. A failing stage marks the manifest invalid and
re-raises.
"""
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from ..exceptions import RomkitError
from ..io import load_snapshots, save_snapshots
from .benchmarks import holdout_parameters, make_benchmark, training_parameters
from .chains import load_chain, make_chain, save_chain

STAGES = ("sample", "fom", "train", "evaluate", "report", "plot")


def default_output_root():
    return Path(os.environ.get("ROMKIT_OUT", "romkit-out"))


class StageError(RomkitError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class Workspace:
    """Output directory plus its manifest."""

    def __init__(self, root, cfg):
        self.root = Path(root)
        self.cfg = cfg
        self.fingerprint = cfg.fingerprint()
        self.root.mkdir(parents=True, exist_ok=True)
        self._bench = None

    @property
    def manifest_path(self):
        return self.root / "manifest.json"

    def manifest(self):
        if not self.manifest_path.exists():
            return {"stages": {}}
        try:
            return json.loads(self.manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise RomkitError(f"{self.manifest_path}: corrupt manifest: {exc}") from None

    def _write_manifest(self, m):
        m["valid"] = all(s.get("status") == "done" for s in m["stages"].values())
        tmp = self.manifest_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(m, indent=2, sort_keys=True))
        tmp.replace(self.manifest_path)

    def is_current(self, stage):
        s = self.manifest()["stages"].get(stage, {})
        return s.get("status") == "done" and s.get("fingerprint") == self.fingerprint

    def require(self, stage):
        if not self.is_current(stage):
            raise RomkitError(f"stage {stage!r} has no valid artifacts for this configuration in {self.root}; run it first")

    @contextmanager
    def stage(self, name):
        m = self.manifest()
        m["fingerprint"] = self.fingerprint
        m["benchmark"] = self.cfg.benchmark
        m["methods"] = self.cfg.methods
        # later stages depend on this one, so they stop being valid
        for later in STAGES[STAGES.index(name) + 1 :]:
            if later in m["stages"]:
                m["stages"][later]["status"] = "stale"
        m["stages"][name] = {"status": "running", "fingerprint": self.fingerprint}
        self._write_manifest(m)
        t0 = time.perf_counter()
        try:
            yield
        except Exception as exc:
            m = self.manifest()
            m["stages"][name] = {"status": "failed", "fingerprint": self.fingerprint, "error": str(exc)}
            self._write_manifest(m)
            if isinstance(exc, RomkitError) or isinstance(exc, (ValueError, ArithmeticError, OSError)):
                raise
            raise StageError(name, exc) from exc
        m = self.manifest()
        m["stages"][name] = {
            "status": "done",
            "fingerprint": self.fingerprint,
            "seconds": round(time.perf_counter() - t0, 3),
        }
        self._write_manifest(m)

    def bench(self):
        if self._bench is None:
            self._bench = make_benchmark(self.cfg)
        return self._bench

    def path(self, *parts):
        return self.root.joinpath(*parts)

    def model_path(self, method):
        return self.path("models", method.replace("+", "_") + ".npz")


def _write_params(path, mus):
    mus = np.atleast_2d(mus)
    header = ",".join(f"mu_{i}" for i in range(mus.shape[1]))
    np.savetxt(path, mus, delimiter=",", header=header, comments="", fmt="%.17g")


def read_params(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))


def run_sample(ws, force=False):
    if ws.is_current("sample") and not force:
        return False
    with ws.stage("sample"):
        bench = ws.bench()
        _write_params(ws.path("params.csv"), training_parameters(ws.cfg, bench))
        _write_params(ws.path("test_params.csv"), holdout_parameters(ws.cfg, bench))
    return True


def solve_all(bench, mus, threads=1):
    """Full-order states and wall times, in input order."""
    mus = list(np.atleast_2d(mus))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(bench.timed_solve, mus))
    return [bench.timed_solve(mu) for mu in mus]


def run_fom(ws, force=False, threads=1):
    ws.require("sample")
    if ws.is_current("fom") and not force:
        return False
    with ws.stage("fom"):
        bench = ws.bench()
        mus = read_params(ws.path("params.csv"))
        if bench.has_fom:
            results = solve_all(bench, mus, threads)
            with open(ws.path("fom_timing.jsonl"), "w") as fh:
                for i, (mu, (_, secs)) in enumerate(zip(mus, results)):
                    rec = {"run_id": f"train-{i:04d}", "mu": mu.tolist(), "wall_seconds": secs, "dof": bench.dof}
                    fh.write(json.dumps(rec) + "\n")
            train = bench.to_snapshot_set(mus, [S for S, _ in results])
        else:
            train = bench.train
            ws.path("fom_timing.jsonl").write_text("")
        train.metadata.update(fingerprint=ws.fingerprint)
        save_snapshots(ws.path("snapshots", "train.roms"), train)
    return True


def run_train(ws, force=False):
    ws.require("fom")
    if ws.is_current("train") and not force:
        return False
    with ws.stage("train"):
        bench = ws.bench()
        train = load_snapshots(ws.path("snapshots", "train.roms"))
        summary = {}
        for method in ws.cfg.methods:
            chain = make_chain(method)
            t0 = time.perf_counter()
            chain.fit(train, bench, ws.cfg)
            save_chain(ws.model_path(method), chain, ws.fingerprint)
            summary[method] = {
                "fit_seconds": time.perf_counter() - t0,
                "regression_train_error": chain.regression_train_error,
            }
        ws.path("models", "training.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return True


def load_models(ws):
    ws.require("train")
    return {m: load_chain(ws.model_path(m), ws.bench()) for m in ws.cfg.methods}


def run_offline(ws, force=False, threads=1):
    """Sample, solve and train; returns the stages that actually ran."""
    ran = []
    if run_sample(ws, force):
        ran.append("sample")
    if run_fom(ws, force or bool(ran), threads):
        ran.append("fom")
    if run_train(ws, force or bool(ran)):
        ran.append("train")
    return ran
