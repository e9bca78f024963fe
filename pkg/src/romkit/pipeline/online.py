"""Online stage: accuracy and timing of every trained chain."""
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..io import load_arrays, load_snapshots, save_arrays
from .offline import load_models, read_params, solve_all


@dataclass
class BenchReport:
    method: str
    benchmark: str
    train_relative_error: float
    test_relative_error: float
    test_max_relative_error: float
    speedup: Optional[float]
    fom_seconds: Optional[float]
    rom_seconds: float
    regression_train_error: Optional[float] = None
    n_train: int = 0
    n_test: int = 0
    dof: int = 0
    test_errors: list = field(default_factory=list)
    n_rb: Optional[int] = None
    error_vs_nrb: list = field(default_factory=list)


def snapshot_errors(pred, truth):
    """Per-column ``||pred - truth|| / ||truth||`` (absolute where truth is 0)."""
    num = np.linalg.norm(pred - truth, axis=0)
    den = np.linalg.norm(truth, axis=0)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), num)


def median_time(func, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _errors(chain, mus, states):
    errs = [snapshot_errors(chain.predict(mu), S) for mu, S in zip(mus, states)]
    per_mu = [float(np.mean(e)) for e in errs]
    return float(np.mean(per_mu)), max(float(np.max(e)) for e in errs), per_mu


def nrb_curve(chain, problem, mus, states, max_rank=None):
    """Mean test errors of the Galerkin chain on nested basis prefixes.

    Rows are ``[n_rb, relative l2 error, relative energy-norm error]``. Only
    the energy-norm column is guaranteed nonincreasing: Galerkin projection
    is optimal in the operator norm, not in the Euclidean one.
    """
    n = chain.full_basis_.shape[1] if max_rank is None else min(max_rank, chain.full_basis_.shape[1])
    operators = [problem.assemble(mu)[0] for mu in mus]
    curve = []
    for r in range(1, n + 1):
        op = chain.operator_of_rank(problem, r)
        l2, energy = [], []
        for mu, S, A in zip(mus, states, operators):
            u = S[:, 0]
            e = u - op.lift(op.solve(mu))
            l2.append(np.linalg.norm(e) / np.linalg.norm(u))
            energy.append(np.sqrt(e @ (A @ e) / (u @ (A @ u))))
        curve.append([r, float(np.mean(l2)), float(np.mean(energy))])
    return curve


def run_evaluate(ws, force=False, threads=1):
    ws.require("train")
    if ws.is_current("evaluate") and not force:
        return False
    with ws.stage("evaluate"):
        _evaluate(ws, threads)
    return True


def _evaluate(ws, threads):
    cfg, bench = ws.cfg, ws.bench()
    models = load_models(ws)
    test_mus = read_params(ws.path("test_params.csv"))
    train = load_snapshots(ws.path("snapshots", "train.roms"))
    train_groups = list(train.groups())
    fom_repeats = max(3, cfg.get_int("pipeline", "fom_repeats", 3))
    rom_repeats = max(20, cfg.get_int("pipeline", "online_repeats", 20))

    fom_seconds = None
    if bench.has_fom:
        results = solve_all(bench, test_mus, threads)
        truth = [S for S, _ in results]
        # median over repeated solves at the first test parameter
        fom_seconds = median_time(lambda: bench.solve_states(test_mus[0]), fom_repeats)
    else:
        truth = [bench.solve_states(mu) for mu in test_mus]
    save_arrays(ws.path("online", "truth.npz"), {"fingerprint": ws.fingerprint}, mu=test_mus, states=np.stack(truth))

    reports = []
    for method, chain in models.items():
        test_err, test_max, per_mu = _errors(chain, test_mus, truth)
        train_err, _, _ = _errors(chain, [mu for mu, _ in train_groups], [g.snapshots for _, g in train_groups])
        rom_seconds = median_time(lambda: chain.predict(test_mus[0]), rom_repeats)
        rep = BenchReport(
            method=method,
            benchmark=cfg.benchmark,
            train_relative_error=train_err,
            test_relative_error=test_err,
            test_max_relative_error=test_max,
            speedup=None if fom_seconds is None else fom_seconds / rom_seconds,
            fom_seconds=fom_seconds,
            rom_seconds=rom_seconds,
            regression_train_error=chain.regression_train_error,
            n_train=len(train_groups),
            n_test=len(test_mus),
            dof=bench.dof,
            test_errors=per_mu,
        )
        if method == "pod-galerkin":
            rep.n_rb = chain.n_rb
            rep.error_vs_nrb = nrb_curve(chain, bench.problem, test_mus, truth)
        save_arrays(
            ws.path("online", method.replace("+", "_") + ".npz"),
            {"method": method, "fingerprint": ws.fingerprint},
            mu=test_mus,
            states=np.stack([chain.predict(mu) for mu in test_mus]),
        )
        reports.append(rep)
    ws.path("online", "bench_report.json").write_text(json.dumps([asdict(r) for r in reports], indent=2))
    return reports


def load_reports(ws):
    ws.require("evaluate")
    return [BenchReport(**r) for r in json.loads(ws.path("online", "bench_report.json").read_text())]


def load_predictions(ws, method):
    _, arrays = load_arrays(ws.path("online", method.replace("+", "_") + ".npz"))
    _, truth = load_arrays(ws.path("online", "truth.npz"))
    return arrays["mu"], truth["states"], arrays["states"]
