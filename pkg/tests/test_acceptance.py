"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from helpers import diffusion_errors, observed_orders, poisson_errors
from romkit import DMD, PINN, ActiveSubspace, GaussianProcess, Mlp, SnapshotSet
from romkit.exceptions import InvalidMeshError
from romkit.ffd import FfdLattice, from_parameters, morph_mesh
from romkit.fom.cavity import CavityConfig, CavityFOM
from romkit.fom.mesh import unit_square_mesh
from romkit.io import save_snapshots
from romkit.kernel_regression import squared_exponential
from romkit.neural import flatten_grads
from romkit.pipeline.benchmarks import holdout_parameters, make_benchmark
from romkit.pipeline.chains import make_chain
from romkit.pipeline.config import parse_config
from romkit.pipeline.offline import Workspace, run_offline
from romkit.pipeline.online import load_reports, nrb_curve, run_evaluate
from romkit.pipeline.report import run_report

DATA = Path(__file__).parent / "data"


def verdict(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


# ---------------------------------------------------------------------------


def _user_snapshots(path):
    x = np.linspace(0, 1, 40)
    cols, params, times = [], [], []
    for mu in np.linspace(0.5, 1.5, 8):
        for t in 0.1 * np.arange(6):
            cols.append(np.exp(-mu * t) * np.sin(np.pi * x * mu))
            params.append([mu])
            times.append(t)
    save_snapshots(path, SnapshotSet(np.column_stack(cols), np.array(params), np.array(times)))


RBF_PIPELINES = {
    "diffusion-rb": ("pod+rbf", "[sampling]\ncount = 12\n[fom]\ncells = 16\n"),
    "morphed-poisson": ("pod+rbf", "[sampling]\ncount = 12\n[fom]\nresolution = 6\n"),
    "cavity": ("pod+rbf, dmd+rbf", "[sampling]\ncount = 4\n[fom]\ncells = 8\ndt = 0.02\nfinal_time = 0.4\nn_snapshots = 10\n"),
    "user-snapshots": ("pod+rbf, dmd+rbf", "[fom]\npath = {path}\ntrain_fraction = 0.75\n"),
}


def test_criterion_01_rbf_interpolation_exactness(tmp_path):
    _user_snapshots(tmp_path / "user.csv")
    worst = {}
    with Clock() as clock:
        for bench, (methods, extra) in RBF_PIPELINES.items():
            text = f"[pipeline]\nbenchmark = {bench}\nmethods = {methods}\nseed = 1\n" + extra.format(path=tmp_path / "user.csv")
            ws = Workspace(tmp_path / bench, parse_config(text))
            run_offline(ws)
            for method, chain in _load(ws).items():
                worst[f"{bench}/{method}"] = chain.regression_train_error
    err = max(worst.values())
    verdict(1, "RBF train error at nodes", err <= 1e-12 and clock.seconds < 10, f"max {err:.2e} over {len(worst)} pipelines, {clock.seconds:.1f}s")


def _load(ws):
    from romkit.pipeline.offline import load_models

    return load_models(ws)


def test_criterion_02_galerkin_accuracy_ordering():
    text = "[pipeline]\nbenchmark = diffusion-rb\nmethods = pod-galerkin\nseed = 11\ntest_count = 10\n[sampling]\ncount = 20\n[fom]\ncells = 48\n"
    with Clock() as clock:
        cfg = parse_config(text)
        bench = make_benchmark(cfg)
        mus = np.random.default_rng(cfg.seed).uniform(0.1, 10.0, size=(20, 3))
        train = bench.to_snapshot_set(mus, [bench.solve_states(m) for m in mus])
        chain = make_chain("pod-galerkin").fit(train, bench, cfg)
        test = holdout_parameters(cfg, bench)
        curve = {int(n): (l2, en) for n, l2, en in nrb_curve(chain, bench.problem, test, [bench.solve_states(m) for m in test])}
    ranks = sorted(curve)
    l2 = [curve[n][0] for n in ranks]
    energy = [curve[n][1] for n in ranks]
    # Galerkin is optimal in the energy norm, so that curve must not rise;
    # the Euclidean curve carries no such guarantee and is only reported
    monotone = all(b <= a + 1e-12 for a, b in zip(energy, energy[1:]))
    l2_monotone = all(b <= a + 1e-12 for a, b in zip(l2, l2[1:]))
    ratio_l2, ratio_energy = curve[5][0] / curve[15][0], curve[5][1] / curve[15][1]
    ok = ratio_l2 >= 10 and ratio_energy >= 10 and monotone and clock.seconds < 120
    detail = (
        f"l2 N=5 {curve[5][0]:.2e} / N=15 {curve[15][0]:.2e} = {ratio_l2:.0f}x, energy ratio {ratio_energy:.0f}x, "
        f"energy curve nonincreasing={monotone}, l2 curve nonincreasing={l2_monotone}, {clock.seconds:.1f}s"
    )
    verdict(2, "Galerkin error ordering", ok, detail)


CAVITY_SPEED = """
[pipeline]
benchmark = cavity
methods = pod+rbf, pod+gpr, pod+ddnn, dmd+rbf, dmd+gpr, dmd+ddnn, ddnn
seed = 5
test_count = 1
[sampling]
count = 6
[fom]
cells = 64
[pod]
rank = 20
[dmd]
rank = 20
[ddnn]
hidden = 8
epochs = 50
"""

DIFFUSION_SPEED = """
[pipeline]
benchmark = diffusion-rb
methods = pod-galerkin, pod+rbf, pod+gpr, pod+ddnn, ddnn
seed = 5
test_count = 3
[sampling]
count = 20
[fom]
cells = 64
[ddnn]
epochs = 200
"""


@pytest.mark.slow
def test_criterion_03_speedup_direction(tmp_path):
    with Clock() as clock:
        reports = {}
        for name, text in (("cavity", CAVITY_SPEED), ("diffusion-rb", DIFFUSION_SPEED)):
            ws = Workspace(tmp_path / name, parse_config(text))
            run_offline(ws)
            run_evaluate(ws)
            reports[name] = {r.method: r.speedup for r in load_reports(ws)}
    need = {"cavity": 100.0, "diffusion-rb": 10.0}
    failures = []
    for bench, speeds in reports.items():
        for method, s in speeds.items():
            bound = 1.5 if method == "pod-galerkin" else need[bench]
            if s < bound:
                failures.append(f"{bench}/{method} {s:.1f}x < {bound}x")
    lows = ", ".join(f"{b} min {min(v for m, v in s.items() if m != 'pod-galerkin'):.0f}x" for b, s in reports.items())
    detail = f"{lows}, pod-galerkin {reports['diffusion-rb']['pod-galerkin']:.0f}x, {clock.seconds:.0f}s"
    if failures:
        detail += "; " + "; ".join(failures)
    verdict(3, "online speedup", not failures and clock.seconds < 600, detail)


def test_criterion_04_dmd_oracle():
    with Clock() as clock:
        rng = np.random.default_rng(4)
        rho, th = 0.97, 0.4
        B = np.zeros((4, 4))
        B[0, 0], B[1, 1] = 0.9, 0.5
        B[2:, 2:] = rho * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        Q, _ = np.linalg.qr(rng.normal(size=(30, 4)))
        A = Q @ B @ Q.T
        X = [Q @ rng.normal(size=4)]
        for _ in range(15):
            X.append(A @ X[-1])
        X = np.array(X)
        dmd = DMD(rank=4).fit(X)
        expected = np.array([0.9, 0.5, rho * np.exp(1j * th), rho * np.exp(-1j * th)])
        eig_err = max(np.min(np.abs(dmd.eigenvalues_ - e)) for e in expected)
        future = dmd.predict(np.arange(16, 26))
        oracle = np.array([np.linalg.matrix_power(A, k) @ X[0] for k in range(16, 26)])
        ext_err = np.max(np.linalg.norm(future - oracle, axis=1) / np.linalg.norm(oracle, axis=1))
    ok = eig_err <= 1e-8 and ext_err <= 1e-6 and clock.seconds < 5
    verdict(4, "DMD oracle equivalence", ok, f"eigenvalue error {eig_err:.1e}, extrapolation error {ext_err:.1e}, {clock.seconds:.2f}s")


def test_criterion_05_gpr_posterior():
    worst = 0.0
    with Clock() as clock:
        rng = np.random.default_rng(5)
        for _ in range(50):
            n, d = rng.integers(3, 15), rng.integers(1, 5)
            X, Xs = rng.uniform(size=(n, d)), rng.uniform(size=(6, d))
            y = rng.normal(size=n)
            s2, ell, noise = rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.0), rng.uniform(1e-2, 0.5)
            mean, cov = GaussianProcess(s2, ell, noise).fit(X, y).predict(Xs, return_cov=True)
            Kinv = np.linalg.inv(squared_exponential(X, X, s2, ell) + noise**2 * np.eye(n))
            Ks = squared_exponential(Xs, X, s2, ell)
            worst = max(worst, np.max(np.abs(mean - Ks @ Kinv @ y)), np.max(np.abs(cov - (squared_exponential(Xs, Xs, s2, ell) - Ks @ Kinv @ Ks.T))))
        X = rng.uniform(size=(10, 2))
        y = np.sin(X @ [3.0, 1.0])
        interp = np.max(np.abs(GaussianProcess(1.0, 0.5, 0.0).fit(X, y).predict(X) - y))
    ok = worst <= 1e-10 and interp <= 1e-8 and clock.seconds < 30
    verdict(5, "GPR posterior vs dense oracle", ok, f"max deviation {worst:.1e}, noise-free node error {interp:.1e}, {clock.seconds:.2f}s")


def _fd_rel_error(net, X, G, h=1e-6):
    out, cache = net.forward(X, return_cache=True)
    analytic = flatten_grads(*net.backward(cache, G))
    theta = net.get_flat()
    probe = net.copy()
    fd = np.zeros_like(theta)
    for i in range(theta.size):
        t = theta.copy()
        t[i] += h
        probe.set_flat(t)
        up = np.sum(probe.forward(X) * G)
        t[i] -= 2 * h
        probe.set_flat(t)
        fd[i] = (up - np.sum(probe.forward(X) * G)) / (2 * h)
    return np.linalg.norm(analytic - fd) / np.linalg.norm(fd)


def test_criterion_06_neural_gradients_and_pinn():
    from test_neural import _poisson_problem

    with Clock() as clock:
        rng = np.random.default_rng(6)
        worst = 0.0
        for k in range(20):
            sizes = [int(rng.integers(1, 5))] + list(rng.integers(2, 8, size=rng.integers(1, 4))) + [int(rng.integers(1, 4))]
            net = Mlp.init(sizes, "tanh", seed=k)
            X = rng.normal(size=(5, sizes[0]))
            worst = max(worst, _fd_rel_error(net, X, rng.normal(size=(5, sizes[-1]))))
        model = PINN((20, 20), learning_rate=1e-2, epochs=2000, n_interior=64, n_boundary=2, seed=0).fit(_poisson_problem())
        x = np.linspace(0, 1, 201)[:, None]
        exact = x[:, 0] ** 2 - x[:, 0]
        pinn_err = np.linalg.norm(model.predict(x)[:, 0] - exact) / np.linalg.norm(exact)
    ok = worst <= 1e-5 and pinn_err <= 5e-2 and clock.seconds < 180
    verdict(6, "neural gradients and PINN", ok, f"max gradient error {worst:.1e}, PINN L2 error {pinn_err:.1e}, {clock.seconds:.1f}s")


def test_criterion_07_active_subspace():
    with Clock() as clock:
        rng = np.random.default_rng(7)
        w = rng.normal(size=10)
        w /= np.linalg.norm(w)
        X = rng.uniform(-1, 1, size=(200, 10))
        # f(x) = exp(0.7 w.x): gradient 0.7 exp(0.7 w.x) w
        grads = (0.7 * np.exp(0.7 * X @ w))[:, None] * w[None, :]
        asub = ActiveSubspace(1).fit(grads)
        ratio = asub.eigenvalues_[1] / asub.eigenvalues_[0]
        align = abs(asub.W_[:, 0] @ w)
    ok = ratio <= 1e-12 and align >= 1 - 1e-8 and clock.seconds < 5
    verdict(7, "active subspace recovery", ok, f"lambda2/lambda1 {ratio:.1e}, alignment 1-{1 - align:.1e}, {clock.seconds:.2f}s")


def test_criterion_08_ffd_invariants():
    with Clock() as clock:
        rng = np.random.default_rng(8)
        lat = FfdLattice(np.array([-0.5, 0.0, 0.2]), np.array([2.0, 1.0, 1.5]), (3, 2, 4))
        pts = lat.origin + rng.uniform(-0.2, 1.2, size=(500, 3)) * lat.extents
        identity = np.array_equal(lat.morph(pts), pts)
        pou = np.max(np.abs(lat.weights(rng.uniform(size=(500, 3))).sum(axis=(1, 2, 3)) - 1.0))
        A = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
        b = rng.normal(size=3)
        P = lat.control_points()
        affine = FfdLattice(lat.origin, lat.extents, lat.degrees, displacements=P @ A.T + b - P)
        inside = lat.origin + rng.uniform(size=(500, 3)) * lat.extents
        aff_err = np.max(np.abs(affine.morph(inside) - (inside @ A.T + b)))
        planar = FfdLattice.planar((-0.05, -0.05), (1.1, 1.1), (2, 2))
        try:
            morph_mesh(from_parameters(planar, [2.0, 0.0]), unit_square_mesh(6))
            detected = False
        except InvalidMeshError:
            detected = True
        _, report = morph_mesh(from_parameters(planar, [0.1, -0.1]), unit_square_mesh(6))
        detected = detected and report["min_quality"] > 0
    ok = identity and pou <= 1e-14 and aff_err <= 1e-12 and detected and clock.seconds < 5
    verdict(8, "FFD invariants", ok, f"identity bitwise={identity}, unity {pou:.1e}, affine {aff_err:.1e}, inversion detected={detected}, {clock.seconds:.2f}s")


def test_criterion_09_fom_verification():
    with Clock() as clock:
        fom = CavityFOM(CavityConfig(cells=64))
        _, _, divs = fom.run(0.01)
        div = float(np.max(divs))
        h, e = diffusion_errors()
        diff_orders = observed_orders(h, e)
        h, e = poisson_errors("disk")
        pois_orders = observed_orders(h, e)
    orders_ok = np.all(np.abs(np.concatenate([diff_orders, pois_orders]) - 2.0) <= 0.1)
    ok = div <= 1e-8 and orders_ok and clock.seconds < 300
    detail = (
        f"max divergence {div:.1e} over {len(divs)} snapshots, diffusion orders {np.round(diff_orders, 3).tolist()}, "
        f"morphed Poisson orders {np.round(pois_orders, 3).tolist()}, {clock.seconds:.1f}s"
    )
    verdict(9, "FOM verification", ok, detail)


def _golden_run(root):
    cfg = parse_config((DATA / "golden_diffusion.ini").read_text())
    ws = Workspace(root, cfg)
    run_offline(ws)
    run_evaluate(ws)
    run_report(ws)
    return (root / "errors.csv").read_bytes()


def test_criterion_10_golden_run(tmp_path):
    golden = DATA / "golden_errors.csv"
    with Clock() as clock:
        first = _golden_run(tmp_path / "a")
        shutil.rmtree(tmp_path / "a")
        second = _golden_run(tmp_path / "b")
    stored = golden.read_bytes() if golden.exists() else b""
    ok = first == second == stored and clock.seconds < 180
    verdict(10, "golden diffusion run", ok, f"bitwise match stored={first == stored}, rerun={first == second}, {clock.seconds:.1f}s")
