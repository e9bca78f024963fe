"""Lid-driven cavity on a staggered (MAC) grid with Chorin projection.

Each step: explicit donor-cell/central blended advection, backward-Euler
diffusion, pressure Poisson solve and velocity correction. The unit square
has no-slip walls and a lid moving with velocity ``(lid, 0)`` at ``y = 1``.
States are cell-centered ``(u, v)`` stacked as ``[u.ravel(), v.ravel()]``
with index ``[i, j]`` = (x cell, y cell).
"""
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..dataset import ParameterSpace, SnapshotSet
from ..exceptions import ConfigError, NumericalError


@dataclass(frozen=True)
class CavityConfig:
    cells: int = 64
    dt: float = 0.005
    final_time: float = 10.0
    n_snapshots: int = 100
    lid: float = 1.0
    upwind: float = None  # donor-cell blend; None picks it from the CFL number
    pressure_solver: str = "direct"  # or "cg"
    nu_lower: float = 0.001
    nu_upper: float = 0.01

    def __post_init__(self):
        if self.cells < 2 or self.dt <= 0 or self.final_time <= 0:
            raise ConfigError("cavity needs cells >= 2, dt > 0 and final_time > 0")
        steps = self.final_time / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError("final_time must be a multiple of dt")
        if round(steps) % self.n_snapshots:
            raise ConfigError(f"{round(steps)} steps cannot be split into {self.n_snapshots} snapshots")
        if self.pressure_solver not in ("direct", "cg"):
            raise ConfigError(f"unknown pressure solver {self.pressure_solver!r}")

    @property
    def n_steps(self):
        return int(round(self.final_time / self.dt))

    @property
    def stride(self):
        return self.n_steps // self.n_snapshots


def _second_difference(n, ends):
    """1-D ``[1, -2, 1]`` with the diagonal at both ends set to ``ends``."""
    main = np.full(n, -2.0)
    main[0] = main[-1] = ends
    if n == 1:
        main[0] = 2 * ends + 2.0 if ends != -2.0 else -2.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


class CavityFOM:
    """Lid-driven cavity solver parametrised by the kinematic viscosity."""

    name = "cavity"

    def __init__(self, config=CavityConfig()):
        self.config = config
        n = config.cells
        self.h = 1.0 / n
        h2 = self.h**2
        # u unknowns: interior x-faces (n-1) x n rows; ghost reflection in y
        self.Lu = (sp.kron(_second_difference(n - 1, -2.0), sp.eye(n)) + sp.kron(sp.eye(n - 1), _second_difference(n, -3.0))) / h2
        self.Lv = (sp.kron(_second_difference(n, -3.0), sp.eye(n - 1)) + sp.kron(sp.eye(n), _second_difference(n - 1, -2.0))) / h2
        Lp = (sp.kron(_second_difference(n, -1.0), sp.eye(n)) + sp.kron(sp.eye(n), _second_difference(n, -1.0))) / h2
        # pressure is defined up to a constant: pin cell 0
        self.Lp = Lp.tocsc()[1:, 1:]
        self._p_lu = spla.splu(self.Lp) if config.pressure_solver == "direct" else None
        self._p_diag = self.Lp.diagonal()
        self._cache_nu = None

    @property
    def dof(self):
        return 2 * self.config.cells**2

    def parameter_space(self):
        return ParameterSpace([self.config.nu_lower], [self.config.nu_upper], ("nu",))

    def _diffusion_solvers(self, nu):
        if self._cache_nu != nu:
            dt = self.config.dt
            Mu = (sp.eye(self.Lu.shape[0]) - nu * dt * self.Lu).tocsc()
            Mv = (sp.eye(self.Lv.shape[0]) - nu * dt * self.Lv).tocsc()
            self._diff = (spla.splu(Mu), spla.splu(Mv))
            self._cache_nu = nu
        return self._diff

    def _pressure(self, rhs):
        if self._p_lu is not None:
            return self._p_lu.solve(rhs)
        M = sp.diags(1.0 / self._p_diag)
        phi, info = spla.cg(self.Lp, rhs, rtol=1e-10, atol=0.0, maxiter=20 * len(rhs), M=M)
        if info != 0:
            raise NumericalError(f"pressure CG did not converge (info={info}, max iterations {20 * len(rhs)})")
        return phi

    def divergence(self, u, v):
        return (u[1:, :] - u[:-1, :]) / self.h + (v[:, 1:] - v[:, :-1]) / self.h

    def _advection(self, u, v, gamma):
        n, h, U = self.config.cells, self.h, self.config.lid
        ue = np.empty((n + 1, n + 2))
        ue[:, 1:-1] = u
        ue[:, 0] = -u[:, 0]
        ue[:, -1] = 2 * U - u[:, -1]
        ve = np.empty((n + 2, n + 1))
        ve[1:-1] = v
        ve[0] = -v[0]
        ve[-1] = -v[-1]

        uc, uE, uW = u[1:n], u[2:], u[: n - 1]
        uN, uS = ue[1:n, 2:], ue[1:n, :n]
        vN = 0.5 * (v[: n - 1, 1:] + v[1:, 1:])
        vS = 0.5 * (v[: n - 1, :n] + v[1:, :n])
        aE, aW = 0.5 * (uc + uE), 0.5 * (uW + uc)
        du2dx = (aE**2 - aW**2 + gamma * (np.abs(aE) * 0.5 * (uc - uE) - np.abs(aW) * 0.5 * (uW - uc))) / h
        duvdy = (vN * 0.5 * (uc + uN) - vS * 0.5 * (uS + uc) + gamma * (np.abs(vN) * 0.5 * (uc - uN) - np.abs(vS) * 0.5 * (uS - uc))) / h

        vc, vNn, vSs = v[:, 1:n], v[:, 2:], v[:, : n - 1]
        vE, vW = ve[2:, 1:n], ve[:n, 1:n]
        uEa = 0.5 * (u[1:, : n - 1] + u[1:, 1:])
        uWa = 0.5 * (u[:n, : n - 1] + u[:n, 1:])
        bN, bS = 0.5 * (vc + vNn), 0.5 * (vSs + vc)
        dv2dy = (bN**2 - bS**2 + gamma * (np.abs(bN) * 0.5 * (vc - vNn) - np.abs(bS) * 0.5 * (vSs - vc))) / h
        duvdx = (uEa * 0.5 * (vc + vE) - uWa * 0.5 * (vW + vc) + gamma * (np.abs(uEa) * 0.5 * (vc - vE) - np.abs(uWa) * 0.5 * (vW - vc))) / h
        return du2dx + duvdy, duvdx + dv2dy

    def run(self, nu, record_divergence=False):
        """Integrate from rest; returns ``(snapshots (dof x K), times, max divergences)``."""
        if nu <= 0:
            raise ConfigError(f"viscosity must be positive, got {nu}")
        cfg, n, h = self.config, self.config.cells, self.h
        dt = cfg.dt
        solve_u, solve_v = self._diffusion_solvers(float(nu))
        u = np.zeros((n + 1, n))
        v = np.zeros((n, n + 1))
        lid_rhs = np.zeros((n - 1, n))
        lid_rhs[:, -1] = 2 * cfg.lid / h**2 * nu * dt
        lid_rhs = lid_rhs.ravel()
        snaps, times, divs = [], [], []
        for step in range(1, cfg.n_steps + 1):
            vmax = max(np.max(np.abs(u)), np.max(np.abs(v)), abs(cfg.lid))
            cfl = vmax * dt / h
            if cfl > 1.0:
                raise NumericalError(f"CFL condition violated at step {step}: {cfl:.3f} > 1")
            gamma = cfg.upwind if cfg.upwind is not None else min(1.0, 1.2 * cfl)
            adv_u, adv_v = self._advection(u, v, gamma)
            ustar = solve_u.solve((u[1:n] - dt * adv_u).ravel() + lid_rhs).reshape(n - 1, n)
            vstar = solve_v.solve((v[:, 1:n] - dt * adv_v).ravel()).reshape(n, n - 1)
            u[1:n] = ustar
            v[:, 1:n] = vstar
            div = self.divergence(u, v)
            phi = np.zeros(n * n)
            phi[1:] = self._pressure(div.ravel()[1:] / dt)
            phi = phi.reshape(n, n)
            u[1:n] -= dt * (phi[1:] - phi[:-1]) / h
            v[:, 1:n] -= dt * (phi[:, 1:] - phi[:, :-1]) / h
            if not np.all(np.isfinite(u)):
                raise NumericalError(f"cavity solution blew up at step {step}")
            if step % cfg.stride == 0:
                uc = 0.5 * (u[1:] + u[:-1])
                vc = 0.5 * (v[:, 1:] + v[:, :-1])
                snaps.append(np.concatenate([uc.ravel(), vc.ravel()]))
                times.append(step * dt)
                divs.append(float(np.max(np.abs(self.divergence(u, v)))))
        return np.column_stack(snaps), np.array(times), np.array(divs)

    def solve(self, nu):
        nu = float(np.atleast_1d(nu)[0])
        S, t, divs = self.run(nu)
        if np.max(divs) > 1e-8:
            raise NumericalError(f"post-projection divergence {np.max(divs):.3e} exceeds 1e-8")
        return S

    def timed_solve(self, nu):
        t0 = time.perf_counter()
        S = self.solve(nu)
        return S, time.perf_counter() - t0

    def times(self):
        return self.config.dt * self.config.stride * np.arange(1, self.config.n_snapshots + 1)

    def snapshots(self, nus):
        nus = np.atleast_2d(np.asarray(nus, dtype=float).reshape(-1, 1))
        sets = []
        for nu in nus:
            S = self.solve(nu[0])
            K = S.shape[1]
            sets.append(SnapshotSet(S, np.repeat(nu[None], K, axis=0), self.times(), {"field": "velocity", "fom": "cavity-mac"}))
        return SnapshotSet.concatenate(sets)

    def split_components(self, state):
        n = self.config.cells
        return state[: n * n].reshape(n, n), state[n * n :].reshape(n, n)
