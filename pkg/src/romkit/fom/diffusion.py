"""Affine parametric diffusion (thermal block) on the unit square.

``-div(kappa(x; mu) grad u) = f`` with ``u = 0`` on the boundary and
``kappa = sum_i theta_i(mu) 1_{block i}``, discretised with P1 elements on
a structured triangulation aligned with the blocks.
"""
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from ..dataset import ParameterSpace, SnapshotSet
from ..exceptions import ConfigError, NumericalError
from ..galerkin import AffineProblem, THETA_REGISTRY
from . import mesh as fem


@dataclass(frozen=True)
class DiffusionConfig:
    cells: int = 64
    blocks: tuple = (2, 2)
    coloring: str = "independent"  # or "checkerboard" (two colors)
    theta: str = "fixed_first"
    forcing: float = 1.0
    mu_lower: float = 0.1
    mu_upper: float = 10.0

    def __post_init__(self):
        bx, by = self.blocks
        if self.cells < 2 or self.cells % bx or self.cells % by:
            raise ConfigError(f"cells={self.cells} must be divisible by the block counts {self.blocks}")
        if self.coloring not in ("independent", "checkerboard"):
            raise ConfigError(f"unknown coloring {self.coloring!r}")
        if self.theta not in THETA_REGISTRY:
            raise ConfigError(f"unknown theta function {self.theta!r}")

    @property
    def n_terms(self):
        bx, by = self.blocks
        return 2 if self.coloring == "checkerboard" else bx * by

    @property
    def n_params(self):
        return {"identity": self.n_terms, "fixed_first": self.n_terms - 1, "one": 0}[self.theta]


class DiffusionFOM:
    """Full-order thermal block solver exposing its affine decomposition."""

    name = "diffusion"

    def __init__(self, config=DiffusionConfig(), forcing=None):
        self.config = config
        self.mesh = fem.unit_square_mesh(config.cells)
        cent = self.mesh.xy[self.mesh.triangles].mean(axis=1)
        bx, by = config.blocks
        ix = np.minimum((cent[:, 0] * bx).astype(int), bx - 1)
        iy = np.minimum((cent[:, 1] * by).astype(int), by - 1)
        block = (ix + iy) % 2 if config.coloring == "checkerboard" else iy * bx + ix
        self.element_block = block

        boundary = self.mesh.boundary_vertices()
        interior = np.setdiff1d(np.arange(len(self.mesh.vertices)), boundary)
        self.interior = interior
        ops = []
        for b in range(config.n_terms):
            K = fem.stiffness(self.mesh, (block == b).astype(float))
            ops.append(K[interior][:, interior])
        f = forcing if forcing is not None else (lambda p: np.full(p.shape[0], config.forcing))
        F = fem.load_vector(self.mesh, f)[interior]
        # smallest eigenvalue of the unit-coefficient operator: coercivity constant
        total = sum(ops).tocsc()
        self.unit_coercivity = float(spla.eigsh(total, k=1, sigma=0, which="LM", return_eigenvectors=False)[0])
        theta = config.theta

        def alpha_lb(mu):
            ta = THETA_REGISTRY[theta](mu)
            return float(np.min(ta)) * self.unit_coercivity

        self.problem = AffineProblem(ops, theta, [F], "one", alpha_lb, name="thermal-block")

    @property
    def dof(self):
        return self.problem.n_dofs

    def parameter_space(self):
        p = self.config.n_params
        return ParameterSpace(np.full(p, self.config.mu_lower), np.full(p, self.config.mu_upper))

    def solve(self, mu):
        ta, _ = self.problem.coefficients(mu)
        if np.any(ta <= 0):
            raise NumericalError(f"block conductivities must be positive, got {ta} at mu={mu}")
        return self.problem.solve(mu)

    def timed_solve(self, mu):
        """Solution plus wall time, the operator recombination included."""
        t0 = time.perf_counter()
        u = self.solve(mu)
        return u, time.perf_counter() - t0

    def full_field(self, u):
        out = np.zeros(len(self.mesh.vertices))
        out[self.interior] = u
        return out

    def snapshots(self, mus):
        mus = np.atleast_2d(mus)
        cols = [self.solve(mu) for mu in mus]
        return SnapshotSet(np.column_stack(cols), mus, None, {"field": "u", "fom": "thermal-block-p1", "cells": self.config.cells})
