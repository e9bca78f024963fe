"""Poisson problem on an FFD-morphed triangulated domain.

``Laplace(u) = exp(-|x - x_n|^2)`` in the morphed domain with
``u = exp(-|x - x_n|)`` on its boundary, ``x_n`` being the barycenter of
the morphed mesh. Linear elements; states are nodal values on every vertex.
"""
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from ..dataset import ParameterSpace, SnapshotSet
from ..exceptions import ConfigError, NumericalError
from ..ffd import FfdLattice, from_parameters, morph_mesh
from . import mesh as fem


def gaussian_source(points, center):
    return np.exp(-np.sum((points - center) ** 2, axis=1))


def exponential_boundary(points, center):
    return np.exp(-np.sqrt(np.sum((points - center) ** 2, axis=1)))


@dataclass
class MorphedPoissonConfig:
    domain: str = "disk"  # or "square"
    resolution: int = 18  # rings for the disk, cells per side for the square
    lattice: Optional[FfdLattice] = None
    mu_bound: float = 0.4
    source: Callable = gaussian_source
    dirichlet: Callable = exponential_boundary

    def reference_mesh(self):
        if self.domain == "disk":
            return fem.disk_mesh(self.resolution)
        if self.domain == "square":
            return fem.unit_square_mesh(self.resolution)
        raise ConfigError(f"unknown domain {self.domain!r}")

    def template(self):
        if self.lattice is not None:
            return self.lattice
        if self.domain == "disk":
            return FfdLattice.planar((-1.1, -1.1), (2.2, 2.2), (2, 2))
        return FfdLattice.planar((-0.05, -0.05), (1.1, 1.1), (2, 2))


class MorphedPoissonFOM:
    name = "morphed-poisson"

    def __init__(self, config=None):
        self.config = config or MorphedPoissonConfig()
        self.reference = self.config.reference_mesh()
        self.template = self.config.template()

    @property
    def dof(self):
        return len(self.reference.vertices)

    def parameter_space(self):
        p = self.template.n_parameters
        return ParameterSpace(np.full(p, -self.config.mu_bound), np.full(p, self.config.mu_bound))

    def domain(self, mu):
        """Morphed mesh at ``mu`` (raises on inverted elements)."""
        lattice = from_parameters(self.template, mu)
        morphed, _ = morph_mesh(lattice, self.reference)
        return morphed

    def solve_on(self, mesh):
        center = mesh.barycenter()
        K = fem.stiffness(mesh)
        F = fem.load_vector(mesh, lambda p: self.config.source(p, center))
        bnd = mesh.boundary_vertices()
        inner = np.setdiff1d(np.arange(len(mesh.vertices)), bnd)
        u = np.zeros(len(mesh.vertices))
        u[bnd] = self.config.dirichlet(mesh.xy[bnd], center)
        # weak form of Laplace(u) = f: K u = -F
        rhs = -F[inner] - K[inner][:, bnd] @ u[bnd]
        A = K[inner][:, inner].tocsc()
        u[inner] = spla.spsolve(A, rhs)
        res = np.linalg.norm(A @ u[inner] - rhs)
        if res > 1e-10 * (np.linalg.norm(rhs) + spla.norm(A, np.inf) * np.linalg.norm(u[inner])):
            raise NumericalError(f"Poisson solve residual {res:.3e} too large")
        return u

    def solve(self, mu):
        return self.solve_on(self.domain(mu))

    def timed_solve(self, mu):
        t0 = time.perf_counter()
        u = self.solve(mu)
        return u, time.perf_counter() - t0

    def snapshots(self, mus):
        mus = np.atleast_2d(mus)
        return SnapshotSet(
            np.column_stack([self.solve(mu) for mu in mus]), mus, None, {"field": "u", "fom": "morphed-poisson-p1"}
        )
