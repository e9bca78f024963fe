"""Manufactured-solution drivers shared by the FOM and acceptance tests."""
import numpy as np

from romkit.fom import mesh as fem
from romkit.fom.diffusion import DiffusionConfig, DiffusionFOM
from romkit.fom.poisson import MorphedPoissonConfig, MorphedPoissonFOM


def observed_orders(hs, errors):
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


def diffusion_errors(cells=(16, 32, 64)):
    """L2 errors for u = sin(pi x) sin(pi y) with unit conductivity."""
    exact = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])  # noqa: E731
    forcing = lambda p: 2 * np.pi**2 * exact(p)  # noqa: E731
    errs = []
    for n in cells:
        fom = DiffusionFOM(DiffusionConfig(cells=n, blocks=(2, 2), theta="identity"), forcing=forcing)
        u = fom.full_field(fom.solve(np.ones(4)))
        errs.append(fem.l2_error(fom.mesh, u, exact))
    return [1.0 / n for n in cells], errs


def harmonic(p, center=None):
    return np.exp(p[:, 0]) * np.cos(p[:, 1])


def poisson_errors(domain="disk", resolutions=(16, 32, 64), mu=(0.2, -0.15)):
    """L2 errors on a morphed domain for the harmonic solution e^x cos y."""
    errs, hs = [], []
    for n in resolutions:
        cfg = MorphedPoissonConfig(
            domain=domain, resolution=n, source=lambda p, c: np.zeros(len(p)), dirichlet=harmonic
        )
        fom = MorphedPoissonFOM(cfg)
        mesh = fom.domain(np.array(mu))
        errs.append(fem.l2_error(mesh, fom.solve_on(mesh), harmonic))
        hs.append(1.0 / n)
    return hs, errs
