"""romkit: reduced-order models with an offline/online pipeline."""
from .dataset import Normalizer, ParameterSpace, SamplingPlan, SnapshotSet, sample, split_train_test
from .dmd import DMD
from .kernel_regression import GaussianProcess, RBFInterpolator, select_hyperparams
from .neural import DDNNRegressor, Mlp, PINN, PinnProblem
from .reduction import POD, ActiveSubspace

__version__ = "0.1.0"

__all__ = [
    "ActiveSubspace",
    "DDNNRegressor",
    "DMD",
    "GaussianProcess",
    "Mlp",
    "Normalizer",
    "ParameterSpace",
    "PINN",
    "POD",
    "PinnProblem",
    "RBFInterpolator",
    "SamplingPlan",
    "SnapshotSet",
    "sample",
    "select_hyperparams",
    "split_train_test",
]
