"""Surrogate-accelerated uncertainty quantification for time-series
simulators: PCA output reduction, sparse polynomial chaos emulation,
coefficient-based Sobol sensitivity analysis (including time-variant
indices of the reconstructed series), and Bayesian calibration with
blocked random-walk Metropolis under two error models.
"""

from . import calib, config, doe, io, kernels, pca, pce, polybasis, sampling
from . import simulators, sobol
from .kernels import NUMBA_ENABLED

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "calib",
    "config",
    "doe",
    "io",
    "kernels",
    "pca",
    "pce",
    "polybasis",
    "sampling",
    "simulators",
    "sobol",
    "__version__",
]
