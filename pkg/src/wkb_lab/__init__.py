"""Numerical laboratory for noise-interpolating diffusion samplers.

The package trains small score models on 2-D toy data, generates samples
through a one-parameter family of reverse processes (from the deterministic
probability-flow ODE up to the fully stochastic reverse SDE), and evaluates
log-likelihoods including the first-order correction in the noise-strength
parameter, with propagated numerical error bounds.  A fully analytic
Gaussian model provides ground truth for every numerical claim.
"""

from .schedule import Schedule, ScheduleKind
from .score import AnalyticGaussianScore, MlpScore
from .data import PointCloud

__all__ = [
    "Schedule",
    "ScheduleKind",
    "AnalyticGaussianScore",
    "MlpScore",
    "PointCloud",
]
