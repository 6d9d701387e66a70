"""Nonparametric theta-smoothing Newton method for complementarity problems."""

from .baselines import (BaselineConfig, BaselineMethod, fb_solve, ipm_solve, newton_min_solve,
                        projection_solve, projection_sweep)
from .bench import ConfigurationError, ProfileCurve, RunRecord, performance_profile, run_suite
from .metrics import feas_metric, opt_metric
from .problems import NcpProblem, get_problem
from .smoothing import ThetaKernel
from .solver import SolveReport, SolverConfig, SolveStatus, solve

__version__ = "0.1.0"
