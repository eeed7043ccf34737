"""Parameter estimation and sensitivity limits."""
from .fitting import (
    FitProblem, FitResult, FreeParameter, KINDS, PARAMETER_NAMES, derived_values, fit,
    fit_two_process, model_values, residual_function, timeseries_problem,
    velocity_map_problem)
from .lm import LMResult, central_jacobian, levenberg_marquardt
from .sensitivity import SensitivityReport, position_noise, sensitivity
