"""Poisson-logit (Pogit) models for under-reported count data."""

__version__ = "0.1.0"

from .constraints import (
    Bound,
    CoefficientPrior,
    GaussianPrior,
    LinearInequality,
    PredictorPrior,
    Shape,
    Sign,
)
from .data import Dataset, read_csv, write_csv
from .design import Design, Intercept, Linear, Spline
from .diagnose import ComparisonReport, aic, identifiability_check, lrt, oracle_protocol
from .estimate import FitOptions, FitResult, fit, fit_poisson
from .estimator import PogitRegressor
from .exceptions import (
    ConfigError,
    DomainError,
    InfeasibleConstraintsError,
    NumericalOverflowError,
    OrderingError,
    PogitError,
    ProtocolError,
    RankDeficiencyError,
    SchemaError,
    SplineSpecError,
)
from .model import Link, ParameterVector, PogitSpec, gradient, hessian, neg_log_likelihood, predict
from .simulate import SweepConfig, SyntheticConfig, generate_pogit, generate_setting, run_sweep, run_synthetic
from .splines import SplineSpec, build_basis, first_derivative_map, second_derivative_map
from .theory import TwoCovariateSetting, constant_c_bound, crlb, fisher_information_mc
from .uq import Intervals, SandwichCovariance, intervals, sandwich

__all__ = [name for name in dir() if not name.startswith("_")]
