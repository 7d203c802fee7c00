"""Python bindings for the vrpg policy-gradient library."""

from ._core import (
    ArgumentError,
    ConfigError,
    NumericError,
    ParseError,
    ValidationError,
    algorithms,
    exact_gradient,
    exact_value,
    recommended_hyperparams,
    run,
    suites,
    theory_constants,
    train,
    verify,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "NumericError",
    "ParseError",
    "ValidationError",
    "algorithms",
    "exact_gradient",
    "exact_value",
    "recommended_hyperparams",
    "run",
    "suites",
    "theory_constants",
    "train",
    "verify",
]
