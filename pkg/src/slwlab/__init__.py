"""Numerical laboratory for semilinear wave equations with derivative nonlinearities."""

from .model import ModelParams, Sign, derive_exponents, eval_nonlinearity, full_exponents

__all__ = ["ModelParams", "Sign", "derive_exponents", "eval_nonlinearity", "full_exponents"]
