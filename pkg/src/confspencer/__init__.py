"""Conformal tensor calculus, jet gauge potentials and their verification suites."""

__version__ = "0.1.0"

from . import jets, taylor, curvature, conformal, diffeo, jet_gauge, algebra, anyon  # noqa: E402,F401
from ._kernels import backend  # noqa: E402,F401
