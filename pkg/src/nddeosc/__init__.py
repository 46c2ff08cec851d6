"""Numerical oscillation criteria for neutral delay differential equations."""

from .criteria import AnalysisReport, CriterionReport, Verdict, analyze_all
from .errors import InputError, NddeError, NumericalError
from .expr import parse
from .model import AnalysisConfig, NddeProblem, build_problem
from .simulate import History, Trajectory, classify, detect_zeros, integrate_ndde, y_transform

__all__ = [
    "AnalysisConfig", "AnalysisReport", "CriterionReport", "History", "InputError", "NddeError",
    "NddeProblem", "NumericalError", "Trajectory", "Verdict", "analyze_all", "build_problem",
    "classify", "detect_zeros", "integrate_ndde", "parse", "y_transform",
]
