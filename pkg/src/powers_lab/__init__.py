"""Numerical workbench for group-ring convolution operators on sequence spaces."""

from __future__ import annotations

from .errors import (
    BudgetExceeded,
    ConstructionFailure,
    DomainError,
    InvalidFunction,
    PowersLabError,
    UsageError,
    VerificationFailure,
)
from .group_algebra import AlgebraElement, PowersSchedule, default_free_schedule, parse_element, powers_average
from .group_core import GroupSpec, Word
from .op_norms import NormBracket, bpstar_bracket, l2_bracket_trace, norm_bracket, ratio_estimate_l2
from .orlicz_builder import interpolation_pipeline
from .seq_norms import FinVector, NormSpec

__version__ = "0.1.0"

__all__ = [
    "AlgebraElement",
    "BudgetExceeded",
    "ConstructionFailure",
    "DomainError",
    "FinVector",
    "GroupSpec",
    "InvalidFunction",
    "NormBracket",
    "NormSpec",
    "PowersLabError",
    "PowersSchedule",
    "UsageError",
    "VerificationFailure",
    "Word",
    "bpstar_bracket",
    "default_free_schedule",
    "interpolation_pipeline",
    "l2_bracket_trace",
    "norm_bracket",
    "parse_element",
    "powers_average",
    "ratio_estimate_l2",
]
