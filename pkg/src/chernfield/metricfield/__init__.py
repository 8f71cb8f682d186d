from .derivatives import (
    DEFAULT_STEP,
    SLOTS,
    Jet,
    SecondDerivativeBlock,
    axis_steps,
    metric_jet,
    real_jet,
    second_derivative_block,
    wirtinger_derivative,
)
from .expr import Expression, parse
from .metric import MODES, HermitianMetricField, Patch
from .pattern import BlockResult, PatternReport, flatness_pattern_report

__all__ = [
    "DEFAULT_STEP",
    "SLOTS",
    "MODES",
    "Expression",
    "parse",
    "HermitianMetricField",
    "Patch",
    "Jet",
    "SecondDerivativeBlock",
    "axis_steps",
    "metric_jet",
    "real_jet",
    "second_derivative_block",
    "wirtinger_derivative",
    "BlockResult",
    "PatternReport",
    "flatness_pattern_report",
]
