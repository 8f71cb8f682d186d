"""Exception hierarchy.

Two families matter to the CLI: :class:`ValidationError` (bad input, exit 1)
and :class:`NumericalFault` (a computation could not be carried out, exit 2).
"""


class ChernfieldError(Exception):
    pass


class ValidationError(ChernfieldError, ValueError):
    pass


class NumericalFault(ChernfieldError, ArithmeticError):
    pass


class DimensionError(ValidationError):
    """Operands of mismatched rank or length."""


class ExpressionSyntaxError(ValidationError):
    def __init__(self, message, text="", column=None):
        self.text = text
        self.column = column
        if column is not None:
            message = f"{message} (column {column + 1}): {text!r}"
        super().__init__(message)


class EvaluationError(NumericalFault):
    """An expression could not be evaluated (division by zero, log of a non-positive real)."""

    def __init__(self, message, entry=None):
        self.entry = entry
        if entry is not None:
            message = f"entry h{entry[0] + 1}{entry[1] + 1}: {message}"
        super().__init__(message)


class StencilError(NumericalFault):
    """Finite-difference stencil leaves a non-periodic patch."""


class IllConditionedError(NumericalFault):
    pass


class IntegrationAborted(NumericalFault):
    pass


class NotInPositiveCone(ValidationError):
    pass
