"""Exception hierarchy.

Input problems (bad expressions, violated hypotheses) derive from
``InputError``; failures of a numerical routine derive from
``NumericalError``. The CLI maps the two to exit statuses 1 and 2.
"""


class NddeError(Exception):
    """Base class for every error raised by this package."""


class InputError(NddeError):
    pass


class NumericalError(NddeError):
    pass


class ParseError(InputError):
    def __init__(self, message: str, offset: int, text: str = ""):
        self.message = message
        self.offset = offset
        self.text = text
        super().__init__(f"{message} (at offset {offset})")


class ExprDomainError(NumericalError):
    """Evaluation left the domain of an elementary function."""

    def __init__(self, message: str, offset: int = -1, t: float | None = None):
        self.offset = offset
        self.t = t
        where = f" at offset {offset}" if offset >= 0 else ""
        at_t = f" for t={t!r}" if t is not None else ""
        super().__init__(f"{message}{where}{at_t}")


class NotDifferentiableError(InputError):
    pass


class ValidationError(InputError):
    def __init__(self, message: str, name: str = "", t: float | None = None):
        self.name = name
        self.t = t
        parts = [message]
        if name:
            parts.append(f"[{name}]")
        if t is not None:
            parts.append(f"at t={t!r}")
        super().__init__(" ".join(parts))


class PreconditionError(InputError):
    pass


class BracketError(NumericalError):
    pass


class DegenerateError(NumericalError):
    pass


class NonFiniteError(NumericalError):
    pass


class MaxDepthError(NumericalError):
    pass


class DivZeroError(NumericalError):
    pass


class RMinError(InputError):
    pass


class BlowupError(NumericalError):
    pass
