"""Exception hierarchy shared by the fitting, simulation and I/O layers."""


class SivError(Exception):
    """Base class for all package errors."""


class NonConvergence(SivError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingularJacobian(SivError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


class DegenerateData(SivError):
    pass


class ValidationError(SivError):
    """A configuration or input value violates a documented invariant."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigParseError(SivError):
    def __init__(self, message, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line


class SchemaError(SivError):
    pass


class ProtocolError(SivError):
    pass


class StepUnderflow(SivError):
    """The adaptive macro-step shrank below its floor."""
