from typing import Any, FrozenSet, Iterable, Optional


class FormflowError(Exception): pass
class DimensionMismatchError(FormflowError, ValueError): pass
class DegreeError(FormflowError, ValueError): pass
class UnsupportedDegreeError(FormflowError, NotImplementedError): pass
class PreconditionError(FormflowError, ValueError): pass
class ConfigError(FormflowError, ValueError): pass


class ExpressionSyntaxError(FormflowError, ValueError):
    def __init__(self, message: str, offset: int, expected: Optional[Iterable[str]] = None):
        self.offset = offset
        self.expected: FrozenSet[str] = frozenset(expected or ())
        if self.expected:
            message = f"{message} at byte {offset}; expected one of {sorted(self.expected)}"
        else:
            message = f"{message} at byte {offset}"
        super().__init__(message)


class UnknownFunctionError(ExpressionSyntaxError): pass
class DslSyntaxError(ExpressionSyntaxError): pass


class UnboundVariableError(FormflowError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable '{name}'")

    def __str__(self) -> str:
        return self.args[0]


class DomainViolationError(FormflowError, ArithmeticError):
    def __init__(self, kind: str, operand: Any):
        self.kind = kind
        self.operand = operand
        super().__init__(f"domain violation in {kind}: operand {operand!r}")
