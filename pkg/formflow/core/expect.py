from typing import Any, Dict, Callable, Optional, Union
from dataclasses import dataclass
import math

import jsonpath_ng

from formflow.core.schema import SchemaValidator
from .report import Report


@dataclass
class Check:
    passed: bool
    message: str
    actual: Any
    expected: Any = None


class Expect:
    def __init__(self, report: Report, context: str = None):
        self.report = report
        self.checks: list[Check] = []
        self.context = context
        self._current_value = None

    def that(self, context: str = None) -> 'Expect':
        self.context = context
        return self

    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get_failures(self) -> list[str]:
        return [
            f"{check.message}: expected {check.expected}, got {check.actual}"
            for check in self.checks if not check.passed
        ]

    def _add_check(self, passed: bool, message: str, actual: Any, expected: Any = None):
        if self.context:
            message = f"{self.context}: {message}"
        self.checks.append(Check(passed, message, actual, expected))
        return self

    def body(self, path: str = None) -> 'Expect':
        if path:
            if self.report.json_data is None:
                raise ValueError("Report has no JSON data")
            try:
                jsonpath_expr = jsonpath_ng.parse(path)
            except Exception as exc:
                raise ValueError(f"Invalid JSONPath: {path}") from exc
            matches = jsonpath_expr.find(self.report.json_data)
            self._current_value = matches[0].value if matches else None
        else:
            self._current_value = self.report.json_data
        return self

    def all_of(self, path: str) -> 'Expect':
        """Every match of ``path``, as a list."""
        try:
            jsonpath_expr = jsonpath_ng.parse(path)
        except Exception as exc:
            raise ValueError(f"Invalid JSONPath: {path}") from exc
        self._current_value = [m.value for m in jsonpath_expr.find(self.report.json_data)]
        return self

    def equals(self, expected: Any) -> 'Expect':
        passed = str(self._current_value) == str(expected)
        self._add_check(
            passed,
            "equality check",
            self._current_value,
            expected
        )
        if not passed:
            raise AssertionError(f"Expected {expected}, but got {self._current_value}")
        return self

    def close_to(self, expected: float, rel: float = 1e-9, abs_tol: float = 0.0) -> 'Expect':
        actual = self._current_value
        passed = isinstance(actual, (int, float)) and math.isclose(actual, expected, rel_tol=rel, abs_tol=abs_tol)
        return self._add_check(passed, "closeness check", actual, expected)

    def is_true(self) -> 'Expect':
        return self._add_check(self._current_value is True, "true check", self._current_value, True)

    def is_false(self) -> 'Expect':
        return self._add_check(self._current_value is False, "false check", self._current_value, False)

    def is_null(self) -> 'Expect':
        return self._add_check(self._current_value is None, "null check", self._current_value, None)

    def is_not_empty(self) -> 'Expect':
        return self._add_check(bool(self._current_value), "empty check", self._current_value, "non-empty value")

    def contains(self, expected: Any) -> 'Expect':
        value = self._current_value
        passed = value is not None and expected in value
        return self._add_check(passed, "contains check", value, expected)

    def less_than(self, value: float) -> 'Expect':
        actual = self._current_value
        return self._add_check(actual is not None and actual < value, "less than check", actual, value)

    def greater_than(self, value: float) -> 'Expect':
        actual = self._current_value
        return self._add_check(actual is not None and actual > value, "greater than check", actual, value)

    def has_length(self, length: int) -> 'Expect':
        # a missing path yields None and fails the check
        size = len(self._current_value) if self._current_value is not None else None
        return self._add_check(size == length, "length check", size, length)

    def has_keys(self, *keys: str) -> 'Expect':
        present = set(self._current_value) if isinstance(self._current_value, dict) else set()
        return self._add_check(set(keys) <= present, "keys presence check", present, set(keys))

    def satisfies(self, predicate: Callable[[Any], bool], message: str = "custom check") -> 'Expect':
        return self._add_check(bool(predicate(self._current_value)), message, self._current_value)

    def matches_schema(self, schema: Union[Dict[str, Any], str]) -> 'Expect':
        """Validate the current value against a schema dict or a schema file path."""
        validator = SchemaValidator()
        if isinstance(schema, str):
            schema = validator.load_schema(schema)
        result = validator.validate(self._current_value, schema)
        message = "schema validation" if result.is_valid else f"schema validation: {result.error_messages}"
        return self._add_check(result.is_valid, message, self._current_value, schema)

    def ok(self, message: Optional[str] = None) -> None:
        """Raise an AssertionError listing every failed check."""
        failures = self.get_failures()
        if failures:
            raise AssertionError(message or "\n".join(failures))
