from typing import Any, Dict, List
from dataclasses import dataclass
from pathlib import Path
import json
import re

from jsonschema import FormatChecker, validators
from jsonschema.exceptions import ValidationError

from .errors import ConfigError, ExpressionSyntaxError

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass
class SchemaValidationResult:
    is_valid: bool
    errors: List[str]
    value: Any
    schema: Dict[str, Any]

    @property
    def error_messages(self) -> str:
        return "\n".join(self.errors)


class SchemaValidator:

    def __init__(self):
        self.validator_cls = validators.validator_for({"$schema": "https://json-schema.org/draft/2020-12/schema"})
        self.format_checker = FormatChecker()
        self.custom_formats = {
            "expression": self._is_expression,
            "identifier": self._is_identifier,
        }
        for name, check in self.custom_formats.items():
            self.format_checker.checks(name)(check)

    def _format_error(self, error: ValidationError) -> str:
        path = " -> ".join(str(p) for p in error.absolute_path) if error.absolute_path else "root"
        return f"At {path}: {error.message}"

    @staticmethod
    def _is_expression(value: Any) -> bool:
        if isinstance(value, (int, float)):
            return True
        if not isinstance(value, str):
            return False
        from .expr import parse
        try:
            parse(value)
        except ExpressionSyntaxError:
            return False
        return True

    @staticmethod
    def _is_identifier(value: Any) -> bool:
        return isinstance(value, str) and bool(_IDENTIFIER.match(value))

    def validate(self, value: Any, schema: Dict[str, Any]) -> SchemaValidationResult:
        self.validator_cls.check_schema(schema)
        validator = self.validator_cls(schema, format_checker=self.format_checker)
        errors = [self._format_error(e) for e in sorted(validator.iter_errors(value), key=lambda e: list(e.path))]
        return SchemaValidationResult(
            is_valid=not errors,
            errors=errors,
            value=value,
            schema=schema
        )

    def require(self, value: Any, schema: Dict[str, Any], what: str = "document") -> Any:
        """Validate and return ``value``; raise ConfigError listing every violation."""
        result = self.validate(value, schema)
        if not result.is_valid:
            raise ConfigError(f"invalid {what}:\n{result.error_messages}")
        return value

    def load_schema(self, schema_path: str) -> Dict[str, Any]:
        with open(schema_path, 'r') as f:
            return json.load(f)

    def packaged_schema(self, name: str) -> Dict[str, Any]:
        return self.load_schema(str(SCHEMA_DIR / f"{name}.json"))
