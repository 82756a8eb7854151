from typing import Any, Dict, Optional
from dataclasses import dataclass, field
import json
import math

import numpy as np

from .expr import Expression, to_text


@dataclass
class Report:
    kind: str
    json_data: Dict[str, Any]
    text: str = ""
    csv_text: Optional[str] = None
    elapsed_time: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def of(cls, kind: str, payload: Dict[str, Any], **kwargs) -> 'Report':
        data = plain(payload)
        return cls(kind=kind, json_data=data, text=render_json(data), **kwargs)


def plain(value: Any) -> Any:
    """Recursively convert numpy scalars, tuples and report objects to JSON-ready values."""
    if isinstance(value, Expression):
        return to_text(value)
    if hasattr(value, "to_dict"):
        return plain(value.to_dict())
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def format_float(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    text = format(value, ".17g")
    if not any(ch in text for ch in ".en"):
        text += ".0"
    return text


def render_json(value: Any, indent: int = 2) -> str:
    """JSON with sorted keys and every float written with 17 significant digits."""
    return _render(plain(value), indent, 0) + "\n"


def _render(value: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_render(value[k], indent, level + 1)}" for k in sorted(value)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [f"{pad}{_render(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return format_float(value)
    return json.dumps(value)
