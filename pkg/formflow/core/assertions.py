from typing import Any, Iterable, Mapping
import math

import numpy as np


class Assertions:
    @staticmethod
    def assertClose(actual: float, expected: float, rel: float = 1e-9, abs_tol: float = 0.0, message: str = None):
        if actual is None or not math.isclose(actual, expected, rel_tol=rel, abs_tol=abs_tol):
            raise AssertionError(message or f"Expected {expected!r} (rel {rel}, abs {abs_tol}), but got {actual!r}")

    @staticmethod
    def assertAllClose(actual: Iterable[float], expected: Iterable[float], rel: float = 1e-9, abs_tol: float = 0.0,
                       message: str = None):
        a = np.asarray(list(actual), dtype=float)
        b = np.asarray(list(expected), dtype=float)
        if a.shape != b.shape:
            raise AssertionError(message or f"Shape mismatch: {a.shape} vs {b.shape}")
        bad = ~np.isclose(a, b, rtol=rel, atol=abs_tol)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise AssertionError(message or f"{int(bad.sum())} values differ; first at {i}: {a[i]!r} vs {b[i]!r}")

    @staticmethod
    def assertSmall(value: float, tol: float, message: str = None):
        if value is None or not abs(value) <= tol:
            raise AssertionError(message or f"Expected |{value!r}| <= {tol}")

    @staticmethod
    def assertPointsClose(actual: Mapping[str, float], expected: Mapping[str, float], abs_tol: float = 1e-12,
                          message: str = None):
        if set(actual) != set(expected):
            raise AssertionError(message or f"Expected coordinates {sorted(expected)}, got {sorted(actual)}")
        for name, value in expected.items():
            if not math.isclose(actual[name], value, rel_tol=0.0, abs_tol=abs_tol):
                raise AssertionError(message or f"Coordinate '{name}': expected {value!r}, got {actual[name]!r}")

    @staticmethod
    def assertLess(a: Any, b: Any, message: str = None):
        if a is None or not a < b:
            raise AssertionError(message or f"Expected '{a}' to be less than '{b}'")

    @staticmethod
    def assertGreater(a: Any, b: Any, message: str = None):
        if a is None or not a > b:
            raise AssertionError(message or f"Expected '{a}' to be greater than '{b}'")
