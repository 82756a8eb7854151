from typing import Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from . import expr as ex
from .expr import Expression

Vector = Tuple[Expression, Expression, Expression]
SPACE = ("x1", "x2", "x3")


def vector(components: Sequence[Union[Expression, float, str]]) -> Vector:
    if len(components) != 3:
        raise ValueError(f"expected 3 components, got {len(components)}")
    return tuple(ex.as_expression(c) for c in components)


def zero() -> Vector:
    return (ex.ZERO, ex.ZERO, ex.ZERO)


def add(a: Vector, b: Vector) -> Vector:
    return tuple(ex.add(x, y) for x, y in zip(a, b))


def sub(a: Vector, b: Vector) -> Vector:
    return tuple(ex.sub(x, y) for x, y in zip(a, b))


def scale(factor: Expression, a: Vector) -> Vector:
    return tuple(ex.mul(factor, x) for x in a)


def dot(a: Sequence[Expression], b: Sequence[Expression]) -> Expression:
    total = ex.ZERO
    for x, y in zip(a, b):
        total = ex.add(total, ex.mul(x, y))
    return total


def cross(a: Vector, b: Vector) -> Vector:
    return (
        ex.sub(ex.mul(a[1], b[2]), ex.mul(a[2], b[1])),
        ex.sub(ex.mul(a[2], b[0]), ex.mul(a[0], b[2])),
        ex.sub(ex.mul(a[0], b[1]), ex.mul(a[1], b[0])),
    )


def grad(f: Expression, space: Sequence[str] = SPACE) -> Vector:
    return tuple(ex.differentiate(f, x) for x in space)


def curl(a: Vector, space: Sequence[str] = SPACE) -> Vector:
    x, y, z = space
    d = ex.differentiate
    return (
        ex.sub(d(a[2], y), d(a[1], z)),
        ex.sub(d(a[0], z), d(a[2], x)),
        ex.sub(d(a[1], x), d(a[0], y)),
    )


def divergence(a: Vector, space: Sequence[str] = SPACE) -> Expression:
    total = ex.ZERO
    for component, x in zip(a, space):
        total = ex.add(total, ex.differentiate(component, x))
    return total


def advective(a: Vector, b: Vector, space: Sequence[str] = SPACE) -> Vector:
    """(a . grad) b"""
    return tuple(dot(a, grad(component, space)) for component in b)


def partial(a: Vector, var: str) -> Vector:
    return tuple(ex.differentiate(c, var) for c in a)


def substitute(a: Vector, bindings: Mapping[str, Expression]) -> Vector:
    return tuple(ex.substitute(c, bindings) for c in a)


def is_zero(a: Sequence[Expression]) -> bool:
    return all(c == ex.ZERO for c in a)


def evaluate(a: Sequence[Expression], at: Mapping[str, float]) -> np.ndarray:
    return np.array([ex.evaluate(c, at) for c in a])


def evaluate_grid(a: Sequence[Expression], columns: Dict[str, np.ndarray], size: int) -> np.ndarray:
    """Shape (len(a), size); NaN where a component is undefined."""
    return np.vstack([np.broadcast_to(ex.evaluate_grid(c, columns), (size,)) for c in a])


def to_text(a: Sequence[Expression]) -> list:
    return [ex.to_text(c) for c in a]
