import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

_AXIS_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^:]+):([^:]+):(\d+)\s*$")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int
    explicit: Tuple[float, ...] = ()

    def values(self) -> np.ndarray:
        if self.explicit:
            return np.array(self.explicit, dtype=float)
        if self.count == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class Grid:
    """Tensor-product sample grid; points are scanned with the first axis slowest."""
    axes: Tuple[Axis, ...]
    extra: Tuple[Tuple[str, float], ...] = field(default=())

    @classmethod
    def uniform(cls, ranges: Mapping[str, Tuple[float, float]], count: int = 20) -> 'Grid':
        return cls(tuple(Axis(name, float(lo), float(hi), count) for name, (lo, hi) in ranges.items()))

    @classmethod
    def point(cls, at: Mapping[str, float]) -> 'Grid':
        return cls(tuple(Axis(name, float(value), float(value), 1) for name, value in at.items()))

    @classmethod
    def from_spec(cls, spec: str) -> 'Grid':
        """Parse ``name=lo:hi:count[,name=lo:hi:count...]``."""
        axes = []
        for part in filter(None, (p.strip() for p in spec.split(","))):
            match = _AXIS_RE.match(part)
            if not match:
                raise ConfigError(f"invalid grid axis '{part}', expected name=lo:hi:count")
            name, lo, hi, count = match.groups()
            try:
                axis = Axis(name, float(lo), float(hi), int(count))
            except ValueError as exc:
                raise ConfigError(f"invalid grid axis '{part}': {exc}") from exc
            if axis.count < 1:
                raise ConfigError(f"grid axis '{name}' needs at least one point")
            axes.append(axis)
        if not axes:
            raise ConfigError("empty grid spec")
        return cls(tuple(axes))

    def with_fixed(self, **values: float) -> 'Grid':
        return Grid(self.axes, self.extra + tuple((k, float(v)) for k, v in values.items()))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.axes) + tuple(k for k, _ in self.extra)

    @property
    def size(self) -> int:
        return int(np.prod([a.count for a in self.axes])) if self.axes else 1

    def columns(self) -> Dict[str, np.ndarray]:
        if self.axes:
            mesh = np.meshgrid(*(a.values() for a in self.axes), indexing="ij")
            columns = {a.name: m.ravel() for a, m in zip(self.axes, mesh)}
        else:
            columns = {}
        for name, value in self.extra:
            columns[name] = np.full(self.size, value)
        return columns

    def points(self) -> Iterator[Dict[str, float]]:
        columns = self.columns()
        for i in range(self.size):
            yield {name: float(column[i]) for name, column in columns.items()}

    def point_at(self, index: int) -> Dict[str, float]:
        return {name: float(column[index]) for name, column in self.columns().items()}

    def subgrid(self, stride: int) -> 'Grid':
        """Every ``stride``-th value per axis; always a subset of this grid's points."""
        axes = []
        for a in self.axes:
            values = tuple(float(v) for v in a.values()[::stride])
            axes.append(Axis(a.name, values[0], values[-1], len(values), values))
        return Grid(tuple(axes), self.extra)

    def neighbours(self) -> List[Tuple[int, int]]:
        """Index pairs of points adjacent along one axis, in scan order."""
        shape = tuple(a.count for a in self.axes)
        index = np.arange(self.size).reshape(shape) if shape else np.arange(1)
        pairs: List[Tuple[int, int]] = []
        for axis in range(len(shape)):
            lo = np.take(index, range(shape[axis] - 1), axis=axis).ravel()
            hi = np.take(index, range(1, shape[axis]), axis=axis).ravel()
            pairs.extend(zip(lo.tolist(), hi.tolist()))
        return sorted(pairs)

    def describe(self) -> Dict[str, Sequence[float]]:
        return {a.name: [a.lo, a.hi, a.count] for a in self.axes}


def box_around(samples: Mapping[str, np.ndarray], count: int = 20, pad: Optional[float] = None) -> Grid:
    """Bounding-box grid of sampled coordinates."""
    axes = []
    for name, values in samples.items():
        lo, hi = float(np.min(values)), float(np.max(values))
        if pad:
            lo, hi = lo - pad, hi + pad
        axes.append(Axis(name, lo, hi, count if hi > lo else 1))
    return Grid(tuple(axes))
