"""Skew-symmetric differential forms with expression coefficients.

A p-form is stored on strictly increasing multi-indices only; the value on any
other ordering follows from skew-symmetry. The exterior derivative of a 1-form
may carry a connection (torsion) term, the antisymmetric part of the
connectedness coefficients, which makes ``d`` of a form on a deforming basis
differ from the flat one.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import expr as ex
from .errors import DegreeError, DimensionMismatchError, PreconditionError, UnsupportedDegreeError
from .expr import Expression
from .grid import Grid
from .workers import parallel_map

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]
Coefficient = Union[Expression, float, int, str]


def permutation_sign(seq: Sequence[int]) -> int:
    """Parity of the permutation sorting ``seq``; 0 when an index repeats."""
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(1 for i, j in combinations(range(len(seq)), 2) if seq[i] > seq[j])
    return -1 if inversions % 2 else 1


def _sum(terms: Iterable[Expression]) -> Expression:
    total: Expression = ex.ZERO
    for term in terms:
        total = ex.add(total, term)
    return total


def _signed(sign: int, e: Expression) -> Expression:
    return e if sign > 0 else ex.neg(e)


@dataclass(frozen=True)
class DifferentialForm:
    coords: Tuple[str, ...]
    degree: int
    coefficients: Dict[MultiIndex, Expression] = field(default_factory=dict)

    def __post_init__(self):
        coords = tuple(self.coords)
        n = len(coords)
        if n < 1:
            raise DimensionMismatchError("a form needs at least one coordinate")
        if len(set(coords)) != n:
            raise DimensionMismatchError(f"repeated coordinate names in {coords}")
        if not 0 <= self.degree <= n:
            raise DegreeError(f"degree {self.degree} outside [0, {n}]")
        normalized: Dict[MultiIndex, Expression] = {}
        for index, value in self.coefficients.items():
            index = tuple(int(i) for i in index)
            if len(index) != self.degree:
                raise DegreeError(f"multi-index {index} does not have length {self.degree}")
            if any(b <= a for a, b in zip(index, index[1:])):
                raise DegreeError(f"multi-index {index} is not strictly increasing")
            if index and (index[0] < 0 or index[-1] >= n):
                raise DimensionMismatchError(f"multi-index {index} outside dimension {n}")
            value = ex.as_expression(value)
            if value != ex.ZERO:
                normalized[index] = value
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "coefficients", normalized)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @classmethod
    def zero(cls, coords: Sequence[str], degree: int) -> 'DifferentialForm':
        return cls(tuple(coords), degree, {})

    @classmethod
    def scalar(cls, coords: Sequence[str], value: Coefficient) -> 'DifferentialForm':
        return cls(tuple(coords), 0, {(): ex.as_expression(value)})

    @classmethod
    def from_components(cls, coords: Sequence[str], components: Mapping[str, Coefficient]) -> 'DifferentialForm':
        """1-form ``sum a_name d(name)`` keyed by coordinate name."""
        coords = tuple(coords)
        unknown = set(components) - set(coords)
        if unknown:
            raise DimensionMismatchError(f"components {sorted(unknown)} are not coordinates of {coords}")
        return cls(coords, 1, {(coords.index(name),): value for name, value in components.items()})

    def index_of(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise DimensionMismatchError(f"'{name}' is not a coordinate of {self.coords}") from None

    def coefficient(self, index: Union[MultiIndex, Sequence[str]]) -> Expression:
        """Coefficient on any ordering of the basis, with the skew-symmetric sign."""
        index = tuple(self.index_of(i) if isinstance(i, str) else int(i) for i in index)
        sign = permutation_sign(index)
        if sign == 0:
            return ex.ZERO
        return _signed(sign, self.coefficients.get(tuple(sorted(index)), ex.ZERO))

    def components(self) -> List[Tuple[MultiIndex, Expression]]:
        return sorted(self.coefficients.items())

    def is_zero(self) -> bool:
        return not self.coefficients

    def _check_compatible(self, other: 'DifferentialForm') -> None:
        if self.coords != other.coords:
            raise DimensionMismatchError(f"coordinates differ: {self.coords} vs {other.coords}")

    def __add__(self, other: 'DifferentialForm') -> 'DifferentialForm':
        self._check_compatible(other)
        if self.degree != other.degree:
            raise DegreeError(f"cannot add forms of degree {self.degree} and {other.degree}")
        merged = dict(self.coefficients)
        for index, value in other.coefficients.items():
            merged[index] = ex.add(merged.get(index, ex.ZERO), value)
        return DifferentialForm(self.coords, self.degree, merged)

    def __neg__(self) -> 'DifferentialForm':
        return self.scale(-1.0)

    def __sub__(self, other: 'DifferentialForm') -> 'DifferentialForm':
        return self + (-other)

    def scale(self, factor: Coefficient) -> 'DifferentialForm':
        factor = ex.as_expression(factor)
        return DifferentialForm(
            self.coords, self.degree, {i: ex.mul(factor, a) for i, a in self.coefficients.items()}
        )

    def substitute(self, bindings: Mapping[str, Union[Expression, float]]) -> 'DifferentialForm':
        return DifferentialForm(
            self.coords, self.degree, {i: ex.substitute(a, bindings) for i, a in self.coefficients.items()}
        )

    def evaluate(self, at: ex.Point) -> Dict[MultiIndex, float]:
        return {index: ex.evaluate(a, at) for index, a in self.components()}

    def free_variables(self) -> set:
        names = set()
        for a in self.coefficients.values():
            names |= ex.free_variables(a)
        return names

    def basis_text(self, index: MultiIndex) -> str:
        return "^".join(f"d{self.coords[i]}" for i in index)

    def to_text(self) -> str:
        if self.degree == 0:
            return ex.to_text(self.coefficients.get((), ex.ZERO))
        if not self.coefficients:
            return "0"
        return " + ".join(f"({ex.to_text(a)})*{self.basis_text(i)}" for i, a in self.components())

    def __str__(self) -> str:
        return self.to_text()


def basis(coords: Sequence[str], name: str) -> DifferentialForm:
    """The 1-form d(name)."""
    return DifferentialForm.from_components(coords, {name: 1.0})


@dataclass(frozen=True)
class Connection:
    """Antisymmetric part of the connectedness coefficients.

    ``components[(s, a, b)]`` with ``a < b`` holds ``G^s_{ba} - G^s_{ab}``.
    """
    coords: Tuple[str, ...]
    components: Dict[Tuple[int, int, int], Expression] = field(default_factory=dict)

    def __post_init__(self):
        coords = tuple(self.coords)
        n = len(coords)
        normalized: Dict[Tuple[int, int, int], Expression] = {}
        for key, value in self.components.items():
            s, a, b = (coords.index(k) if isinstance(k, str) else int(k) for k in key)
            if not all(0 <= i < n for i in (s, a, b)):
                raise DimensionMismatchError(f"connection index {key} outside dimension {n}")
            if a == b:
                continue
            value = ex.as_expression(value)
            if a > b:
                a, b, value = b, a, ex.neg(value)
            value = ex.add(normalized.get((s, a, b), ex.ZERO), value)
            if value != ex.ZERO:
                normalized[(s, a, b)] = value
            else:
                normalized.pop((s, a, b), None)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "components", normalized)

    @classmethod
    def zero(cls, coords: Sequence[str]) -> 'Connection':
        return cls(tuple(coords), {})

    @classmethod
    def from_coefficients(cls, coords: Sequence[str], gamma: Mapping[Tuple, Coefficient]) -> 'Connection':
        """Build from full coefficients ``gamma[(s, a, b)] = G^s_{ab}``."""
        coords = tuple(coords)
        n = len(coords)
        full = {
            tuple(coords.index(k) if isinstance(k, str) else int(k) for k in key): ex.as_expression(v)
            for key, v in gamma.items()
        }
        components = {}
        for s in range(n):
            for a, b in combinations(range(n), 2):
                value = ex.sub(full.get((s, b, a), ex.ZERO), full.get((s, a, b), ex.ZERO))
                if value != ex.ZERO:
                    components[(s, a, b)] = value
        return cls(coords, components)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def is_zero(self) -> bool:
        return not self.components

    def torsion(self, s: int, a: int, b: int) -> Expression:
        if a == b:
            return ex.ZERO
        if a < b:
            return self.components.get((s, a, b), ex.ZERO)
        return ex.neg(self.components.get((s, b, a), ex.ZERO))


@dataclass(frozen=True)
class CommutatorField:
    """Commutator K_ab of a 1-form split into its coefficient and connection terms."""
    coords: Tuple[str, ...]
    components: Dict[Tuple[int, int], Tuple[Expression, Expression]]

    def coefficient_term(self, a: int, b: int) -> Expression:
        return self._term(a, b, 0)

    def connection_term(self, a: int, b: int) -> Expression:
        return self._term(a, b, 1)

    def total(self, a: int, b: int) -> Expression:
        return ex.add(self.coefficient_term(a, b), self.connection_term(a, b))

    def _term(self, a: int, b: int, which: int) -> Expression:
        if a == b:
            return ex.ZERO
        if a < b:
            return self.components[(a, b)][which]
        return ex.neg(self.components[(b, a)][which])

    def pairs(self) -> List[Tuple[int, int]]:
        return sorted(self.components)

    def label(self, a: int, b: int) -> str:
        return f"{self.coords[a]}{self.coords[b]}"

    def evaluate(self, at: ex.Point) -> Dict[Tuple[int, int], Tuple[float, float]]:
        return {
            pair: (ex.evaluate(c, at), ex.evaluate(k, at)) for pair, (c, k) in sorted(self.components.items())
        }


def _check_connection(f: DifferentialForm, conn: Optional[Connection]) -> Connection:
    if conn is None:
        return Connection.zero(f.coords)
    if conn.coords != f.coords:
        raise DimensionMismatchError(f"connection on {conn.coords} does not match form on {f.coords}")
    return conn


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    if a.coords != b.coords:
        raise DimensionMismatchError(f"coordinates differ: {a.coords} vs {b.coords}")
    degree = a.degree + b.degree
    if degree > a.dim:
        raise DegreeError(f"wedge degree {degree} exceeds dimension {a.dim}")
    out: Dict[MultiIndex, Expression] = {}
    for i, ai in a.components():
        for j, bj in b.components():
            sign = permutation_sign(i + j)
            if sign == 0:
                continue
            k = tuple(sorted(i + j))
            out[k] = ex.add(out.get(k, ex.ZERO), _signed(sign, ex.mul(ai, bj)))
    return DifferentialForm(a.coords, degree, out)


def commutator_1form(theta: DifferentialForm, conn: Optional[Connection] = None) -> CommutatorField:
    """K_ab = (da_b/dx^a - da_a/dx^b) + (G^s_ba - G^s_ab) a_s for a < b."""
    if theta.degree != 1:
        raise DegreeError(f"commutator needs a 1-form, got degree {theta.degree}")
    conn = _check_connection(theta, conn)
    n = theta.dim
    coefficient = [theta.coefficient((i,)) for i in range(n)]
    components = {}
    for a, b in combinations(range(n), 2):
        term = ex.sub(
            ex.differentiate(coefficient[b], theta.coords[a]),
            ex.differentiate(coefficient[a], theta.coords[b]),
        )
        torsion = _sum(ex.mul(conn.torsion(s, a, b), coefficient[s]) for s in range(n))
        components[(a, b)] = (term, torsion)
    return CommutatorField(theta.coords, components)


def exterior_derivative(f: DifferentialForm, conn: Optional[Connection] = None) -> DifferentialForm:
    conn = _check_connection(f, conn)
    if f.degree >= f.dim:
        raise DegreeError(f"d of a degree-{f.degree} form leaves dimension {f.dim}")
    if f.degree == 1:
        field_ = commutator_1form(f, conn)
        return DifferentialForm(f.coords, 2, {pair: field_.total(*pair) for pair in field_.pairs()})
    if f.degree >= 2 and not conn.is_zero():
        raise UnsupportedDegreeError(
            f"connection term of d is only defined for 1-forms, got degree {f.degree}"
        )
    out: Dict[MultiIndex, List[Expression]] = {}
    for index, a in f.components():
        for j, name in enumerate(f.coords):
            if j in index:
                continue
            da = ex.differentiate(a, name)
            if da == ex.ZERO:
                continue
            sign = -1 if sum(1 for i in index if i < j) % 2 else 1
            out.setdefault(tuple(sorted(index + (j,))), []).append(_signed(sign, da))
    return DifferentialForm(f.coords, f.degree + 1, {k: _sum(v) for k, v in out.items()})


d = exterior_derivative


def exact_one_form(coords: Sequence[str], potential: Coefficient) -> DifferentialForm:
    return exterior_derivative(DifferentialForm.scalar(coords, potential))


def sample(expressions: Sequence[Expression], grid: Grid, workers: Optional[int] = None) -> np.ndarray:
    """Evaluate expressions on a grid; shape (len(expressions), grid.size), NaN marks violations."""
    columns = grid.columns()
    if not expressions:
        return np.zeros((0, grid.size))
    rows = parallel_map(lambda e: ex.evaluate_grid(e, columns), expressions, workers)
    return np.vstack([np.broadcast_to(r, (grid.size,)) for r in rows])


@dataclass
class ClosureReport:
    degree: int
    dim: int
    closed: bool
    max_residual: Optional[float]
    worst_point: Optional[Dict[str, float]]
    skipped_points: int = 0

    def to_dict(self) -> Dict:
        return {
            "degree": self.degree,
            "dim": self.dim,
            "closed": self.closed,
            "maxResidual": self.max_residual,
            "worstPoint": self.worst_point,
            "skippedPoints": self.skipped_points,
        }


def max_abs(values: np.ndarray, grid: Grid) -> Tuple[Optional[float], Optional[Dict[str, float]], int]:
    """Max |value| over points where every row is finite; first point in scan order wins ties."""
    if values.shape[0] == 0:
        return 0.0, grid.point_at(0), 0
    valid = np.all(np.isfinite(values), axis=0)
    skipped = int(np.count_nonzero(~valid))
    if not valid.any():
        return None, None, skipped
    per_point = np.where(valid, np.max(np.abs(np.nan_to_num(values)), axis=0), -np.inf)
    worst = int(np.argmax(per_point))
    return float(per_point[worst]), grid.point_at(worst), skipped


def is_closed(f: DifferentialForm, conn: Optional[Connection] = None, grid: Optional[Grid] = None,
              tol: float = 1e-9) -> ClosureReport:
    if tol <= 0:
        raise PreconditionError("tolerance must be positive")
    conn = _check_connection(f, conn)
    if grid is None:
        grid = Grid.uniform({name: (-1.0, 1.0) for name in f.coords})
    if f.degree == f.dim:
        return ClosureReport(f.degree, f.dim, True, 0.0, grid.point_at(0))
    df = exterior_derivative(f, conn)
    values = sample([a for _, a in df.components()], grid)
    residual, worst, skipped = max_abs(values, grid)
    if skipped:
        logger.warning("closure test excluded %d of %d grid points (domain violations)", skipped, grid.size)
    closed = residual is not None and residual <= tol
    return ClosureReport(f.degree, f.dim, closed, residual, worst, skipped)
