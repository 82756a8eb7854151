"""Functional relations d(psi) = omega and the tests that decide whether they are identical."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from .errors import DimensionMismatchError, PreconditionError, UnsupportedDegreeError
from .expr import Expression
from .forms import CommutatorField, Connection, DifferentialForm, commutator_1form, max_abs, sample
from .grid import Grid

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
FD_TOL = 1e-6


@dataclass(frozen=True)
class FunctionalRelation:
    omega: DifferentialForm
    connection: Optional[Connection] = None
    psi: Optional[Expression] = None
    label: str = ""
    sources: Tuple[Tuple[str, DifferentialForm], ...] = ()

    def __post_init__(self):
        conn = self.connection if self.connection is not None else Connection.zero(self.omega.coords)
        if conn.coords != self.omega.coords:
            raise DimensionMismatchError(
                f"connection on {conn.coords} does not match omega on {self.omega.coords}"
            )
        object.__setattr__(self, "connection", conn)
        if self.psi is not None:
            object.__setattr__(self, "psi", ex.as_expression(self.psi))
        for name, form in self.sources:
            if form.coords != self.omega.coords or form.degree != self.omega.degree:
                raise DimensionMismatchError(f"source '{name}' does not live on the space of omega")
        object.__setattr__(self, "sources", tuple(self.sources))

    @classmethod
    def from_sources(cls, sources: Sequence[Tuple[str, DifferentialForm]], connection: Optional[Connection] = None,
                     psi: Optional[Expression] = None, label: str = "") -> 'FunctionalRelation':
        """omega as the sum of labelled source forms."""
        if not sources:
            raise PreconditionError("a relation needs at least one source term")
        omega = sources[0][1]
        for _, form in sources[1:]:
            omega = omega + form
        return cls(omega, connection, psi, label, tuple(sources))


@dataclass
class NonidentityReport:
    label: str
    identical: bool
    commutator: CommutatorField
    max_coefficient_term: Optional[float]
    max_connection_term: Optional[float]
    max_total: Optional[float]
    per_term_breakdown: List[Tuple[str, Optional[float]]]
    worst_point: Optional[Dict[str, float]] = None
    relation_defect: Optional[float] = None
    skipped_points: int = 0
    tol: float = DEFAULT_TOL

    def to_dict(self) -> Dict:
        commutator = {}
        for a, b in self.commutator.pairs():
            commutator[self.commutator.label(a, b)] = {
                "coefficient": ex.to_text(self.commutator.coefficient_term(a, b)),
                "connection": ex.to_text(self.commutator.connection_term(a, b)),
            }
        out = {
            "label": self.label,
            "identical": self.identical,
            "commutator": commutator,
            "maxCoefficientTerm": self.max_coefficient_term,
            "maxConnectionTerm": self.max_connection_term,
            "maxTotal": self.max_total,
            "perTermBreakdown": [{"source": name, "max": value} for name, value in self.per_term_breakdown],
            "worstPoint": self.worst_point,
            "skippedPoints": self.skipped_points,
            "tol": self.tol,
        }
        if self.relation_defect is not None:
            out["relationDefect"] = self.relation_defect
        return out


def _require_one_form(form: DifferentialForm, what: str = "omega") -> None:
    if form.degree != 1:
        raise UnsupportedDegreeError(f"{what} has degree {form.degree}; only 1-forms are supported")


def _check_tol(tol: float) -> None:
    if not tol > 0:
        raise PreconditionError(f"tolerance must be positive, got {tol}")


def _commutator_samples(field_: CommutatorField, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    pairs = field_.pairs()
    values = sample(
        [field_.coefficient_term(a, b) for a, b in pairs] + [field_.connection_term(a, b) for a, b in pairs], grid
    )
    return values[:len(pairs)], values[len(pairs):]


def analyze_relation(rel: FunctionalRelation, grid: Grid, tol: float = DEFAULT_TOL) -> NonidentityReport:
    _require_one_form(rel.omega)
    _check_tol(tol)
    field_ = commutator_1form(rel.omega, rel.connection)
    coefficient, connection = _commutator_samples(field_, grid)
    total = coefficient + connection

    valid = np.all(np.isfinite(total), axis=0) if total.shape[0] else np.ones(grid.size, dtype=bool)
    skipped = int(np.count_nonzero(~valid))
    if skipped:
        logger.warning("relation '%s': %d of %d grid points excluded (domain violations)",
                       rel.label, skipped, grid.size)

    def masked(values: np.ndarray) -> np.ndarray:
        return values[:, valid] if values.shape[0] else values

    sub = _ValidGrid(grid, valid)
    max_total, worst, _ = max_abs(masked(total), sub)
    max_coefficient, _, _ = max_abs(masked(coefficient), sub)
    max_connection, _, _ = max_abs(masked(connection), sub)

    breakdown: List[Tuple[str, Optional[float]]] = [
        ("coefficient", max_coefficient),
        ("connection", max_connection),
    ]
    for name, form in rel.sources:
        source_coefficient, source_connection = _commutator_samples(commutator_1form(form, rel.connection), grid)
        breakdown.append((name, max_abs(masked(source_coefficient + source_connection), sub)[0]))

    defect = None
    if rel.psi is not None:
        residuals = [
            ex.sub(ex.differentiate(rel.psi, name), rel.omega.coefficient((i,)))
            for i, name in enumerate(rel.omega.coords)
        ]
        defect = max_abs(masked(sample(residuals, grid)), sub)[0]

    identical = max_total is not None and max_total <= tol
    logger.debug("relation '%s': max|K| = %s, identical = %s", rel.label, max_total, identical)
    return NonidentityReport(
        rel.label, identical, field_, max_coefficient, max_connection, max_total, breakdown,
        worst, defect, skipped, tol,
    )


class _ValidGrid:
    """Restriction of a grid to a mask, enough for ``max_abs`` to name points."""

    def __init__(self, grid: Grid, valid: np.ndarray):
        self.grid = grid
        self.index = np.flatnonzero(valid)

    def point_at(self, i: int) -> Dict[str, float]:
        return self.grid.point_at(int(self.index[i]))


@dataclass
class IntegratingFactorReport:
    exact: bool
    max_residual: Optional[float]
    excluded_points: int = 0

    def to_dict(self) -> Dict:
        return {"exact": self.exact, "maxResidual": self.max_residual, "excludedPoints": self.excluded_points}


def verify_integrating_factor(theta: DifferentialForm, mu: Expression, grid: Grid, tol: float = DEFAULT_TOL,
                              conn: Optional[Connection] = None) -> IntegratingFactorReport:
    _require_one_form(theta, "theta")
    _check_tol(tol)
    mu = ex.as_expression(mu)
    field_ = commutator_1form(theta.scale(mu), conn)
    columns = grid.columns()
    mu_values = np.broadcast_to(ex.evaluate_grid(mu, columns), (grid.size,))
    keep = np.isfinite(mu_values) & (mu_values != 0.0)
    excluded = int(np.count_nonzero(~keep))
    if excluded:
        logger.warning("integrating factor %s vanishes or is undefined at %d grid points; excluded",
                       ex.to_text(mu), excluded)
    totals = sample([field_.total(a, b) for a, b in field_.pairs()], grid)
    totals = totals[:, keep] if totals.shape[0] else totals
    if not keep.any():
        return IntegratingFactorReport(False, None, excluded)
    residual, _, skipped = max_abs(totals, _ValidGrid(grid, keep))
    exact = residual is not None and residual <= tol
    return IntegratingFactorReport(exact, residual, excluded + skipped)


def find_integrating_factor(theta: DifferentialForm, candidates: Sequence[Expression], grid: Grid,
                            tol: float = DEFAULT_TOL) -> Optional[Expression]:
    """First candidate, in list order, that makes ``mu * theta`` exact on the grid."""
    if not candidates:
        raise PreconditionError("integrating factor search needs at least one candidate")
    for candidate in candidates:
        candidate = ex.as_expression(candidate)
        report = verify_integrating_factor(theta, candidate, grid, tol)
        logger.debug("candidate %s: exact = %s, residual = %s", ex.to_text(candidate), report.exact,
                     report.max_residual)
        if report.exact:
            return candidate
    return None


@dataclass
class ValueScan:
    zero_set: List[Dict[str, float]]
    brackets: List[Tuple[Dict[str, float], Dict[str, float]]]
    skipped_points: int = 0

    def to_dict(self) -> Dict:
        return {
            "zeroSet": self.zero_set,
            "brackets": [{"from": a, "to": b} for a, b in self.brackets],
            "skippedPoints": self.skipped_points,
        }


def scan_values(values: np.ndarray, grid: Grid, tol: float) -> ValueScan:
    """Zero set (|v| <= tol) and sign-change brackets between grid neighbours, in scan order."""
    values = np.broadcast_to(np.asarray(values, dtype=float), (grid.size,))
    valid = np.isfinite(values)
    zero = valid & (np.abs(values) <= tol)
    brackets = [
        (grid.point_at(i), grid.point_at(j))
        for i, j in grid.neighbours()
        if valid[i] and valid[j] and not zero[i] and not zero[j] and values[i] * values[j] < 0.0
    ]
    return ValueScan([grid.point_at(int(i)) for i in np.flatnonzero(zero)], brackets,
                     int(np.count_nonzero(~valid)))


@dataclass
class DegeneracyCondition:
    determinant: Expression
    zero_set: List[Dict[str, float]]
    brackets: List[Tuple[Dict[str, float], Dict[str, float]]] = field(default_factory=list)
    skipped_points: int = 0

    def to_dict(self) -> Dict:
        return {
            "determinant": ex.to_text(self.determinant),
            "zeroSet": self.zero_set,
            "brackets": [{"from": a, "to": b} for a, b in self.brackets],
            "skippedPoints": self.skipped_points,
        }


def degeneracy_scan(det: Expression, grid: Grid, tol: float = DEFAULT_TOL) -> DegeneracyCondition:
    _check_tol(tol)
    det = ex.as_expression(det)
    scan = scan_values(ex.evaluate_grid(det, grid.columns()), grid, tol)
    if scan.skipped_points:
        logger.warning("determinant undefined at %d grid points", scan.skipped_points)
    return DegeneracyCondition(det, scan.zero_set, scan.brackets, scan.skipped_points)


def reconstruct_potential(theta: DifferentialForm, grid: Grid, order: int = 12, panels: int = 4) -> np.ndarray:
    """Integrate an exact 1-form from the first grid point to every grid point.

    The path runs along the grid axes in order; each leg uses composite
    Gauss-Legendre quadrature. Values come back in scan order.
    """
    _require_one_form(theta, "theta")
    names = [a.name for a in grid.axes]
    missing = [n for n in names if n not in theta.coords]
    if missing:
        raise DimensionMismatchError(f"grid axes {missing} are not coordinates of {theta.coords}")
    if order < 1 or panels < 1:
        raise PreconditionError("quadrature order and panel count must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    columns = grid.columns()
    origin = {name: float(columns[name][0]) for name in names}
    total = np.zeros(grid.size)
    for k, name in enumerate(names):
        integrand = theta.coefficient((theta.index_of(name),))
        start = np.full(grid.size, origin[name])
        stop = columns[name]
        width = (stop - start) / panels
        for j in range(panels):
            lo = start + j * width
            for node, weight in zip(nodes, weights):
                at = dict(columns)
                for later in names[k + 1:]:
                    at[later] = np.full(grid.size, origin[later])
                at[name] = lo + 0.5 * width * (node + 1.0)
                total += weight * 0.5 * width * np.broadcast_to(ex.evaluate_grid(integrand, at), (grid.size,))
    return total
