"""Poynting-vector relation of an electromagnetic field and the direction that closes it.

Along the direction l1 of S = E x H the energy and momentum balances become

    dS/dl1 = -(1/c) dI/dt + Q^e / c
    dS/dt  = -c dI/dl1 + c Q'

with I = (E^2 + H^2) / c. Where the actions satisfy Q^e + c Q' = 0 the
modulus of S is a closed form along dl1/dt = -(dS/dt) / (dS/dl1), which for
a travelling wave is the speed c.
"""
import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, TextIO, Tuple

import numpy as np

from . import expr as ex
from . import vectors as vec
from .errors import PreconditionError
from .expr import Expression
from .forms import DifferentialForm
from .grid import Axis, Grid
from .relations import (DEFAULT_TOL, FunctionalRelation, NonidentityReport, ValueScan, analyze_relation,
                        scan_values)
from .vectors import Vector

logger = logging.getLogger(__name__)

SPACE = ("x", "y", "z")
COORDS = SPACE + ("t",)
FRAME = ("l1", "t")
DIRECTION_TOL = 1e-6


@dataclass(frozen=True)
class EMScenario:
    electric: Vector
    magnetic: Vector
    c: float = 1.0
    charge_density: Expression = ex.ZERO
    charge_velocity: Vector = field(default_factory=vec.zero)
    energy_action: Optional[Expression] = None
    force_action: Optional[Vector] = None
    domain: Mapping[str, Tuple[float, float]] = field(default_factory=dict)
    counts: Mapping[str, int] = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self):
        if not self.c > 0:
            raise PreconditionError(f"light speed must be positive, got {self.c}")
        object.__setattr__(self, "electric", vec.vector(self.electric))
        object.__setattr__(self, "magnetic", vec.vector(self.magnetic))
        object.__setattr__(self, "charge_density", ex.as_expression(self.charge_density))
        object.__setattr__(self, "charge_velocity", vec.vector(self.charge_velocity))
        if self.energy_action is not None:
            object.__setattr__(self, "energy_action", ex.as_expression(self.energy_action))
        if self.force_action is not None:
            object.__setattr__(self, "force_action", vec.vector(self.force_action))
        for e in self.electric + self.magnetic + self.charge_velocity + (self.charge_density,):
            extra = ex.free_variables(e) - set(COORDS)
            if extra:
                raise PreconditionError(f"field components may only use {COORDS}, found {sorted(extra)}")
        domain = {name: (0.0, 0.0) for name in COORDS}
        domain.update({k: (float(lo), float(hi)) for k, (lo, hi) in dict(self.domain).items()})
        object.__setattr__(self, "domain", domain)

    def grid(self) -> Grid:
        axes = []
        for name in COORDS:
            lo, hi = self.domain[name]
            count = 1 if hi == lo else int(self.counts.get(name, 11))
            axes.append(Axis(name, lo, hi, count))
        return Grid(tuple(axes))

    @property
    def poynting(self) -> Vector:
        return vec.cross(self.electric, self.magnetic)

    @property
    def intensity(self) -> Expression:
        E, H = self.electric, self.magnetic
        return ex.div(ex.add(vec.dot(E, E), vec.dot(H, H)), ex.Const(self.c))

    @property
    def stress_vector(self) -> Vector:
        """G = E div E + grad(E.E) - (E.grad)E + grad(H.H) - (H.grad)H"""
        E, H = self.electric, self.magnetic
        g = vec.scale(vec.divergence(E, SPACE), E)
        g = vec.add(g, vec.grad(vec.dot(E, E), SPACE))
        g = vec.sub(g, vec.advective(E, E, SPACE))
        g = vec.add(g, vec.grad(vec.dot(H, H), SPACE))
        return vec.sub(g, vec.advective(H, H, SPACE))

    @property
    def energy_source(self) -> Expression:
        """Q^e = rho U.E unless given."""
        if self.energy_action is not None:
            return self.energy_action
        return ex.mul(self.charge_density, vec.dot(self.charge_velocity, self.electric))

    @property
    def force_source(self) -> Vector:
        """Q^i = rho (E + U x H / c) unless given."""
        if self.force_action is not None:
            return self.force_action
        lorentz = vec.add(self.electric, vec.scale(ex.Const(1.0 / self.c), vec.cross(self.charge_velocity,
                                                                                     self.magnetic)))
        return vec.scale(self.charge_density, lorentz)


def _aligned_bindings(at: Mapping[str, float], direction: np.ndarray) -> Dict[str, Expression]:
    l1 = ex.Var("l1")
    return {
        name: ex.add(ex.Const(float(at[name])), ex.mul(ex.Const(float(direction[j])), l1))
        for j, name in enumerate(SPACE)
    }


def build_em_relation(sc: EMScenario, at: Mapping[str, float], tol: float = DEFAULT_TOL) -> FunctionalRelation:
    """dS = A_l dl1 + A_t dt in the frame aligned with S at ``at``; the direction is frozen."""
    S = vec.evaluate(sc.poynting, at)
    norm = float(np.linalg.norm(S))
    if norm <= tol:
        raise PreconditionError(f"Poynting vector vanishes at {dict(at)}; no aligned frame")
    direction = S / norm
    bindings = _aligned_bindings(at, direction)
    c = ex.Const(sc.c)
    I = ex.substitute(sc.intensity, bindings)
    q_e = ex.substitute(sc.energy_source, bindings)
    q_prime = ex.substitute(vec.dot(sc.force_source, tuple(ex.Const(float(d)) for d in direction)), bindings)
    field_form = DifferentialForm.from_components(FRAME, {
        "l1": ex.div(ex.neg(ex.differentiate(I, "t")), c),
        "t": ex.neg(ex.mul(c, ex.differentiate(I, "l1"))),
    })
    charge_form = DifferentialForm.from_components(FRAME, {"l1": ex.div(q_e, c), "t": ex.mul(c, q_prime)})
    return FunctionalRelation.from_sources([("field", field_form), ("charge", charge_form)],
                                           label=f"{sc.name} at {dict(at)}")


@dataclass
class EMReport:
    scenario: str
    c: float
    relation_nonidentical: bool
    max_commutator: Optional[float]
    commutator_terms: Dict[str, Optional[float]]
    action_condition_residual: Optional[float]
    action_condition: ValueScan
    integrating_direction: Optional[float]
    direction_spread: Optional[float]
    matches_c: bool
    valid_points: int
    excluded_points: int
    transverse_residual: Optional[float]
    rows: List[Dict[str, float]] = field(default_factory=list)
    worst_frame: Optional[NonidentityReport] = None

    @property
    def no_direction(self) -> bool:
        return self.integrating_direction is None

    def to_dict(self) -> Dict:
        return {
            "scenario": self.scenario,
            "c": self.c,
            "relationNonidentical": self.relation_nonidentical,
            "maxCommutator": self.max_commutator,
            "commutatorTerms": self.commutator_terms,
            "actionConditionResidual": self.action_condition_residual,
            "actionConditionZeros": len(self.action_condition.zero_set),
            "actionConditionBrackets": len(self.action_condition.brackets),
            "integratingDirection": self.integrating_direction,
            "directionSpread": self.direction_spread,
            "matchesC": self.matches_c,
            "noDirectionDerivable": self.no_direction,
            "validPoints": self.valid_points,
            "excludedPoints": self.excluded_points,
            "transverseResidual": self.transverse_residual,
            "worstFrame": None if self.worst_frame is None else self.worst_frame.to_dict(),
        }

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        header = list(COORDS) + ["S", "commutator", "direction"]
        writer.writerow(header)
        for row in self.rows:
            writer.writerow(["" if row[h] is None else repr(row[h]) for h in header])


def _stack(components, columns, size) -> np.ndarray:
    return vec.evaluate_grid(components, columns, size)


def _max_or_none(values: np.ndarray) -> Optional[float]:
    values = values[np.isfinite(values)]
    return float(np.max(np.abs(values))) if values.size else None


def run_em(sc: EMScenario, grid: Optional[Grid] = None, tol: float = DEFAULT_TOL) -> EMReport:
    grid = grid or sc.grid()
    columns, size = grid.columns(), grid.size
    c = sc.c
    S_vec = sc.poynting
    S = _stack(S_vec, columns, size)
    S_t = _stack(vec.partial(S_vec, "t"), columns, size)
    S_x = [_stack(vec.partial(S_vec, x), columns, size) for x in SPACE]

    modulus = np.linalg.norm(S, axis=0)
    framed = np.isfinite(modulus) & (modulus > tol)
    with np.errstate(all="ignore"):
        direction = np.where(framed, S / np.where(framed, modulus, 1.0), np.nan)
        mod_t = np.sum(S * S_t, axis=0) / modulus
        mod_l = sum(direction[j] * np.sum(S * S_x[j], axis=0) for j in range(3)) / modulus

    I = sc.intensity
    hessian = [[ex.evaluate_grid(ex.differentiate(ex.differentiate(I, a), b), columns) for b in SPACE] for a in SPACE]
    I_tt = ex.evaluate_grid(ex.differentiate(ex.differentiate(I, "t"), "t"), columns)
    Q = sc.force_source
    dQ = [[ex.evaluate_grid(ex.differentiate(Q[k], a), columns) for k in range(3)] for a in SPACE]
    Qe_t = ex.evaluate_grid(ex.differentiate(sc.energy_source, "t"), columns)
    field_term = I_tt / c
    charge_term = -Qe_t / c
    for j in range(3):
        for k in range(3):
            field_term = field_term - c * direction[j] * direction[k] * hessian[j][k]
            charge_term = charge_term + c * direction[j] * direction[k] * dQ[j][k]
    commutator = np.where(framed, field_term + charge_term, np.nan)

    Q_values = _stack(Q, columns, size)
    q_prime = np.sum(Q_values * direction, axis=0)
    condition = np.broadcast_to(ex.evaluate_grid(sc.energy_source, columns), (size,)) + c * q_prime
    condition = np.where(framed, condition, np.nan)
    G = _stack(sc.stress_vector, columns, size)
    transverse = G + c * Q_values
    transverse = transverse - np.sum(transverse * direction, axis=0) * direction
    transverse = np.where(framed, np.linalg.norm(transverse, axis=0), np.nan)

    usable = framed & np.isfinite(mod_l) & (np.abs(mod_l) > tol) & (np.abs(condition) <= tol)
    excluded = int(np.count_nonzero(framed & ~usable))
    if not framed.any():
        logger.warning("%s: Poynting vector vanishes on the whole grid", sc.name)
    if excluded:
        logger.warning("%s: %d framed points excluded (dS/dl1 ~ 0 or action condition violated)",
                       sc.name, excluded)
    with np.errstate(all="ignore"):
        speed = np.where(usable, -mod_t / np.where(usable, mod_l, 1.0), np.nan)

    valid = speed[usable]
    if valid.size:
        integrating = float(np.mean(valid))
        spread = float(np.max(valid) - np.min(valid))
        matches = bool(np.all(np.abs(valid - c) <= DIRECTION_TOL * c))
    else:
        integrating = spread = None
        matches = False
        logger.warning("%s: no integrating direction derivable", sc.name)

    max_commutator = _max_or_none(commutator)
    worst_frame = None
    finite = np.flatnonzero(np.isfinite(commutator))
    if finite.size:
        at = grid.point_at(int(finite[np.argmax(np.abs(commutator[finite]))]))
        worst_frame = analyze_relation(build_em_relation(sc, at, tol), Grid.point({"l1": 0.0, "t": at["t"]}), tol)
        logger.debug("%s: frame relation at %s gives max|K| = %s", sc.name, at, worst_frame.max_total)

    rows = []
    for i in range(size):
        row = {name: float(columns[name][i]) for name in COORDS}
        row["S"] = float(modulus[i])
        row["commutator"] = float(commutator[i]) if framed[i] else None
        row["direction"] = float(speed[i]) if usable[i] else None
        rows.append(row)

    return EMReport(
        scenario=sc.name,
        c=c,
        relation_nonidentical=max_commutator is not None and max_commutator > tol,
        max_commutator=max_commutator,
        commutator_terms={
            "field": _max_or_none(np.where(framed, field_term, np.nan)),
            "charge": _max_or_none(np.where(framed, charge_term, np.nan)),
        },
        action_condition_residual=_max_or_none(condition),
        action_condition=scan_values(condition, grid, tol),
        integrating_direction=integrating,
        direction_spread=spread,
        matches_c=matches,
        valid_points=int(valid.size),
        excluded_points=excluded,
        transverse_residual=_max_or_none(transverse),
        rows=rows,
        worst_frame=worst_frame,
    )
