"""Gas-dynamic evolutionary relation and instability attribution.

The momentum balance gives the entropy gradient normal to the trajectory as
(grad h0 + U x rot U - F + dU/dt) / T. In a frame moving with the particle
(xi1 along the trajectory, xi2 along the normal) that becomes the relation
ds = A1 dxi1 + A2 dxi2, with A1 built from the transport terms of a viscous,
heat-conducting gas and zero for an ideal one. The commutator of its right-hand
side is split by source, and the dominant source names the structure the flow
can develop.
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
from .forms import DifferentialForm, commutator_1form
from .grid import Axis, Grid
from .relations import DEFAULT_TOL, DegeneracyCondition, FunctionalRelation, analyze_relation, degeneracy_scan
from .vectors import Vector
from .workers import parallel_map

logger = logging.getLogger(__name__)

COORDS = vec.SPACE + ("t",)
FRAME = ("xi1", "xi2")
ORIGIN = {"xi1": 0.0, "xi2": 0.0}

# Dominance ties resolve in this order.
STRUCTURAL_SOURCES = ("nonstationarity", "vorticity", "force", "transport")
SOURCES = ("enthalpy", "vorticity", "force", "nonstationarity", "transport")

EQUILIBRIUM = "equilibrium, no structure"
SHOCK = "weak shock / shock wave"
VORTEX = "vortex / convective"
TURBULENCE = "turbulent pulsation"


def newtonian_transport(velocity: Vector, temperature: Expression, mu: float,
                        kappa: float) -> Tuple[Vector, Tuple[Vector, Vector, Vector]]:
    """Fourier heat flux and Newtonian stress: q_i = -kappa dT/dx_i, tau_ki = mu (du_i/dx_k + du_k/dx_i)."""
    temperature = ex.as_expression(temperature)
    q = vec.scale(ex.Const(-kappa), vec.grad(temperature))
    tau = tuple(
        tuple(
            ex.mul(ex.Const(mu), ex.add(ex.differentiate(velocity[i], vec.SPACE[k]),
                                        ex.differentiate(velocity[k], vec.SPACE[i])))
            for i in range(3)
        )
        for k in range(3)
    )
    return q, tau


@dataclass(frozen=True)
class GasScenario:
    velocity: Vector
    enthalpy: Expression = ex.ZERO
    force: Vector = field(default_factory=vec.zero)
    temperature: Expression = ex.ONE
    sound_speed: Expression = ex.ONE
    density: Expression = ex.ONE
    heat_flux: Optional[Vector] = None
    stress: Optional[Tuple[Vector, Vector, Vector]] = None
    nonstationary: Optional[bool] = None
    multiply_connected: Optional[bool] = None
    nonpotential_force: Optional[bool] = None
    viscous_heat_conducting: Optional[bool] = None
    domain: Mapping[str, Tuple[float, float]] = field(default_factory=dict)
    count: int = 3
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "velocity", vec.vector(self.velocity))
        object.__setattr__(self, "force", vec.vector(self.force))
        for name in ("enthalpy", "temperature", "sound_speed", "density"):
            object.__setattr__(self, name, ex.as_expression(getattr(self, name)))
        if self.heat_flux is not None:
            object.__setattr__(self, "heat_flux", vec.vector(self.heat_flux))
        if self.stress is not None:
            object.__setattr__(self, "stress", tuple(vec.vector(row) for row in self.stress))
        fields = list(self.velocity) + list(self.force) + [self.enthalpy, self.temperature, self.sound_speed,
                                                           self.density]
        for e in fields:
            extra = ex.free_variables(e) - set(COORDS)
            if extra:
                raise PreconditionError(f"gas fields may only use {COORDS}, found {sorted(extra)}")
        domain = {name: (0.0, 0.0) for name in COORDS}
        domain.update({k: (float(lo), float(hi)) for k, (lo, hi) in dict(self.domain).items()})
        object.__setattr__(self, "domain", domain)

    def flag(self, name: str) -> bool:
        """Explicit flag value, or what the fields show when it was left unset."""
        value = getattr(self, name)
        if value is not None:
            return value
        if name == "nonstationary":
            return any(ex.depends_on(u, "t") for u in self.velocity)
        if name == "multiply_connected":
            return not vec.is_zero(vec.curl(self.velocity))
        if name == "nonpotential_force":
            return not vec.is_zero(vec.curl(self.force))
        return self.heat_flux is not None or self.stress is not None

    def flags(self) -> Dict[str, bool]:
        return {
            "nonstationary": self.flag("nonstationary"),
            "multiplyConnected": self.flag("multiply_connected"),
            "nonpotentialForce": self.flag("nonpotential_force"),
            "viscousHeatConducting": self.flag("viscous_heat_conducting"),
        }

    def grid(self) -> Grid:
        axes = []
        for name in COORDS:
            lo, hi = self.domain[name]
            axes.append(Axis(name, lo, hi, 1 if hi == lo else self.count))
        return Grid(tuple(axes))

    def bracket_terms(self) -> Dict[str, Vector]:
        """Right-hand side of the normal entropy-gradient balance, before division by T, per source.

        A source whose flag was explicitly switched off is left out.
        """
        U = self.velocity
        return {
            "enthalpy": vec.grad(self.enthalpy),
            "vorticity": vec.zero() if self.multiply_connected is False else vec.cross(U, vec.curl(U)),
            "force": vec.zero() if self.nonpotential_force is False else vec.scale(ex.Const(-1.0), self.force),
            "nonstationarity": vec.zero() if self.nonstationary is False else vec.partial(U, "t"),
        }

    def transport_term(self) -> Expression:
        """A1 for a viscous heat-conducting gas; zero for an ideal one."""
        if not self.flag("viscous_heat_conducting"):
            return ex.ZERO
        q = self.heat_flux or vec.zero()
        tau = self.stress or (vec.zero(), vec.zero(), vec.zero())
        rho, T = self.density, self.temperature
        total = ex.ZERO
        for i, x in enumerate(vec.SPACE):
            total = ex.add(total, ex.div(ex.differentiate(ex.neg(ex.div(q[i], T)), x), rho))
            total = ex.sub(total, ex.mul(ex.div(q[i], ex.mul(rho, T)), ex.differentiate(T, x)))
        for k, xk in enumerate(vec.SPACE):
            for i in range(3):
                total = ex.add(total, ex.mul(ex.div(tau[k][i], rho), ex.differentiate(self.velocity[i], xk)))
        return total

    def mach_determinant(self) -> Expression:
        """U^2 - a^2: positive where the balance equations are hyperbolic."""
        return ex.sub(vec.dot(self.velocity, self.velocity), ex.power(self.sound_speed, ex.Const(2.0)))


@dataclass
class LocalFrame:
    origin: Dict[str, float]
    velocity: np.ndarray
    normal: np.ndarray
    fallback: bool = False

    def bindings(self) -> Dict[str, Expression]:
        """Ambient coordinates as functions of (xi1, xi2)."""
        xi1, xi2 = ex.Var("xi1"), ex.Var("xi2")
        out = {}
        for j, name in enumerate(vec.SPACE):
            out[name] = ex.add(ex.add(ex.Const(self.origin[name]), ex.mul(ex.Const(float(self.velocity[j])), xi1)),
                               ex.mul(ex.Const(float(self.normal[j])), xi2))
        out["t"] = ex.add(ex.Const(self.origin["t"]), xi1)
        return out


def local_frame(sc: GasScenario, at: Mapping[str, float], eps: float = 1e-12) -> Optional[LocalFrame]:
    """Frame moving with the particle at ``at``; None where the velocity vanishes."""
    at = {name: float(at[name]) for name in COORDS}
    U = vec.evaluate(sc.velocity, at)
    speed = float(np.linalg.norm(U))
    if speed <= eps:
        return None
    tangent = U / speed
    B = np.zeros(3)
    for term in sc.bracket_terms().values():
        B += vec.evaluate(term, at)
    normal = B - np.dot(B, tangent) * tangent
    fallback = False
    if np.linalg.norm(normal) <= eps * max(1.0, float(np.linalg.norm(B))):
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(tangent)))] = 1.0
        normal = axis - np.dot(axis, tangent) * tangent
        fallback = True
    return LocalFrame(at, U, normal / np.linalg.norm(normal), fallback)


def build_gas_evolutionary_relation(sc: GasScenario, at: Mapping[str, float]) -> FunctionalRelation:
    frame = local_frame(sc, at)
    if frame is None:
        raise PreconditionError(f"velocity vanishes at {dict(at)}; the trajectory frame is undefined")
    bindings = frame.bindings()
    T = ex.substitute(sc.temperature, bindings)
    n = tuple(ex.Const(float(c)) for c in frame.normal)
    sources = []
    for label, term in sc.bracket_terms().items():
        a2 = ex.div(vec.dot(vec.substitute(term, bindings), n), T)
        sources.append((label, DifferentialForm.from_components(FRAME, {"xi2": a2})))
    a1 = ex.substitute(sc.transport_term(), bindings)
    sources.append(("transport", DifferentialForm.from_components(FRAME, {"xi1": a1})))
    return FunctionalRelation.from_sources(sources, label=f"{sc.name} at {frame.origin}")


@dataclass
class PointAnalysis:
    point: Dict[str, float]
    identical: bool
    total: float
    terms: Dict[str, float]
    fallback_frame: bool


@dataclass
class GasAnalysis:
    scenario: str
    points: List[PointAnalysis]
    flagged: List[Dict[str, float]]
    tol: float
    grid: Grid

    @property
    def identical(self) -> bool:
        return all(p.identical for p in self.points)

    def max_term(self, label: str) -> float:
        return max((p.terms.get(label, 0.0) for p in self.points), default=0.0)

    @property
    def max_total(self) -> float:
        return max((p.total for p in self.points), default=0.0)

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(list(COORDS) + ["total"] + list(SOURCES))
        for p in self.points:
            writer.writerow([repr(p.point[c]) for c in COORDS] + [repr(p.total)]
                            + [repr(p.terms[s]) for s in SOURCES])


def _analyze_point(sc: GasScenario, at: Dict[str, float], tol: float) -> Optional[PointAnalysis]:
    try:
        rel = build_gas_evolutionary_relation(sc, at)
    except PreconditionError:
        return None
    report = analyze_relation(rel, Grid.point(ORIGIN), tol)
    terms = {name: value or 0.0 for name, value in report.per_term_breakdown[2:]}
    frame = local_frame(sc, at)
    return PointAnalysis(at, report.identical, report.max_total or 0.0, terms, frame.fallback)


def analyze_gas(sc: GasScenario, tol: float = DEFAULT_TOL, grid: Optional[Grid] = None,
                workers: Optional[int] = None) -> GasAnalysis:
    grid = grid or sc.grid()
    points = list(grid.points())
    temperature = ex.evaluate_grid(sc.temperature, grid.columns())
    if np.any(~(np.broadcast_to(temperature, (grid.size,)) > 0)):
        raise PreconditionError("temperature must be positive on the scenario domain")
    results = parallel_map(lambda at: _analyze_point(sc, at, tol), points, workers)
    flagged = [at for at, r in zip(points, results) if r is None]
    if flagged:
        logger.warning("%s: trajectory frame undefined (U = 0) at %d of %d points", sc.name, len(flagged),
                       len(points))
    return GasAnalysis(sc.name, [r for r in results if r is not None], flagged, tol, grid)


def additivity_defect(sc: GasScenario, at: Mapping[str, float]) -> float:
    """|sum of per-source commutators - commutator of the summed form| at one point."""
    rel = build_gas_evolutionary_relation(sc, at)
    whole = ex.evaluate(commutator_1form(rel.omega).total(0, 1), ORIGIN)
    parts = sum(ex.evaluate(commutator_1form(form).total(0, 1), ORIGIN) for _, form in rel.sources)
    return abs(whole - parts)


@dataclass
class InstabilityReport:
    scenario: str
    terms: Dict[str, float]
    regime: str
    predicted_structure: str
    dominant_source: Optional[str]
    identical: bool
    max_commutator: float
    flags: Dict[str, bool]
    sonic_line: DegeneracyCondition
    flagged_points: List[Dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "scenario": self.scenario,
            "terms": self.terms,
            "regime": self.regime,
            "predictedStructure": self.predicted_structure,
            "dominantSource": self.dominant_source,
            "identical": self.identical,
            "maxCommutator": self.max_commutator,
            "flags": self.flags,
            "sonicLine": self.sonic_line.to_dict(),
            "flaggedPoints": self.flagged_points,
        }


def classify_instability(sc: GasScenario, analysis: Optional[GasAnalysis] = None,
                         sound_speed: Optional[Expression] = None, tol: float = DEFAULT_TOL,
                         grid: Optional[Grid] = None) -> InstabilityReport:
    """Classify on the grid the analysis sampled; ``grid`` only applies when no analysis is given."""
    analysis = analysis or analyze_gas(sc, tol, grid)
    grid = analysis.grid
    if sound_speed is None:
        det = sc.mach_determinant()
    else:
        det = ex.sub(vec.dot(sc.velocity, sc.velocity), ex.power(ex.as_expression(sound_speed), ex.Const(2.0)))
    margin = ex.evaluate_grid(det, grid.columns())
    regime = "hyperbolic" if np.nanmax(margin) > 0 else "elliptic"
    sonic = degeneracy_scan(det, grid, tol)

    terms = {label: analysis.max_term(label) for label in SOURCES}
    dominant = None
    if analysis.max_total <= tol and all(terms[s] <= tol for s in STRUCTURAL_SOURCES):
        structure = EQUILIBRIUM
    elif terms["transport"] > tol:
        structure, dominant = TURBULENCE, "transport"
    else:
        # max() keeps the first of equal values, which gives the tie order.
        candidates = STRUCTURAL_SOURCES[:3]
        best = max(candidates, key=lambda s: terms[s])
        if terms[best] > tol:
            dominant = best
        if dominant == "nonstationarity":
            structure = SHOCK
        else:
            structure = SHOCK if regime == "hyperbolic" else VORTEX
    logger.info("%s: regime %s, dominant %s -> %s", sc.name, regime, dominant, structure)
    return InstabilityReport(
        sc.name, terms, regime, structure, dominant, analysis.identical, analysis.max_total,
        sc.flags(), sonic, analysis.flagged,
    )
