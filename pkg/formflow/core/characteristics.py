"""Characteristics of first-order PDEs and canonical systems of Hamilton-Jacobi equations.

The systems are integrated with a fixed-step classical RK4 scheme. Bundles of
trajectories seeded from Cauchy data make up the surface on which the form
``p_i dx^i`` turns into the differential of ``u``; ``verify_closure`` measures
that on the bundle and measures the commutator of the same form off it.
"""
import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from . import expr as ex
from .errors import DomainViolationError, PreconditionError, UnboundVariableError
from .expr import Expression
from .forms import DifferentialForm, commutator_1form, max_abs, sample
from .grid import Axis, Grid, box_around
from .relations import scan_values
from .workers import parallel_map

logger = logging.getLogger(__name__)

UNKNOWN = "u"


def momentum_name(coord: str) -> str:
    return f"p_{coord}"


def _check_free(e: Expression, allowed: Sequence[str]) -> None:
    extra = sorted(ex.free_variables(e) - set(allowed))
    if extra:
        raise UnboundVariableError(extra[0])


@dataclass(frozen=True)
class FirstOrderPDE:
    """F(x, u, p) = 0 with p_i standing for du/dx^i."""
    coords: Tuple[str, ...]
    F: Expression
    momenta: Tuple[str, ...] = ()
    unknown: str = UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "F", ex.as_expression(self.F))
        momenta = tuple(self.momenta) or tuple(momentum_name(c) for c in self.coords)
        if len(momenta) != len(self.coords):
            raise PreconditionError(f"{len(momenta)} momenta for {len(self.coords)} coordinates")
        object.__setattr__(self, "momenta", momenta)
        _check_free(self.F, self.coords + momenta + (self.unknown,))

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class HamiltonJacobiProblem:
    """du/dt + E(t, x, p) = 0."""
    coords: Tuple[str, ...]
    E: Expression
    momenta: Tuple[str, ...] = ()
    time: str = "t"
    unknown: str = UNKNOWN

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "E", ex.as_expression(self.E))
        if not self.momenta:
            momenta = ("p",) if len(coords) == 1 else tuple(momentum_name(c) for c in coords)
        else:
            momenta = tuple(self.momenta)
        if len(momenta) != len(coords):
            raise PreconditionError(f"{len(momenta)} momenta for {len(coords)} coordinates")
        object.__setattr__(self, "momenta", momenta)
        if ex.depends_on(self.E, self.unknown):
            raise PreconditionError(f"E must not depend on the unknown '{self.unknown}'")
        _check_free(self.E, coords + momenta + (self.time,))

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def autonomous(self) -> bool:
        return not ex.depends_on(self.E, self.time)


Problem = Union[FirstOrderPDE, HamiltonJacobiProblem]


@dataclass(frozen=True)
class CharacteristicSystem:
    parameter: str
    coords: Tuple[str, ...]
    momenta: Tuple[str, ...]
    unknown: str
    rhs: Tuple[Expression, ...]

    def __post_init__(self):
        if len(self.rhs) != len(self.state):
            raise PreconditionError(f"{len(self.rhs)} right-hand sides for {len(self.state)} state variables")

    @property
    def state(self) -> Tuple[str, ...]:
        return self.coords + self.momenta + (self.unknown,)

    @property
    def autonomous(self) -> bool:
        return not any(ex.depends_on(e, self.parameter) for e in self.rhs)

    def rhs_of(self, name: str) -> Expression:
        return self.rhs[self.state.index(name)]

    def compile(self) -> Callable[[float, np.ndarray], np.ndarray]:
        names = self.state + (self.parameter,)
        compiled = [ex.compile_expression(e, names) for e in self.rhs]

        def f(s: float, y: np.ndarray) -> np.ndarray:
            values = list(y) + [s]
            return np.array([g(values) for g in compiled])

        return f

    def describe(self) -> Dict[str, str]:
        return {f"d{name}/d{self.parameter}": ex.to_text(e) for name, e in zip(self.state, self.rhs)}


def build_characteristic_system(pde: FirstOrderPDE, parameter: str = "s") -> CharacteristicSystem:
    """dx/ds = F_p, dp/ds = -(F_x + p F_u), du/ds = sum p F_p."""
    F, u = pde.F, pde.unknown
    F_u = ex.differentiate(F, u)
    F_p = [ex.differentiate(F, p) for p in pde.momenta]
    dp = [
        ex.neg(ex.add(ex.differentiate(F, x), ex.mul(ex.Var(p), F_u)))
        for x, p in zip(pde.coords, pde.momenta)
    ]
    du = ex.ZERO
    for p, fp in zip(pde.momenta, F_p):
        du = ex.add(du, ex.mul(ex.Var(p), fp))
    return CharacteristicSystem(parameter, pde.coords, pde.momenta, u, tuple(F_p) + tuple(dp) + (du,))


def build_canonical_system(hj: HamiltonJacobiProblem) -> CharacteristicSystem:
    """dx/dt = E_p, dp/dt = -E_x, du/dt = sum p E_p - E."""
    E = hj.E
    E_p = [ex.differentiate(E, p) for p in hj.momenta]
    dp = [ex.neg(ex.differentiate(E, x)) for x in hj.coords]
    du = ex.neg(E)
    for p, ep in zip(hj.momenta, E_p):
        du = ex.add(du, ex.mul(ex.Var(p), ep))
    return CharacteristicSystem(hj.time, hj.coords, hj.momenta, hj.unknown, tuple(E_p) + tuple(dp) + (du,))


def system_for(problem: Problem) -> CharacteristicSystem:
    if isinstance(problem, HamiltonJacobiProblem):
        return build_canonical_system(problem)
    return build_characteristic_system(problem)


@dataclass
class Trajectory:
    parameter: str
    names: Tuple[str, ...]
    params: np.ndarray
    states: np.ndarray
    step: float
    method: str = "rk4"
    error: Optional[str] = None
    failed_step: Optional[int] = None

    @property
    def truncated(self) -> bool:
        return self.error is not None

    def __len__(self) -> int:
        return len(self.params)

    def column(self, name: str) -> np.ndarray:
        if name == self.parameter:
            return self.params
        try:
            return self.states[:, self.names.index(name)]
        except ValueError:
            raise UnboundVariableError(name) from None

    def columns(self) -> Dict[str, np.ndarray]:
        out = {name: self.states[:, i] for i, name in enumerate(self.names)}
        out[self.parameter] = self.params
        return out

    def point(self, i: int) -> Dict[str, float]:
        out = {name: float(v) for name, v in zip(self.names, self.states[i])}
        out[self.parameter] = float(self.params[i])
        return out

    def final(self) -> Dict[str, float]:
        return self.point(len(self) - 1)

    def write_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow((self.parameter,) + self.names)
        for s, row in zip(self.params, self.states):
            writer.writerow([repr(float(s))] + [repr(float(v)) for v in row])


def integrate(system: CharacteristicSystem, init: Mapping[str, float], step: float, steps: int) -> Trajectory:
    """Classical RK4 with a uniform step; a domain violation truncates the trajectory."""
    if not step > 0:
        raise PreconditionError(f"step must be positive, got {step}")
    if steps < 0:
        raise PreconditionError(f"step count must be non-negative, got {steps}")
    for name in system.state:
        if name not in init:
            raise UnboundVariableError(name)
    f = system.compile()
    s0 = float(init.get(system.parameter, 0.0))
    y = np.array([float(init[name]) for name in system.state])
    states = [y]
    error, failed = None, None
    for i in range(steps):
        s = s0 + i * step
        try:
            k1 = f(s, y)
            k2 = f(s + step / 2, y + step / 2 * k1)
            k3 = f(s + step / 2, y + step / 2 * k2)
            k4 = f(s + step, y + step * k3)
        except DomainViolationError as exc:
            error, failed = str(exc), i + 1
            break
        y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            error, failed = "state left the finite range", i + 1
            break
        states.append(y)
    if error is not None:
        logger.warning("trajectory truncated at step %d: %s", failed, error)
    params = s0 + step * np.arange(len(states))
    return Trajectory(system.parameter, system.state, params, np.vstack(states), step, "rk4", error, failed)


@dataclass(frozen=True)
class CauchyData:
    """Initial values on a surface parameterised by one seed coordinate.

    ``fixed`` pins the remaining coordinates (for a PDE, typically ``t = 0``).
    Momenta default to the gradient of ``u0``; for a PDE the momentum of a
    fixed coordinate is solved from F = 0 when F is linear in it.
    """
    u0: Expression
    seed: str
    fixed: Mapping[str, float] = field(default_factory=dict)
    momenta: Mapping[str, Expression] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "u0", ex.as_expression(self.u0))
        object.__setattr__(self, "fixed", dict(self.fixed))
        object.__setattr__(self, "momenta", {k: ex.as_expression(v) for k, v in self.momenta.items()})


def initial_momenta(problem: Problem, data: CauchyData) -> Dict[str, Expression]:
    """Momentum expressions on the initial surface, keyed by momentum name."""
    out: Dict[str, Expression] = {}
    for x, p in zip(problem.coords, problem.momenta):
        if p in data.momenta:
            out[p] = data.momenta[p]
        elif x in data.momenta:
            out[p] = data.momenta[x]
        elif x not in data.fixed or isinstance(problem, HamiltonJacobiProblem):
            out[p] = ex.differentiate(data.u0, x)
    if isinstance(problem, FirstOrderPDE):
        for x, p in zip(problem.coords, problem.momenta):
            if p not in out:
                out[p] = _solve_linear_momentum(problem, p, out, data.u0)
    return out


def _solve_linear_momentum(pde: FirstOrderPDE, p: str, known: Mapping[str, Expression],
                           u0: Expression) -> Expression:
    bindings = dict(known)
    bindings[pde.unknown] = u0
    F = ex.substitute(pde.F, bindings)
    slope = ex.differentiate(F, p)
    if slope == ex.ZERO:
        raise PreconditionError(f"initial surface is characteristic: F does not depend on {p}")
    if ex.depends_on(slope, p):
        raise PreconditionError(f"F is not linear in {p}; give its initial value in the Cauchy data")
    return ex.neg(ex.div(ex.substitute(F, {p: 0.0}), slope))


@dataclass
class TrajectoryBundle:
    problem: Problem
    data: CauchyData
    system: CharacteristicSystem
    seeds: np.ndarray
    trajectories: List[Trajectory]
    momenta: Dict[str, Expression]

    @property
    def length(self) -> int:
        return min(len(t) for t in self.trajectories)

    def stacked(self, name: str) -> np.ndarray:
        """(seeds, samples) array of one variable, cut to the shortest trajectory."""
        m = self.length
        return np.vstack([t.column(name)[:m] for t in self.trajectories])

    def reference(self) -> Trajectory:
        return self.trajectories[len(self.trajectories) // 2]


def _initial_point(problem: Problem, data: CauchyData, momenta: Mapping[str, Expression],
                   sigma: float) -> Dict[str, float]:
    at: Dict[str, float] = dict(data.fixed)
    at[data.seed] = float(sigma)
    if isinstance(problem, HamiltonJacobiProblem):
        at.setdefault(problem.time, 0.0)
    missing = [x for x in problem.coords if x not in at]
    if missing:
        raise PreconditionError(f"Cauchy data leaves coordinates {missing} unset")
    init = {x: at[x] for x in problem.coords}
    if isinstance(problem, HamiltonJacobiProblem):
        init[problem.time] = at[problem.time]
    for p in problem.momenta:
        init[p] = ex.evaluate(momenta[p], at)
    init[problem.unknown] = ex.evaluate(data.u0, at)
    return init


def build_bundle(problem: Problem, data: CauchyData, seeds: Sequence[float], step: float, steps: int,
                 workers: Optional[int] = None) -> TrajectoryBundle:
    seeds = np.asarray(seeds, dtype=float)
    if len(seeds) < 2 or float(np.ptp(seeds)) == 0.0:
        raise PreconditionError("degenerate bundle: need at least two distinct seeds")
    if np.any(np.diff(seeds) <= 0):
        raise PreconditionError("bundle seeds must be strictly increasing")
    if data.seed not in problem.coords:
        raise PreconditionError(f"seed coordinate '{data.seed}' is not a coordinate of the problem")
    system = system_for(problem)
    momenta = initial_momenta(problem, data)
    inits = [_initial_point(problem, data, momenta, sigma) for sigma in seeds]
    trajectories = parallel_map(lambda init: integrate(system, init, step, steps), inits, workers)
    truncated = sum(1 for t in trajectories if t.truncated)
    if truncated:
        logger.warning("%d of %d trajectories truncated", truncated, len(trajectories))
    return TrajectoryBundle(problem, data, system, seeds, trajectories, momenta)


def ambient_form(problem: Problem, momenta: Mapping[str, Expression]) -> DifferentialForm:
    """p_i dx^i (Hamilton-Jacobi: -E dt + p_j dx^j) with p frozen at its initial-surface expression."""
    components = {x: momenta[p] for x, p in zip(problem.coords, problem.momenta)}
    if isinstance(problem, HamiltonJacobiProblem):
        energy = ex.neg(ex.substitute(problem.E, {p: momenta[p] for p in problem.momenta}))
        return DifferentialForm.from_components((problem.time,) + problem.coords,
                                                dict(components, **{problem.time: energy}))
    return DifferentialForm.from_components(problem.coords, components)


@dataclass
class ClosureResidualReport:
    on_residual: Optional[float]
    off_residual: Optional[float]
    strip_residual: float
    caustic_points: List[Dict[str, float]]
    energy_drift: Optional[float] = None
    truncated_trajectories: int = 0

    def to_dict(self) -> Dict:
        out = {
            "onResidual": self.on_residual,
            "offResidual": self.off_residual,
            "stripResidual": self.strip_residual,
            "causticPoints": self.caustic_points,
            "truncatedTrajectories": self.truncated_trajectories,
        }
        if self.energy_drift is not None:
            out["energyDrift"] = self.energy_drift
        return out


def _finite_max(values: np.ndarray) -> float:
    values = np.abs(values[np.isfinite(values)])
    return float(values.max()) if values.size else 0.0


def _rate(trajectory: Trajectory, name: str) -> np.ndarray:
    """d(name)/ds from the stored samples, second order where the trajectory allows it."""
    order = 2 if len(trajectory) >= 3 else 1
    return np.gradient(trajectory.column(name), trajectory.params, edge_order=order)


def _on_residual(bundle: TrajectoryBundle) -> Optional[float]:
    """max |du/ds - sum p_i dx^i/ds| (Hamilton-Jacobi: + E dt/ds) over the integrated samples.

    The derivatives come from the stored states, so the value reflects the
    actual paths; its floor is the O(step^2) error of the differences.
    """
    problem = bundle.problem
    residual: Optional[float] = None
    for t in bundle.trajectories:
        if len(t) < 2:
            continue
        columns = t.columns()
        gap = _rate(t, problem.unknown)
        for x, p in zip(problem.coords, problem.momenta):
            gap = gap - t.column(p) * _rate(t, x)
        checks = []
        if isinstance(problem, HamiltonJacobiProblem):
            energy = np.broadcast_to(ex.evaluate_grid(problem.E, columns), t.params.shape)
            gap = gap + energy * _rate(t, problem.time)
        else:
            checks.append(np.broadcast_to(ex.evaluate_grid(problem.F, columns), t.params.shape))
        checks.append(gap)
        residual = max([residual or 0.0] + [_finite_max(c) for c in checks])
    return residual


def _strip_residual(bundle: TrajectoryBundle) -> float:
    if bundle.length == 0:
        return 0.0
    order = 2 if len(bundle.seeds) >= 3 else 1
    gradient = lambda a: np.gradient(a, bundle.seeds, axis=0, edge_order=order)
    residual = gradient(bundle.stacked(bundle.problem.unknown))
    for x, p in zip(bundle.problem.coords, bundle.problem.momenta):
        residual = residual - bundle.stacked(p) * gradient(bundle.stacked(x))
    return _finite_max(residual)


def _caustics(bundle: TrajectoryBundle, tol: float) -> List[Dict[str, float]]:
    m = bundle.length
    if m == 0:
        return []
    order = 2 if len(bundle.seeds) >= 3 else 1
    jacobian = np.gradient(bundle.stacked(bundle.data.seed), bundle.seeds, axis=0, edge_order=order)
    params = bundle.reference().params[:m]
    grid = Grid((
        Axis(bundle.system.parameter, float(params[0]), float(params[-1]), m, tuple(float(s) for s in params)),
        Axis("sigma", float(bundle.seeds[0]), float(bundle.seeds[-1]), len(bundle.seeds),
             tuple(float(s) for s in bundle.seeds)),
    ))
    scan = scan_values(jacobian.T.ravel(), grid, tol)
    points = list(scan.zero_set)
    for a, b in scan.brackets:
        points.append({k: 0.5 * (a[k] + b[k]) for k in a})
    return points


def _energy_drift(bundle: TrajectoryBundle) -> Optional[float]:
    problem = bundle.problem
    if not isinstance(problem, HamiltonJacobiProblem) or not problem.autonomous:
        return None
    drift = 0.0
    for t in bundle.trajectories:
        energy = ex.evaluate_grid(problem.E, t.columns())
        drift = max(drift, _finite_max(energy - energy[0]))
    return drift


def verify_closure(bundle: TrajectoryBundle, tol: float = 1e-9, box_count: int = 8) -> ClosureResidualReport:
    on = _on_residual(bundle)
    strip = _strip_residual(bundle)
    theta = ambient_form(bundle.problem, bundle.momenta)
    box = box_around({name: np.concatenate([t.column(name) for t in bundle.trajectories])
                      for name in theta.coords}, count=box_count)
    field_ = commutator_1form(theta)
    off, _, skipped = max_abs(sample([field_.total(a, b) for a, b in field_.pairs()], box), box)
    if skipped:
        logger.warning("ambient commutator undefined at %d of %d box points", skipped, box.size)
    caustics = _caustics(bundle, tol)
    if caustics:
        logger.info("%d caustic points detected in the bundle", len(caustics))
    return ClosureResidualReport(
        on, off, strip, caustics, _energy_drift(bundle),
        sum(1 for t in bundle.trajectories if t.truncated),
    )
