"""Ideal-gas thermodynamics: the first law as a nonidentical relation and 1/T as its integrating factor."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import expr as ex
from .errors import PreconditionError
from .expr import Expression
from .forms import DifferentialForm
from .grid import Grid
from .relations import (DEFAULT_TOL, FD_TOL, FunctionalRelation, analyze_relation, find_integrating_factor,
                        reconstruct_potential, verify_integrating_factor)

logger = logging.getLogger(__name__)

COORDS = ("T", "V")
_T, _V = ex.Var("T"), ex.Var("V")
GAMMA_RTOL = 1e-9


@dataclass(frozen=True)
class ThermoScenario:
    R: float = 1.0
    c_v: float = 2.5
    gamma: Optional[float] = None
    domain: Tuple[Tuple[float, float], Tuple[float, float]] = ((1.0, 10.0), (1.0, 5.0))
    isentropes: Tuple[Tuple[float, float], ...] = ((1.0, 1.0),)
    friction: Optional[Expression] = None

    def __post_init__(self):
        if not self.R > 0 or not self.c_v > 0:
            raise PreconditionError(f"gas constants must be positive: R={self.R}, c_v={self.c_v}")
        gamma = 1.0 + self.R / self.c_v
        if self.gamma is not None and not math.isclose(float(self.gamma), gamma, rel_tol=GAMMA_RTOL):
            raise PreconditionError(
                f"adiabatic index {self.gamma} disagrees with 1 + R/c_v = {gamma!r} for R={self.R}, c_v={self.c_v}"
            )
        object.__setattr__(self, "gamma", gamma)
        if self.friction is not None:
            object.__setattr__(self, "friction", ex.as_expression(self.friction))
        (t_lo, _), (v_lo, _) = self.domain
        if t_lo <= 0 or v_lo <= 0:
            raise PreconditionError("temperature and volume must stay positive on the domain")

    @property
    def energy(self) -> Expression:
        return ex.mul(ex.Const(self.c_v), _T)

    @property
    def pressure(self) -> Expression:
        return ex.div(ex.mul(ex.Const(self.R), _T), _V)

    @property
    def entropy(self) -> Expression:
        return ex.add(ex.mul(ex.Const(self.c_v), ex.ln(_T)), ex.mul(ex.Const(self.R), ex.ln(_V)))

    def grid(self, count: int = 20) -> Grid:
        (t_lo, t_hi), (v_lo, v_hi) = self.domain
        return Grid.uniform({"T": (t_lo, t_hi), "V": (v_lo, v_hi)}, count)

    def heat_form(self) -> DifferentialForm:
        """dE + p dV on (T, V)."""
        return energy_form(self) + work_form(self)

    def candidates(self) -> List[Expression]:
        one = ex.ONE
        return [one, ex.div(one, _T), ex.div(one, _V), ex.div(one, self.pressure)]


def energy_form(sc: ThermoScenario) -> DifferentialForm:
    return DifferentialForm.from_components(
        COORDS, {name: ex.differentiate(sc.energy, name) for name in COORDS}
    )


def work_form(sc: ThermoScenario) -> DifferentialForm:
    return DifferentialForm.from_components(COORDS, {"V": sc.pressure})


@dataclass
class ThermoReport:
    first_law_nonidentical: bool
    commutator: str
    max_commutator: Optional[float]
    factor_found: Optional[Expression]
    entropy: Expression
    entropy_residual: Optional[float]
    entropy_reconstruction_error: Optional[float]
    second_law_holds: bool
    sound_speed_squared: Expression
    sound_speed_error: float
    isentrope_constant: bool
    isentrope_deviation: float
    clausius_gap: Optional[float] = None
    diagnostics: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        out = {
            "firstLawNonidentical": self.first_law_nonidentical,
            "commutatorTV": self.commutator,
            "maxCommutator": self.max_commutator,
            "factorFound": ex.to_text(self.factor_found) if self.factor_found is not None else None,
            "entropy": ex.to_text(self.entropy),
            "entropyResidual": self.entropy_residual,
            "entropyReconstructionError": self.entropy_reconstruction_error,
            "secondLawHolds": self.second_law_holds,
            "soundSpeedSquared": ex.to_text(self.sound_speed_squared),
            "soundSpeedError": self.sound_speed_error,
            "isentropeConstant": self.isentrope_constant,
            "isentropeDeviation": self.isentrope_deviation,
            "diagnostics": self.diagnostics,
        }
        if self.clausius_gap is not None:
            out["clausiusGap"] = self.clausius_gap
            out["clausiusHolds"] = self.clausius_gap > 0
        return out


def sound_speed_squared(sc: ThermoScenario) -> Expression:
    """a^2 = gamma p / rho in the (p, rho) variables."""
    return ex.mul(ex.Const(sc.gamma), ex.div(ex.Var("p"), ex.Var("rho")))


def sample_isentrope(sc: ThermoScenario, rho0: float, p0: float, count: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """(rho, p) along the constant-entropy curve through (rho0, p0).

    The curve is traced in (T, V): V = 1/rho and T V^(R/c_v) held fixed.
    """
    if rho0 <= 0 or p0 <= 0:
        raise PreconditionError("isentrope seeds need positive density and pressure")
    rho = np.linspace(0.5 * rho0, 2.0 * rho0, count)
    V0, T0 = 1.0 / rho0, p0 / (sc.R * rho0)
    V = 1.0 / rho
    T = T0 * (V0 / V) ** (sc.R / sc.c_v)
    return rho, sc.R * T / V


def _isentrope_checks(sc: ThermoScenario, tol: float) -> Tuple[float, float, float]:
    deviation, speed_error, entropy_drift = 0.0, 0.0, 0.0
    a2 = sound_speed_squared(sc)
    for rho0, p0 in sc.isentropes:
        rho, p = sample_isentrope(sc, rho0, p0)
        K = p0 / rho0 ** sc.gamma
        deviation = max(deviation, float(np.max(np.abs(p / rho ** sc.gamma - K))))
        s = ex.evaluate_grid(sc.entropy, {"T": p / (sc.R * rho), "V": 1.0 / rho})
        entropy_drift = max(entropy_drift, float(np.max(np.abs(s - s[0]))))
        h = 1e-5 * rho
        slope = (K * (rho + h) ** sc.gamma - K * (rho - h) ** sc.gamma) / (2 * h)
        exact = ex.evaluate_grid(a2, {"p": p, "rho": rho})
        speed_error = max(speed_error, float(np.max(np.abs(slope - exact) / np.abs(exact))))
    return deviation, speed_error, entropy_drift


def run_thermo(sc: ThermoScenario, grid: Optional[Grid] = None, tol: float = DEFAULT_TOL) -> ThermoReport:
    grid = grid or sc.grid()
    theta = sc.heat_form()
    first_law = FunctionalRelation.from_sources(
        [("energy", energy_form(sc)), ("work", work_form(sc))], label="first law"
    )
    analysis = analyze_relation(first_law, grid, tol)
    K = analysis.commutator.total(0, 1)

    diagnostics = []
    factor = find_integrating_factor(theta, sc.candidates(), grid, tol)
    if factor is None:
        for candidate in sc.candidates():
            check = verify_integrating_factor(theta, candidate, grid, tol)
            diagnostics.append({"candidate": ex.to_text(candidate), "maxResidual": check.max_residual})
        logger.warning("no integrating factor among %d candidates", len(diagnostics))

    entropy = sc.entropy
    entropy_residual = reconstruction_error = None
    second_law = False
    if factor is not None:
        reduced = FunctionalRelation(theta.scale(factor), psi=entropy, label="second law")
        second = analyze_relation(reduced, grid, tol)
        entropy_residual = second.relation_defect
        values = reconstruct_potential(reduced.omega, grid)
        exact = ex.evaluate_grid(entropy, grid.columns())
        reconstruction_error = float(np.max(np.abs(values - (exact - exact[0]))))
        second_law = second.identical and entropy_residual is not None and entropy_residual <= tol

    deviation, speed_error, entropy_drift = _isentrope_checks(sc, tol)
    if entropy_drift > FD_TOL:
        logger.warning("entropy drifts by %g along a sampled isentrope", entropy_drift)

    gap = None
    if sc.friction is not None:
        gap = _clausius_gap(sc, grid)

    return ThermoReport(
        first_law_nonidentical=not analysis.identical,
        commutator=ex.to_text(K),
        max_commutator=analysis.max_total,
        factor_found=factor,
        entropy=entropy,
        entropy_residual=entropy_residual,
        entropy_reconstruction_error=reconstruction_error,
        second_law_holds=second_law,
        sound_speed_squared=sound_speed_squared(sc),
        sound_speed_error=speed_error,
        isentrope_constant=deviation <= tol,
        isentrope_deviation=deviation,
        clausius_gap=gap,
        diagnostics=diagnostics,
    )


def _clausius_gap(sc: ThermoScenario, grid: Grid) -> float:
    """Smallest value of dS - dQ/T on a unit expansion, when friction heats the gas internally.

    The heat received from outside is dE + (p - f) dV, so along dV > 0 the
    gap per unit volume is f / T.
    """
    heat = sc.heat_form() - DifferentialForm.from_components(COORDS, {"V": sc.friction})
    ds = DifferentialForm.from_components(COORDS, {name: ex.differentiate(sc.entropy, name) for name in COORDS})
    gap = ds - heat.scale(ex.div(ex.ONE, _T))
    values = ex.evaluate_grid(gap.coefficient(("V",)), grid.columns())
    return float(np.nanmin(values))
