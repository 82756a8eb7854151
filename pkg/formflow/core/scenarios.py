"""Named scenario presets, JSON scenario configs and a single entry point to run them."""
import io
import json
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

from . import expr as ex
from .electromagnetics import EMScenario, run_em
from .errors import ConfigError
from .gasdynamics import GasScenario, analyze_gas, classify_instability, newtonian_transport
from .grid import Grid
from .relations import DEFAULT_TOL
from .schema import SchemaValidator
from .thermo import ThermoScenario, run_thermo

logger = logging.getLogger(__name__)

KINDS = ("thermo", "gas", "em")
Scenario = Union[ThermoScenario, GasScenario, EMScenario]


# Thermodynamics

def ideal_gas(R: float = 1.0, c_v: float = 2.5) -> ThermoScenario:
    return ThermoScenario(R=R, c_v=c_v)


def irreversible_gas(R: float = 1.0, c_v: float = 2.5, friction: float = 0.05) -> ThermoScenario:
    """Ideal gas whose expansion work is partly dissipated by friction f = friction * R T / V."""
    return ThermoScenario(R=R, c_v=c_v, friction=ex.parse(f"{friction!r}*{R!r}*T/V"))


# Gas dynamics

def uniform_flow() -> GasScenario:
    return GasScenario(("1", "0", "0"), enthalpy="2", sound_speed="2",
                       domain={"x1": (0.0, 1.0), "x2": (0.0, 1.0)}, name="uniform")


def shock_tube() -> GasScenario:
    """Impulsively accelerated supersonic stream."""
    return GasScenario(("2", "0.5*t^2", "0"), sound_speed="1",
                       domain={"x1": (0.0, 1.0), "t": (0.5, 1.5)}, name="shock-tube")


def body_flow() -> GasScenario:
    """Slow stream past a body under a nonpotential body force."""
    return GasScenario(("0.3", "0", "0"), force=("0", "0.2*x1", "0"), sound_speed="1",
                       domain={"x1": (0.5, 1.5), "x2": (0.0, 1.0)}, name="body-flow")


def vortex() -> GasScenario:
    return GasScenario(("-x2", "x1", "0"), temperature="1 + 0.1*x1", sound_speed="2",
                       domain={"x1": (0.5, 1.0), "x2": (0.5, 1.0)}, name="vortex")


def boundary_layer(mu: float = 0.01, kappa: float = 0.5) -> GasScenario:
    """Shear flow over a heated wall, viscous and heat-conducting."""
    velocity = tuple(ex.parse(c) for c in ("x2", "0", "0"))
    temperature = ex.parse("1 + 0.1*x2")
    q, tau = newtonian_transport(velocity, temperature, mu, kappa)
    return GasScenario(velocity, temperature=temperature, sound_speed="1", heat_flux=q, stress=tau,
                       domain={"x1": (0.0, 1.0), "x2": (0.5, 1.0)}, name="boundary-layer")


# Electromagnetism

def _wave(profile: str, amplitude: float, c: float, k: float, sign: str) -> str:
    phase = f"({k!r}*(x {sign} {c!r}*t))"
    if profile == "cos":
        return f"{amplitude!r}*cos{phase}"
    return f"{amplitude!r}*exp(-((x {sign} {c!r}*t)^2))*cos{phase}"


def _wave_domain() -> Dict[str, Any]:
    return {"domain": {"x": (0.0, 3.0), "t": (0.0, 1.0)}, "counts": {"x": 31, "t": 11}}


def plane_wave(amplitude: float = 1.0, c: float = 1.0, k: float = 1.0, profile: str = "cos") -> EMScenario:
    f = _wave(profile, amplitude, c, k, "-")
    return EMScenario(("0", f, "0"), ("0", "0", f), c=c, name="plane-wave", **_wave_domain())


def reversed_wave(amplitude: float = 1.0, c: float = 1.0, k: float = 1.0) -> EMScenario:
    f = _wave("cos", amplitude, c, k, "+")
    return EMScenario(("0", f, "0"), ("0", "0", f), c=c, name="reversed-wave", **_wave_domain())


def envelope_wave(amplitude: float = 1.0, c: float = 1.0, k: float = 1.0) -> EMScenario:
    sc = plane_wave(amplitude, c, k, profile="envelope")
    return EMScenario(sc.electric, sc.magnetic, c=c, name="envelope-wave", **_wave_domain())


def static_field(c: float = 1.0) -> EMScenario:
    return EMScenario(("0", "1", "0"), ("0", "0", "1"), c=c, name="static", **_wave_domain())


def charged_wave(amplitude: float = 1.0, c: float = 1.0, k: float = 1.0, density: float = 0.1) -> EMScenario:
    """Plane wave driving charges that move across it."""
    f = _wave("cos", amplitude, c, k, "-")
    return EMScenario(("0", f, "0"), ("0", "0", f), c=c, charge_density=repr(density),
                      charge_velocity=("0", "0.5", "0"), name="charged-wave", **_wave_domain())


PRESETS: Dict[str, Dict[str, Callable[[], Scenario]]] = {
    "thermo": {"ideal-gas": ideal_gas, "irreversible": irreversible_gas},
    "gas": {
        "uniform": uniform_flow,
        "shock-tube": shock_tube,
        "body-flow": body_flow,
        "vortex": vortex,
        "boundary-layer": boundary_layer,
    },
    "em": {
        "plane-wave": plane_wave,
        "reversed-wave": reversed_wave,
        "envelope-wave": envelope_wave,
        "static": static_field,
        "charged-wave": charged_wave,
    },
}


def preset(kind: str, name: str) -> Scenario:
    if kind not in PRESETS:
        raise ConfigError(f"unknown scenario kind '{kind}', expected one of {KINDS}")
    try:
        factory = PRESETS[kind][name]
    except KeyError:
        raise ConfigError(f"unknown {kind} preset '{name}', expected one of {sorted(PRESETS[kind])}") from None
    return factory()


# JSON configs

def _expression(value: Union[str, float], constants: Mapping[str, float]) -> ex.Expression:
    return ex.substitute(ex.as_expression(value), constants)


def _vector(values, constants):
    return tuple(_expression(v, constants) for v in values)


def _domain(document: Mapping) -> Dict[str, Tuple[float, float]]:
    return {name: (float(lo), float(hi)) for name, (lo, hi) in document.get("domain", {}).items()}


def scenario_from_config(document: Mapping[str, Any]) -> Tuple[str, Scenario]:
    validator = SchemaValidator()
    validator.require(document, validator.packaged_schema("scenario_config"), "scenario config")
    kind = document["scenario"]
    if "preset" in document:
        return kind, preset(kind, document["preset"])
    constants = {k: float(v) for k, v in document.get("constants", {}).items()}
    fields = document.get("fields", {})
    name = document.get("name", "custom")
    if kind == "thermo":
        domain = document.get("domain", {})
        kwargs = {"R": constants.get("R", 1.0), "c_v": constants.get("c_v", 2.5), "gamma": constants.get("gamma")}
        if domain:
            kwargs["domain"] = (tuple(domain["T"]), tuple(domain["V"]))
        if "isentropes" in document:
            kwargs["isentropes"] = tuple(tuple(pair) for pair in document["isentropes"])
        if "friction" in fields:
            kwargs["friction"] = _expression(fields["friction"], constants)
        return kind, ThermoScenario(**kwargs)
    if kind == "gas":
        velocity = _vector(fields["velocity"], constants)
        temperature = _expression(fields.get("temperature", 1.0), constants)
        heat_flux = _vector(fields["heatFlux"], constants) if "heatFlux" in fields else None
        stress = tuple(_vector(row, constants) for row in fields["stress"]) if "stress" in fields else None
        if "transport" in document:
            transport = document["transport"]
            heat_flux, stress = newtonian_transport(velocity, temperature, float(transport["mu"]),
                                                    float(transport["kappa"]))
        flags = document.get("flags", {})
        return kind, GasScenario(
            velocity,
            enthalpy=_expression(fields.get("enthalpy", 0.0), constants),
            force=_vector(fields.get("force", [0, 0, 0]), constants),
            temperature=temperature,
            sound_speed=_expression(fields.get("soundSpeed", 1.0), constants),
            density=_expression(fields.get("density", 1.0), constants),
            heat_flux=heat_flux,
            stress=stress,
            nonstationary=flags.get("nonstationary"),
            multiply_connected=flags.get("multiplyConnected"),
            nonpotential_force=flags.get("nonpotentialForce"),
            viscous_heat_conducting=flags.get("viscousHeatConducting"),
            domain=_domain(document),
            count=int(document.get("count", 3)),
            name=name,
        )
    return kind, EMScenario(
        _vector(fields["electric"], constants),
        _vector(fields["magnetic"], constants),
        c=constants.get("c", 1.0),
        charge_density=_expression(fields.get("chargeDensity", 0.0), constants),
        charge_velocity=_vector(fields.get("chargeVelocity", [0, 0, 0]), constants),
        domain=_domain(document),
        counts={k: int(v) for k, v in document.get("counts", {}).items()},
        name=name,
    )


def load_scenario_config(path: str) -> Tuple[str, Scenario]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    return scenario_from_config(document)


# Running

@dataclass
class ScenarioOutcome:
    kind: str
    payload: Dict[str, Any]
    csv_text: Optional[str] = None


def run_scenario(kind: str, scenario: Scenario, tol: float = DEFAULT_TOL,
                 grid: Optional[Grid] = None) -> ScenarioOutcome:
    if kind == "thermo":
        return ScenarioOutcome(kind, {"scenario": "thermo", **run_thermo(scenario, grid, tol).to_dict()})
    if kind == "gas":
        analysis = analyze_gas(scenario, tol, grid)
        report = classify_instability(scenario, analysis, tol=tol)
        stream = io.StringIO()
        analysis.write_csv(stream)
        return ScenarioOutcome(kind, report.to_dict(), stream.getvalue())
    if kind == "em":
        report = run_em(scenario, grid, tol)
        stream = io.StringIO()
        report.write_csv(stream)
        return ScenarioOutcome(kind, report.to_dict(), stream.getvalue())
    raise ConfigError(f"unknown scenario kind '{kind}', expected one of {KINDS}")
