import io

import pytest

from formflow.core import expr as ex
from formflow.core.errors import PreconditionError
from formflow.core.gasdynamics import (EQUILIBRIUM, SHOCK, SOURCES, TURBULENCE, VORTEX, GasScenario, additivity_defect,
                                       analyze_gas, build_gas_evolutionary_relation, classify_instability, local_frame,
                                       newtonian_transport)
from formflow.core.relations import analyze_relation
from formflow.core.grid import Grid
from formflow.core.scenarios import body_flow, boundary_layer, shock_tube, uniform_flow, vortex

ORIGIN = {"xi1": 0.0, "xi2": 0.0}


def at(**values):
    point = {"x1": 0.0, "x2": 0.0, "x3": 0.0, "t": 0.0}
    point.update(values)
    return point


class TestPresets:
    def test_uniform_flow_is_in_equilibrium(self):
        report = classify_instability(uniform_flow())
        assert report.predicted_structure == EQUILIBRIUM
        assert report.dominant_source is None
        assert report.identical
        assert report.regime == "elliptic"

    def test_shock_tube(self):
        report = classify_instability(shock_tube())
        assert report.predicted_structure == SHOCK
        assert report.dominant_source == "nonstationarity"
        assert report.regime == "hyperbolic"
        assert report.flags["nonstationary"]

    def test_body_flow(self):
        report = classify_instability(body_flow())
        assert report.predicted_structure == VORTEX
        assert report.dominant_source == "force"
        assert report.terms["force"] == pytest.approx(0.06)
        assert report.regime == "elliptic"
        assert report.flags["nonpotentialForce"]

    def test_vortex(self):
        report = classify_instability(vortex())
        assert report.predicted_structure == VORTEX
        assert report.dominant_source == "vorticity"
        assert report.flags["multiplyConnected"]

    def test_boundary_layer(self):
        report = classify_instability(boundary_layer())
        assert report.predicted_structure == TURBULENCE
        assert report.dominant_source == "transport"
        assert report.flags["viscousHeatConducting"]

    def test_payload_keys(self):
        data = classify_instability(body_flow()).to_dict()
        assert set(data) == {"scenario", "terms", "regime", "predictedStructure", "dominantSource", "identical",
                             "maxCommutator", "flags", "sonicLine", "flaggedPoints"}
        assert set(data["terms"]) == set(SOURCES)


class TestSoundSpeedOverride:
    def test_subsonic_shock_tube_still_shocks(self):
        report = classify_instability(shock_tube(), sound_speed="10")
        assert report.regime == "elliptic"
        assert report.predicted_structure == SHOCK

    def test_hyperbolic_body_flow_shocks(self):
        report = classify_instability(body_flow(), sound_speed="0.1")
        assert report.regime == "hyperbolic"
        assert report.predicted_structure == SHOCK

    def test_sonic_line(self):
        sc = GasScenario(("x1", "0", "0"), domain={"x1": (0.5, 1.5)}, count=3)
        report = classify_instability(sc)
        assert report.sonic_line.zero_set == [at(x1=1.0)]

    def test_classification_samples_the_analysis_grid(self):
        sc = GasScenario(("x1", "0", "0"), domain={"x1": (0.5, 1.5)}, count=3)
        grid = Grid.from_spec("x1=0.5:0.9:3,x2=0:0:1,x3=0:0:1,t=0:0:1")
        for report in (classify_instability(sc, analyze_gas(sc, grid=grid)), classify_instability(sc, grid=grid)):
            assert report.regime == "elliptic"
            assert report.sonic_line.zero_set == []
            assert report.sonic_line.brackets == []


class TestEvolutionaryRelation:
    def test_body_force_commutator(self):
        rel = build_gas_evolutionary_relation(body_flow(), at(x1=1.0, x2=0.5))
        report = analyze_relation(rel, Grid.point(ORIGIN))
        assert dict(report.per_term_breakdown)["force"] == pytest.approx(0.06)
        assert not report.identical

    def test_vanishing_velocity_has_no_frame(self):
        sc = GasScenario(("x1", "0", "0"))
        assert local_frame(sc, at()) is None
        with pytest.raises(PreconditionError):
            build_gas_evolutionary_relation(sc, at())

    def test_frame_without_normal_source_falls_back(self):
        frame = local_frame(uniform_flow(), at(x1=0.5))
        assert frame.fallback
        assert abs(frame.normal @ frame.velocity) < 1e-12

    def test_sources_are_additive(self):
        assert additivity_defect(vortex(), at(x1=0.7, x2=0.8)) < 1e-12
        assert additivity_defect(boundary_layer(), at(x1=0.5, x2=0.6)) < 1e-12


class TestAnalyzeGas:
    def test_stagnation_points_are_flagged(self):
        sc = GasScenario(("x1", "0", "0"), domain={"x1": (0.0, 1.0)}, count=3)
        analysis = analyze_gas(sc)
        assert analysis.flagged == [at()]
        assert len(analysis.points) == 2

    def test_temperature_must_be_positive(self):
        sc = GasScenario(("1", "0", "0"), temperature="x1 - 0.5", domain={"x1": (0.0, 1.0)})
        with pytest.raises(PreconditionError):
            analyze_gas(sc)

    def test_workers_do_not_change_results(self):
        serial = analyze_gas(vortex(), workers=0)
        threaded = analyze_gas(vortex(), workers=4)
        assert [p.total for p in serial.points] == [p.total for p in threaded.points]

    def test_csv_layout(self):
        stream = io.StringIO()
        analyze_gas(body_flow()).write_csv(stream)
        lines = stream.getvalue().splitlines()
        assert lines[0] == "x1,x2,x3,t,total,enthalpy,vorticity,force,nonstationarity,transport"
        assert len(lines) == 1 + 9


class TestScenario:
    def test_foreign_variables_are_rejected(self):
        with pytest.raises(PreconditionError):
            GasScenario(("y", "0", "0"))

    def test_flags_follow_the_fields(self):
        sc = GasScenario(("1", "0", "0"))
        assert sc.flags() == {"nonstationary": False, "multiplyConnected": False, "nonpotentialForce": False,
                              "viscousHeatConducting": False}

    def test_explicit_flag_switches_a_source_off(self):
        sc = GasScenario(("0.3", "0", "0"), force=("0", "0.2*x1", "0"), nonpotential_force=False,
                         domain={"x1": (0.5, 1.5)})
        assert classify_instability(sc).predicted_structure == EQUILIBRIUM

    def test_newtonian_transport(self):
        q, tau = newtonian_transport(tuple(ex.parse(c) for c in ("x2", "0", "0")), ex.parse("x2"), 0.5, 2.0)
        assert ex.evaluate(q[1], {}) == pytest.approx(-2.0)
        assert ex.evaluate(tau[1][0], {}) == pytest.approx(0.5)
        assert ex.evaluate(tau[0][1], {}) == pytest.approx(0.5)
        assert tau[0][0] == ex.ZERO
