from pathlib import Path

import pytest

from formflow import Assertions, Expect, RunConfig, Test
from formflow.core.cli import cmd_analyze, cmd_characteristics, cmd_classify, cmd_scenario
from formflow.core.errors import DslSyntaxError

HERE = Path(__file__).resolve().parent
SCHEMAS = HERE / "schemas"


class TestExample(Test):
    def setup_method(self):
        super().setup_method()
        self.config = RunConfig()

    def run_file(self, command, name, **options):
        config = self.config.for_command(command).from_file(str(HERE / name))
        if command == "analyze":
            return cmd_analyze(config)
        return cmd_characteristics(config, **options)

    def test_first_law(self):
        """dE + p dV has a commutator R/V, largest on the smallest volume"""
        report = self.run_file("analyze", "first_law.ff")

        Expect(report) \
            .body("identical").is_false() \
            .body("maxTotal").close_to(1.0) \
            .body("worstPoint.V").close_to(1.0) \
            .body().matches_schema(str(SCHEMAS / "relation_report.json"))
        Expect(report).body().satisfies(lambda data: "relationDefect" not in data).ok()

    def test_exact_relation_and_two_form(self):
        report = self.run_file("analyze", "exact_form.ff")

        Expect(report) \
            .body("relations[0].identical").is_true() \
            .body("relations[0].relationDefect").less_than(1e-9) \
            .body("forms[0].closed").is_false() \
            .body("forms[0].maxResidual").close_to(3.0) \
            .ok()

    def test_malformed_input(self):
        text = (HERE / "malformed.ff").read_text(encoding="utf-8")
        with pytest.raises(DslSyntaxError) as info:
            self.run_file("analyze", "malformed.ff")
        Assertions.assertClose(info.value.offset, text.index("*dy"))

    def test_free_particle(self):
        """The pseudostructure from u0 = x^2/2 carries a closed p dx - E dt"""
        report = self.run_file("characteristics", "free_particle.ff")

        Expect(report) \
            .body("trajectories").equals(5) \
            .body("onResidual").less_than(1e-7) \
            .body("offResidual").greater_than(0.1) \
            .body("causticPoints").has_length(0) \
            .ok()

    def test_oscillator_conserves_energy(self):
        report = self.run_file("characteristics", "oscillator.ff")

        Expect(report) \
            .body("energyDrift").less_than(1e-9) \
            .body("final.t").close_to(6.283, rel=1e-9) \
            .ok()

    def test_advection_carries_the_profile(self):
        report = self.run_file("characteristics", "advection.ff")

        Expect(report) \
            .body("parameter").equals("s") \
            .body("onResidual").less_than(1e-9) \
            .ok()
        Assertions.assertClose(report.json_data["final"]["x"], 0.5 + 2.0, rel=1e-12)

    def test_gas_config(self):
        report = cmd_scenario(self.config, None, None, str(HERE / "body_flow.json"))

        Expect(report) \
            .body("predictedStructure").equals("vortex / convective") \
            .body("dominantSource").equals("force") \
            .body("terms.force").close_to(0.06, rel=1e-9) \
            .body().matches_schema(str(SCHEMAS / "instability_report.json")) \
            .ok()
        assert report.csv_text.startswith("x1,x2,x3,t,total")

    def test_graviton(self):
        report = cmd_classify(3, 3, None, False)

        Expect(report) \
            .body("particleLabel").equals("graviton") \
            .body("interaction").equals("gravitation") \
            .body("uncertain").is_true() \
            .ok()
