import json

import pytest

from formflow.core.electromagnetics import EMScenario
from formflow.core.errors import ConfigError
from formflow.core.gasdynamics import TURBULENCE, VORTEX, GasScenario
from formflow.core.scenarios import PRESETS, load_scenario_config, preset, run_scenario, scenario_from_config
from formflow.core.thermo import ThermoScenario


class TestPresets:
    @pytest.mark.parametrize("kind,name", [(k, n) for k in PRESETS for n in PRESETS[k]])
    def test_every_preset_builds(self, kind, name):
        sc = preset(kind, name)
        assert isinstance(sc, {"thermo": ThermoScenario, "gas": GasScenario, "em": EMScenario}[kind])

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            preset("optics", "lens")

    def test_unknown_name(self):
        with pytest.raises(ConfigError) as info:
            preset("gas", "tornado")
        assert "shock-tube" in str(info.value)


class TestScenarioConfig:
    def test_preset_reference(self):
        kind, sc = scenario_from_config({"scenario": "em", "preset": "static"})
        assert kind == "em"
        assert sc.name == "static"

    def test_thermo(self):
        kind, sc = scenario_from_config({
            "scenario": "thermo",
            "constants": {"R": 2.0, "c_v": 3.0},
            "domain": {"T": [1, 5], "V": [1, 2]},
        })
        assert kind == "thermo"
        assert sc.R == 2.0
        assert sc.gamma == pytest.approx(5.0 / 3.0)
        assert sc.grid(count=3).size == 9

    def test_gas_with_constants(self):
        kind, sc = scenario_from_config({
            "scenario": "gas",
            "name": "pushed",
            "constants": {"k": 0.2},
            "fields": {"velocity": ["0.3", 0, 0], "force": [0, "k*x1", 0]},
            "domain": {"x1": [0.5, 1.5], "x2": [0, 1]},
        })
        payload = run_scenario(kind, sc).payload
        assert payload["scenario"] == "pushed"
        assert payload["predictedStructure"] == VORTEX
        assert payload["terms"]["force"] == pytest.approx(0.06)

    def test_gas_with_transport(self):
        kind, sc = scenario_from_config({
            "scenario": "gas",
            "fields": {"velocity": ["x2", 0, 0], "temperature": "1 + 0.1*x2"},
            "transport": {"mu": 0.01, "kappa": 0.5},
            "domain": {"x1": [0, 1], "x2": [0.5, 1]},
        })
        assert run_scenario(kind, sc).payload["predictedStructure"] == TURBULENCE

    def test_em(self):
        kind, sc = scenario_from_config({
            "scenario": "em",
            "constants": {"c": 1.0},
            "fields": {"electric": [0, "cos(x - t)", 0], "magnetic": [0, 0, "cos(x - t)"]},
            "domain": {"x": [0, 3], "t": [0, 1]},
            "counts": {"x": 31, "t": 11},
        })
        payload = run_scenario(kind, sc).payload
        assert payload["matchesC"]
        assert payload["integratingDirection"] == pytest.approx(1.0)

    @pytest.mark.parametrize("document", [
        {"scenario": "gas"},
        {"scenario": "em", "fields": {"electric": [0, 1, 0]}},
        {"scenario": "thermo", "domain": {"T": [1, 2]}},
        {"scenario": "gas", "fields": {"velocity": ["1 +", 0, 0]}},
        {"scenario": "gas", "fields": {"velocity": [1, 0]}},
        {"scenario": "thermo", "colour": "red"},
        {"scenario": "plasma"},
    ])
    def test_invalid_documents(self, document):
        with pytest.raises(ConfigError):
            scenario_from_config(document)

    def test_file_that_is_not_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"scenario\": ", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_scenario_config(str(path))

    def test_file(self, tmp_path):
        path = tmp_path / "thermo.json"
        path.write_text(json.dumps({"scenario": "thermo", "preset": "irreversible"}), encoding="utf-8")
        kind, sc = load_scenario_config(str(path))
        assert kind == "thermo" and sc.friction is not None


class TestRunScenario:
    def test_thermo_has_no_csv(self):
        outcome = run_scenario("thermo", preset("thermo", "ideal-gas"))
        assert outcome.payload["scenario"] == "thermo"
        assert outcome.csv_text is None

    def test_gas_csv(self):
        outcome = run_scenario("gas", preset("gas", "uniform"))
        assert outcome.csv_text.startswith("x1,x2,x3,t,total,")

    def test_em_csv(self):
        outcome = run_scenario("em", preset("em", "static"))
        assert outcome.csv_text.splitlines()[0] == "x,y,z,t,S,commutator,direction"

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            run_scenario("optics", preset("thermo", "ideal-gas"))
