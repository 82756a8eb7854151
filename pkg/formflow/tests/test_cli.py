import json

import pytest

from formflow.core.cli import EXIT_EVALUATION, EXIT_OK, EXIT_USAGE, build_parser, main

FIRST_LAW = """
relation "first law" on (T, V) {
  constants { R: 1.0; c_v: 2.5 }
  omega: c_v*dT + (R*T/V)*dV
  domain { T: 1 .. 10; V: 1 .. 5 }
}
"""

FREE_PARTICLE = """
hj on (x) { E: p^2/2 }
initial { u0: x^2/2; seed: x }
bundle { from: -1; to: 1; count: 5 }
integrate { step: 0.01; steps: 100 }
"""


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write


def run_json(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    assert code == EXIT_OK, captured.err
    return json.loads(captured.out)


class TestParser:
    def test_subcommand_is_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_common_options_after_the_subcommand(self):
        args = build_parser().parse_args(["classify", "--all", "--tol", "1e-6"])
        assert args.command == "classify"
        assert args.tol == 1e-6


class TestAnalyze:
    def test_first_law_is_nonidentical(self, capsys, write):
        data = run_json(capsys, ["analyze", write("law.ff", FIRST_LAW)])
        assert data["identical"] is False
        assert data["maxTotal"] == pytest.approx(1.0)
        assert data["label"] == "first law"

    def test_form_on_a_grid(self, capsys, write):
        path = write("form.ff", "form 1 on (x, y): y*dx")
        data = run_json(capsys, ["analyze", path, "--grid", "x=-1:1:5,y=-1:1:5"])
        assert data["closed"] is False
        assert data["maxResidual"] == pytest.approx(1.0)
        assert data["form"]

    def test_several_blocks(self, capsys, write):
        path = write("both.ff", FIRST_LAW + "\nform 1 on (x, y): y*dx + x*dy\n")
        data = run_json(capsys, ["analyze", path])
        assert len(data["relations"]) == 1
        assert data["forms"][0]["closed"] is True

    def test_syntax_error(self, capsys, write):
        code = main(["analyze", write("bad.ff", "form 1 on (x, y): x*dx +")])
        assert code == EXIT_USAGE
        assert "byte" in capsys.readouterr().err

    def test_grid_must_cover_the_coordinates(self, capsys, write):
        code = main(["analyze", write("law.ff", FIRST_LAW), "--grid", "T=1:2:3"])
        assert code == EXIT_USAGE

    def test_unsupported_degree_is_an_evaluation_error(self, capsys, write):
        path = write("two.ff", "relation on (x, y) { omega: x*dx^dy; domain { x: 0 .. 1; y: 0 .. 1 } }")
        assert main(["analyze", path]) == EXIT_EVALUATION

    def test_missing_file(self, capsys, tmp_path):
        assert main(["analyze", str(tmp_path / "nowhere.ff")]) == EXIT_USAGE

    def test_output_is_deterministic(self, capsys, write):
        path = write("law.ff", FIRST_LAW)
        main(["analyze", path])
        first = capsys.readouterr().out
        main(["analyze", path, "--workers", "4"])
        assert capsys.readouterr().out == first


class TestCharacteristics:
    def test_report_and_trajectory(self, capsys, write, tmp_path):
        out = tmp_path / "bundle.json"
        assert main(["characteristics", write("free.ff", FREE_PARTICLE), "--out", str(out)]) == EXIT_OK
        data = json.loads(out.read_text(encoding="utf-8"))
        assert data["trajectories"] == 5
        assert data["onResidual"] < 1e-7
        assert data["final"]["t"] == pytest.approx(1.0)
        lines = (tmp_path / "bundle.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "t,x,p,u"
        assert len(lines) == 102

    def test_csv_format(self, capsys, write):
        assert main(["characteristics", write("free.ff", FREE_PARTICLE), "--format", "csv"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("t,x,p,u\n")

    def test_zero_steps(self, capsys, write):
        path = write("still.ff", FREE_PARTICLE.replace("steps: 100", "steps: 0"))
        data = run_json(capsys, ["characteristics", path])
        assert data["onResidual"] is None
        assert data["causticPoints"] == []

    def test_explicit_trajectory_path(self, capsys, write, tmp_path):
        target = tmp_path / "reference.csv"
        run_json(capsys, ["characteristics", write("free.ff", FREE_PARTICLE), "--trajectory", str(target)])
        assert target.read_text(encoding="utf-8").startswith("t,x,p,u")


class TestScenario:
    def test_gas_preset(self, capsys):
        data = run_json(capsys, ["scenario", "--scenario", "gas", "--preset", "body-flow"])
        assert data["dominantSource"] == "force"

    def test_em_csv(self, capsys):
        assert main(["scenario", "--scenario", "em", "--preset", "plane-wave", "--format", "csv"]) == EXIT_OK
        assert capsys.readouterr().out.splitlines()[0] == "x,y,z,t,S,commutator,direction"

    def test_thermo_has_no_csv(self, capsys):
        assert main(["scenario", "--scenario", "thermo", "--preset", "ideal-gas", "--format", "csv"]) == EXIT_USAGE

    def test_config_file(self, capsys, write):
        path = write("gas.json", json.dumps({"scenario": "gas", "preset": "vortex"}))
        data = run_json(capsys, ["scenario", "--config", path])
        assert data["dominantSource"] == "vorticity"

    def test_kind_must_match_the_config(self, capsys, write):
        path = write("gas.json", json.dumps({"scenario": "gas", "preset": "vortex"}))
        assert main(["scenario", "--scenario", "em", "--config", path]) == EXIT_USAGE

    def test_preset_needs_a_kind(self, capsys):
        assert main(["scenario", "--preset", "uniform"]) == EXIT_USAGE

    def test_unknown_preset(self, capsys):
        assert main(["scenario", "--scenario", "gas", "--preset", "tornado"]) == EXIT_USAGE

    def test_non_positive_tolerance(self, capsys):
        assert main(["scenario", "--scenario", "gas", "--preset", "uniform", "--tol", "0"]) == EXIT_USAGE


class TestClassify:
    def test_cell(self, capsys):
        data = run_json(capsys, ["classify", "--p", "3", "--k", "3"])
        assert data["particleLabel"] == "graviton"
        assert data["pseudostructureDim"] == 2

    def test_out_of_table_is_not_an_error(self, capsys):
        data = run_json(capsys, ["classify", "--p", "1", "--k", "2"])
        assert data["outOfTable"] is True

    def test_all(self, capsys):
        assert len(run_json(capsys, ["classify", "--all"])) == 10

    def test_needs_both_degrees(self, capsys):
        assert main(["classify", "--p", "1"]) == EXIT_USAGE
        assert "formflow: error" in capsys.readouterr().err
