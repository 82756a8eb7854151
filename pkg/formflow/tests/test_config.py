import io

import pytest

from formflow.core.config import CsvWriter, JsonWriter, RunConfig, writer_for
from formflow.core.errors import ConfigError
from formflow.core.report import Report


class TestRunConfig:
    def setup_method(self):
        self.config = RunConfig()

    def test_defaults(self):
        assert self.config.tol == 1e-9
        assert self.config.format == "json"
        assert self.config.grid is None
        assert isinstance(self.config.writer, JsonWriter)

    def test_chaining(self):
        config = self.config.for_command("analyze").from_file("law.ff").with_tol(1e-6).with_workers(2)
        assert config is self.config
        assert (config.command, config.input_path, config.tol, config.workers) == ("analyze", "law.ff", 1e-6, 2)

    def test_grid_from_spec(self):
        assert self.config.on_grid("x=0:1:3,y=0:1:2").grid.size == 6

    def test_grid_axes_need_two_points(self):
        with pytest.raises(ConfigError):
            self.config.on_grid("x=0:1:1")

    @pytest.mark.parametrize("tol", [0.0, -1e-9])
    def test_tolerance_must_be_positive(self, tol):
        with pytest.raises(ConfigError):
            self.config.with_tol(tol)

    def test_unknown_format(self):
        with pytest.raises(ConfigError):
            self.config.as_format("xml")

    def test_emit_to_stream(self):
        stream = io.StringIO()
        self.config.emit(Report.of("classify", {"p": 1}), stream)
        assert stream.getvalue() == '{\n  "p": 1\n}\n'

    def test_emit_to_file(self, tmp_path):
        target = tmp_path / "report.csv"
        self.config.as_format("csv").to(str(target)).emit(Report.of("scenario", {}, csv_text="a,b\n1,2\n"))
        assert target.read_text(encoding="utf-8") == "a,b\n1,2\n"


class TestWriters:
    def test_writer_for(self):
        assert isinstance(writer_for("csv"), CsvWriter)
        assert writer_for("json").suffix == ".json"

    def test_csv_needs_a_table(self):
        with pytest.raises(ConfigError):
            CsvWriter().write(Report.of("classify", {"p": 1}), io.StringIO())
