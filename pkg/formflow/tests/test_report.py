import json

import numpy as np

from formflow.core import expr as ex
from formflow.core.report import Report, format_float, plain, render_json


class TestPlain:
    def test_numpy_values(self):
        data = plain({"a": np.float64(0.5), "b": np.int64(3), "c": np.bool_(True), "d": np.array([1.0, 2.0])})
        assert data == {"a": 0.5, "b": 3, "c": True, "d": [1.0, 2.0]}
        assert type(data["c"]) is bool

    def test_expressions_and_tuples(self):
        assert plain({"e": ex.parse("x + 1"), "t": (1, 2)}) == {"e": "x + 1.0", "t": [1, 2]}

    def test_report_objects(self):
        class Thing:
            def to_dict(self):
                return {"k": (1.5,)}

        assert plain([Thing()]) == [{"k": [1.5]}]


class TestRenderJson:
    def test_keys_are_sorted(self):
        text = render_json({"b": 1, "a": {"d": None, "c": True}})
        assert text.index('"a"') < text.index('"b"')
        assert text.index('"c"') < text.index('"d"')
        assert text.endswith("}\n")

    def test_floats_keep_full_precision(self):
        assert json.loads(render_json({"x": 0.1 + 0.2}))["x"] == 0.1 + 0.2
        assert format_float(1.0) == "1.0"

    def test_non_finite_values_become_null(self):
        assert json.loads(render_json({"x": float("nan"), "y": float("inf")})) == {"x": None, "y": None}

    def test_empty_containers(self):
        assert json.loads(render_json({"a": [], "b": {}})) == {"a": [], "b": {}}


class TestReport:
    def test_of_renders_the_payload(self):
        report = Report.of("classify", {"p": np.int64(1)}, meta={"kind": "x"})
        assert report.json_data == {"p": 1}
        assert json.loads(report.text) == {"p": 1}
        assert report.csv_text is None
        assert report.meta == {"kind": "x"}
