import numpy as np
import pytest

from formflow.core.errors import ConfigError
from formflow.core.grid import Axis, Grid, box_around
from formflow.core.workers import THREADS_ENV, parallel_map, worker_count


class TestGrid:
    def test_from_spec(self):
        grid = Grid.from_spec("x=0:1:3, y=-1:1:5")
        assert grid.names == ("x", "y")
        assert grid.size == 15
        np.testing.assert_allclose(grid.axes[0].values(), [0.0, 0.5, 1.0])

    @pytest.mark.parametrize("spec", ["", "x=0:1", "x=a:1:3", "1x=0:1:3", "x=0:1:0"])
    def test_invalid_specs(self, spec):
        with pytest.raises(ConfigError):
            Grid.from_spec(spec)

    def test_scan_order_has_first_axis_slowest(self):
        grid = Grid.from_spec("x=0:1:2,y=0:2:3")
        points = list(grid.points())
        assert points[0] == {"x": 0.0, "y": 0.0}
        assert points[1] == {"x": 0.0, "y": 1.0}
        assert points[3] == {"x": 1.0, "y": 0.0}
        assert grid.point_at(5) == {"x": 1.0, "y": 2.0}

    def test_fixed_values_are_broadcast(self):
        grid = Grid.from_spec("x=0:1:4").with_fixed(t=2.5)
        assert grid.names == ("x", "t")
        np.testing.assert_array_equal(grid.columns()["t"], np.full(4, 2.5))

    def test_neighbours_along_each_axis(self):
        grid = Grid.from_spec("x=0:1:2,y=0:1:2")
        assert grid.neighbours() == [(0, 1), (0, 2), (1, 3), (2, 3)]

    def test_subgrid_points_belong_to_the_grid(self):
        grid = Grid.from_spec("x=0:1:11")
        sub = grid.subgrid(5)
        np.testing.assert_allclose(sub.axes[0].values(), [0.0, 0.5, 1.0])

    def test_box_around_collapses_flat_axes(self):
        box = box_around({"x": np.array([0.0, 2.0, 1.0]), "t": np.array([3.0, 3.0])}, count=5)
        assert box.axes[0] == Axis("x", 0.0, 2.0, 5)
        assert box.axes[1].count == 1


class TestWorkers:
    def test_results_keep_input_order(self):
        assert parallel_map(lambda v: v * v, range(20), workers=4) == [v * v for v in range(20)]

    def test_serial_when_zero(self):
        assert parallel_map(str, [1, 2], workers=0) == ["1", "2"]

    def test_count_from_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert worker_count() == 3
        assert worker_count(1) == 1

    def test_garbage_in_environment_runs_serially(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        assert worker_count() == 0
