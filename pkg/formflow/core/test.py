from .assertions import Assertions
from .config import RunConfig
from .grid import Grid


class Test(Assertions):
    """Base for test classes: a fresh run configuration and a small default grid per test."""
    grid_spec = "x=-1:1:7,y=-1:1:7"

    def setup_method(self):
        self.config = RunConfig().on_grid(self.grid_spec)
        self.grid: Grid = self.config.grid

    def teardown_method(self):
        pass
