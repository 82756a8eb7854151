from typing import Optional, TextIO, Union
from dataclasses import dataclass, field
from abc import ABC, abstractmethod
import sys

from .errors import ConfigError
from .grid import Grid
from .report import Report

FORMATS = ("json", "csv")


class ReportWriter(ABC):
    suffix: str = ""

    @abstractmethod
    def write(self, report: Report, stream: TextIO) -> None:
        """Serialize the report onto an open text stream"""
        pass


class JsonWriter(ReportWriter):
    suffix = ".json"

    def write(self, report: Report, stream: TextIO) -> None:
        stream.write(report.text)


class CsvWriter(ReportWriter):
    suffix = ".csv"

    def write(self, report: Report, stream: TextIO) -> None:
        if report.csv_text is None:
            raise ConfigError(f"'{report.kind}' reports have no CSV form")
        stream.write(report.csv_text)


def writer_for(fmt: str) -> ReportWriter:
    if fmt == "json":
        return JsonWriter()
    if fmt == "csv":
        return CsvWriter()
    raise ConfigError(f"unknown output format '{fmt}', expected one of {FORMATS}")


@dataclass
class RunConfig:
    command: str = ""
    input_path: Optional[str] = None
    grid: Optional[Grid] = None
    tol: float = 1e-9
    out: Optional[str] = None
    format: str = "json"
    workers: Optional[int] = None
    writer: ReportWriter = field(default_factory=JsonWriter)

    def for_command(self, command: str) -> 'RunConfig':
        self.command = command
        return self

    def from_file(self, path: str) -> 'RunConfig':
        self.input_path = path
        return self

    def on_grid(self, grid: Union[Grid, str]) -> 'RunConfig':
        grid = Grid.from_spec(grid) if isinstance(grid, str) else grid
        for axis in grid.axes:
            if axis.count < 2:
                raise ConfigError(f"grid axis '{axis.name}' needs at least 2 points, got {axis.count}")
        self.grid = grid
        return self

    def with_tol(self, tol: float) -> 'RunConfig':
        if not tol > 0:
            raise ConfigError(f"tolerance must be positive, got {tol}")
        self.tol = float(tol)
        return self

    def to(self, path: Optional[str]) -> 'RunConfig':
        self.out = path
        return self

    def as_format(self, fmt: str) -> 'RunConfig':
        self.writer = writer_for(fmt)
        self.format = fmt
        return self

    def with_workers(self, workers: Optional[int]) -> 'RunConfig':
        self.workers = workers
        return self

    def emit(self, report: Report, stream: Optional[TextIO] = None) -> None:
        if self.out is None or self.out == "-":
            self.writer.write(report, stream or sys.stdout)
            return
        with open(self.out, "w", encoding="utf-8", newline="") as f:
            self.writer.write(report, f)
