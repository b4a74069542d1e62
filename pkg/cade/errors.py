"""
Error types raised across cade.

Everything derives from CadeError so callers (and the CLI) can catch the
library's failures in one place and report them by type name.
"""

from typing import Any, Dict, List, Optional


class CadeError(Exception):
    """Base class for all cade errors."""

    def context(self) -> Dict[str, Any]:
        return {}


class CycleError(CadeError):
    """The adjacency pattern contains a directed cycle."""

    def __init__(self, cycle: List[int]):
        self.cycle = list(cycle)
        path = " -> ".join(str(v) for v in self.cycle + self.cycle[:1])
        super().__init__(f"adjacency is not a DAG, cycle: {path}")

    def context(self) -> Dict[str, Any]:
        return {"cycle": self.cycle}


class NumericError(CadeError):
    """A computation produced non-finite values."""


class RangeError(CadeError):
    """A value lies outside the domain of an operation."""


class ConfigError(CadeError):
    """Invalid configuration or arguments."""


class SingularError(CadeError):
    """A linear system is rank deficient."""


class DivergenceError(CadeError):
    """Training loss became non-finite."""

    def __init__(self, message: str, epoch: Optional[int] = None):
        self.epoch = epoch
        super().__init__(message)

    def context(self) -> Dict[str, Any]:
        return {"epoch": self.epoch}


class ShapeError(CadeError):
    """Array shapes or list lengths do not line up."""


class SizeError(CadeError):
    """An exact enumeration would exceed its size cap."""


class IoError(CadeError):
    """Reading or writing an artifact failed."""


class ExperimentError(CadeError):
    """A module error raised while running an experiment cell."""

    def __init__(self, experiment: str, cell: str, cause: CadeError):
        self.experiment = experiment
        self.cell = cell
        self.cause = cause
        super().__init__(f"[{experiment}/{cell}] {type(cause).__name__}: {cause}")

    def context(self) -> Dict[str, Any]:
        ctx = {"experiment": self.experiment, "cell": self.cell, "cause": type(self.cause).__name__}
        ctx.update(self.cause.context())
        return ctx
