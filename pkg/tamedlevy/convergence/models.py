from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from tamedlevy.core.errors import ConfigurationError
from tamedlevy.schemes.models import SchemeKind

# Reference grids must be at least this many levels finer than the finest
# coarse level.
REFERENCE_SEPARATION = 3
# Fraction of diverged paths a tamed scheme may show before a run fails.
DIVERGENCE_TOLERANCE = 1e-3
DEFAULT_PATHS = 10_000
DEFAULT_BATCH_SIZE = 512


class ErrorMeasure(models.TextChoices):
    TERMINAL = "terminal", _("Error at the terminal time")
    GRID_SUP = "grid-sup", _("Largest error over the coarse grid points")


def as_levels(levels: Sequence[int]) -> Tuple[int, ...]:
    levels = tuple(levels)
    if not levels:
        raise ConfigurationError("At least one level is required.")
    for level in levels:
        if not (isinstance(level, (int, np.integer)) and level >= 1):
            raise ConfigurationError(
                f"Levels must be positive integers, got {level!r}."
            )
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError(
            f"Levels must be strictly ascending, got {list(levels)}."
        )
    return tuple(int(level) for level in levels)


@dataclass(frozen=True)
class ConvergenceConfig:
    """
    One strong convergence experiment: coarse ``levels`` measured against a
    coupled reference solution on ``reference_level``.

    ``batch_size`` and ``workers`` (0 meaning one per CPU) only decide how
    the work is laid out.
    """

    levels: Tuple[int, ...]
    reference_level: int
    paths: int = DEFAULT_PATHS
    q_list: Tuple[float, ...] = (2.0,)
    master_seed: int = 0
    scheme: Optional[SchemeKind] = None
    reference_scheme: Optional[SchemeKind] = None
    batch_size: int = DEFAULT_BATCH_SIZE
    workers: int = 1

    def __post_init__(self):
        levels = as_levels(self.levels)
        object.__setattr__(self, "levels", levels)
        if self.reference_level < levels[-1] + REFERENCE_SEPARATION:
            raise ConfigurationError(
                f"reference_level must be at least max(levels) + "
                f"{REFERENCE_SEPARATION} = "
                f"{levels[-1] + REFERENCE_SEPARATION}, got "
                f"{self.reference_level}."
            )
        if self.paths < 1:
            raise ConfigurationError(
                f"paths must be positive, got {self.paths}."
            )
        q_list = tuple(float(q) for q in self.q_list)
        if not q_list or any(not q >= 1 for q in q_list):
            raise ConfigurationError(
                f"Every q must be at least 1, got {list(self.q_list)}."
            )
        object.__setattr__(self, "q_list", q_list)
        if self.batch_size < 1:
            raise ConfigurationError(
                f"batch_size must be positive, got {self.batch_size}."
            )
        if self.workers < 0:
            raise ConfigurationError(
                f"workers must be nonnegative, got {self.workers}."
            )


@dataclass(frozen=True)
class ErrorRow:
    level: int
    h: float
    q: float
    error: float
    half_width: float
    paths_used: int
    diverged: int


@dataclass(frozen=True)
class ErrorTable:
    """
    L^q errors of a scheme, one row per (level, q). With the TERMINAL
    measure a path's error is |x_T^ref - x_T^level|. With GRID_SUP it is
    max_k |x^ref(k h) - x_k^level| over the grid points of the level, a
    grid stand-in for the supremum over all times.
    """

    scheme: SchemeKind
    reference_scheme: SchemeKind
    reference_level: int
    paths: int
    rows: Tuple[ErrorRow, ...]
    reference_diverged: int = 0
    measure: ErrorMeasure = ErrorMeasure.TERMINAL

    @property
    def levels(self) -> List[int]:
        return sorted({row.level for row in self.rows})

    @property
    def q_list(self) -> List[float]:
        return list(dict.fromkeys(row.q for row in self.rows))

    @property
    def diverged(self) -> Dict[int, int]:
        return {row.level: row.diverged for row in self.rows}

    def rows_for(self, q: float) -> List[ErrorRow]:
        return sorted(
            (row for row in self.rows if row.q == q),
            key=lambda row: row.level,
        )

    def row(self, level: int, q: float) -> ErrorRow:
        for row in self.rows:
            if row.level == level and row.q == q:
                return row
        raise KeyError((level, q))


@dataclass(frozen=True)
class ConvergenceTables:
    """
    Both error measures of one experiment, taken from the same paths.
    """

    terminal: ErrorTable
    grid_sup: ErrorTable


@dataclass(frozen=True)
class RateFit:
    q: float
    slope: float
    intercept: float
    r_squared: float
    levels_used: Tuple[int, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class MomentRow:
    level: int
    h: float
    p: float
    estimate: float
    half_width: float
    paths_used: int
    diverged: int


@dataclass(frozen=True)
class MomentTable:
    """
    Estimates of E[max_k |x_k|^p] over the grid points, per level.
    Diverged paths are left out of the estimates and tallied instead.
    """

    scheme: SchemeKind
    p: float
    paths: int
    rows: Tuple[MomentRow, ...]

    @property
    def levels(self) -> List[int]:
        return [row.level for row in self.rows]

    @property
    def diverged(self) -> Dict[int, int]:
        return {row.level: row.diverged for row in self.rows}
