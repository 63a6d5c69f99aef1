from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


def brownian_grid(increments: np.ndarray) -> np.ndarray:
    """
    Brownian values on the grid from its increments along the first axis,
    starting at 0.
    """
    path = np.zeros((increments.shape[0] + 1,) + increments.shape[1:])
    np.cumsum(increments, axis=0, out=path[1:])
    return path


@dataclass(frozen=True)
class JumpEvent:
    """
    One jump of the driving Poisson random measure, with the Brownian value
    at the jump time.
    """

    time: float
    mark: float
    brownian_at_jump: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """
    One sample of the driving noise on [0, horizon]: Brownian increments on
    the finest dyadic grid plus the exact list of jumps.
    """

    level_max: int
    horizon: float
    brownian_increments: np.ndarray
    jump_events: Tuple[JumpEvent, ...]
    seed: int
    path_index: int = 0

    @property
    def h(self) -> float:
        return self.horizon / 2 ** self.level_max

    @property
    def dim_noise(self) -> int:
        return self.brownian_increments.shape[1]

    @cached_property
    def brownian_path(self) -> np.ndarray:
        """Grid values w_{kh}, k = 0..2^level_max, with w_0 = 0."""
        path = brownian_grid(self.brownian_increments)
        path.setflags(write=False)
        return path


@dataclass(frozen=True)
class Cell:
    """
    Noise of one grid cell [lh, lh + h) for a batch of P paths. ``jumps``
    only holds rows that have at least one jump in the cell; the grid
    values ``left`` and ``right`` are only set when there are jumps.
    """

    h: float
    increments: np.ndarray
    jump_counts: np.ndarray
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    jumps: Dict[int, Tuple[JumpEvent, ...]] = field(default_factory=dict)

    @property
    def has_jumps(self) -> bool:
        return bool(self.jumps)


@dataclass(frozen=True, eq=False)
class CoarseView:
    """
    A noise realization seen on the grid of a coarser dyadic level. Each
    increment is the sum of the finest increments its cell covers.
    """

    level: int
    horizon: float
    increments: np.ndarray
    jump_events: Tuple[JumpEvent, ...]
    jump_cells: np.ndarray

    @property
    def h(self) -> float:
        return self.horizon / 2 ** self.level

    @property
    def cell_count(self) -> int:
        return self.increments.shape[0]

    @cached_property
    def brownian_path(self) -> np.ndarray:
        return brownian_grid(self.increments)


@dataclass(frozen=True, eq=False)
class BatchView:
    """
    Many coupled views at one level, laid out for vectorised stepping:
    ``increments`` has shape (2^level, P, m), ``brownian_path`` shape
    (2^level + 1, P, m) and ``jump_counts`` shape (2^level, P).
    """

    level: int
    horizon: float
    increments: np.ndarray
    jump_counts: np.ndarray
    cell_jumps: Dict[int, Dict[int, Tuple[JumpEvent, ...]]]

    @classmethod
    def stack(cls, views: Sequence[CoarseView]) -> "BatchView":
        first = views[0]
        counts = np.zeros((first.cell_count, len(views)), dtype=np.int64)
        cell_jumps: Dict[int, Dict[int, List[JumpEvent]]] = {}
        for row, view in enumerate(views):
            if view.level != first.level:
                raise ValueError("Cannot stack views of different levels.")
            for event, index in zip(view.jump_events, view.jump_cells):
                counts[index, row] += 1
                cell_jumps.setdefault(int(index), {}).setdefault(
                    row, []
                ).append(event)
        increments = np.stack([view.increments for view in views], axis=1)
        return cls(
            level=first.level,
            horizon=first.horizon,
            increments=increments,
            jump_counts=counts,
            cell_jumps={
                index: {row: tuple(events) for row, events in rows.items()}
                for index, rows in cell_jumps.items()
            },
        )

    @cached_property
    def brownian_path(self) -> np.ndarray:
        return brownian_grid(self.increments)

    @property
    def h(self) -> float:
        return self.horizon / 2 ** self.level

    @property
    def cell_count(self) -> int:
        return self.increments.shape[0]

    @property
    def size(self) -> int:
        return self.increments.shape[1]

    def cell(self, index: int) -> Cell:
        jumps = self.cell_jumps.get(index)
        if not jumps:
            return Cell(
                h=self.h,
                increments=self.increments[index],
                jump_counts=self.jump_counts[index],
            )
        return Cell(
            h=self.h,
            increments=self.increments[index],
            jump_counts=self.jump_counts[index],
            left=self.brownian_path[index],
            right=self.brownian_path[index + 1],
            jumps=jumps,
        )
