from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from tamedlevy.taming.models import TamingParams

# States beyond this norm count as blown up.
DIVERGENCE_THRESHOLD = 1e12


class SchemeKind(models.TextChoices):
    TAMED_EULER = "tamed-euler", _("Tamed Euler")
    TAMED_MILSTEIN_CONTINUOUS = "tamed-milstein-continuous", _(
        "Tamed Milstein (continuous)"
    )
    TAMED_MILSTEIN_JUMP_1D = "tamed-milstein-jump-1d", _(
        "Tamed Milstein (one-dimensional jumps)"
    )
    TAMED_MILSTEIN_JUMP_COMMUTATIVE = "tamed-milstein-jump-commutative", _(
        "Tamed Milstein (commutative jumps)"
    )
    UNTAMED_MILSTEIN = "untamed-milstein", _("Untamed Milstein")


TAMED_KINDS = [
    SchemeKind.TAMED_EULER,
    SchemeKind.TAMED_MILSTEIN_CONTINUOUS,
    SchemeKind.TAMED_MILSTEIN_JUMP_1D,
    SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE,
]
JUMP_KINDS = [
    SchemeKind.TAMED_MILSTEIN_JUMP_1D,
    SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE,
]


@dataclass(frozen=True)
class SchemeSpec:
    """
    A scheme kind bound to a grid level. Only ``build_scheme`` should
    create these, since it is where problem compatibility is checked.
    ``compensator`` is x -> λ E[γ(x, Z)] for problems whose marks are not
    mean-zero and None otherwise.
    """

    kind: SchemeKind
    level: int
    taming: TamingParams
    horizon: float = 1.0
    compensator: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )

    @property
    def h(self) -> float:
        return self.horizon / 2 ** self.level

    @property
    def cell_count(self) -> int:
        return 2 ** self.level

    @property
    def is_tamed(self) -> bool:
        return self.kind in TAMED_KINDS


@dataclass(frozen=True, eq=False)
class PathResult:
    """
    Outcome of one simulated path. ``sup_norm`` is the maximum of |x| over
    the grid points; it is infinite and ``terminal_value`` is NaN once the
    path diverged at grid index ``blowup_index``.
    """

    terminal_value: np.ndarray
    sup_norm: float
    diverged: bool = False
    blowup_index: Optional[int] = None
    trajectory: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class BatchResult:
    """
    Outcome of P paths stepped together. ``blowup_index`` is -1 for paths
    that stayed finite.
    """

    terminal_values: np.ndarray
    sup_norms: np.ndarray
    blowup_index: np.ndarray
    trajectories: Optional[np.ndarray] = None

    @property
    def diverged(self) -> np.ndarray:
        return self.blowup_index >= 0

    @property
    def size(self) -> int:
        return self.terminal_values.shape[0]

    def path(self, row: int) -> PathResult:
        index = int(self.blowup_index[row])
        return PathResult(
            terminal_value=self.terminal_values[row].copy(),
            sup_norm=float(self.sup_norms[row]),
            diverged=index >= 0,
            blowup_index=index if index >= 0 else None,
            trajectory=(
                None
                if self.trajectories is None
                else self.trajectories[:, row].copy()
            ),
        )
