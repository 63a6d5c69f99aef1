from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from django.db import models
from django.utils.translation import gettext_lazy as _

from tamedlevy.convergence.models import (DEFAULT_BATCH_SIZE, DEFAULT_PATHS,
                                          ConvergenceConfig)
from tamedlevy.schemes.models import SchemeKind


class Command(models.TextChoices):
    SIMULATE = "simulate", _("Simulate")
    CONVERGE = "converge", _("Strong convergence")
    MOMENTS = "moments", _("Moment sweep")
    CHECK = "check", _("Structural checks")


@dataclass(frozen=True)
class RunConfig:
    """
    A validated run document. Build it with ``parse_config``; guards such as
    the reference separation are checked there.
    """

    problem: str
    command: Command
    master_seed: int
    levels: Tuple[int, ...] = ()
    scheme: Optional[SchemeKind] = None
    reference_level: Optional[int] = None
    reference_scheme: Optional[SchemeKind] = None
    paths: int = DEFAULT_PATHS
    q_list: Tuple[float, ...] = (2.0,)
    p: float = 2.0
    worker_count: int = 0
    batch_size: int = DEFAULT_BATCH_SIZE
    output: str = ""
    initial_value: Optional[Tuple[float, ...]] = None

    def convergence_config(self) -> ConvergenceConfig:
        return ConvergenceConfig(
            levels=self.levels,
            reference_level=self.reference_level,
            paths=self.paths,
            q_list=self.q_list,
            master_seed=self.master_seed,
            scheme=self.scheme,
            reference_scheme=self.reference_scheme,
            batch_size=self.batch_size,
            workers=self.worker_count,
        )


@dataclass(frozen=True)
class RunOutcome:
    exit_code: int = 0
    files: List[Path] = field(default_factory=list)
    report: str = ""
