import logging
from functools import partial

import numpy as np

from tamedlevy.core.errors import ConfigurationError
from tamedlevy.problems.models import JumpSpec, SdeProblem, VectorField
from tamedlevy.taming.models import TamingParams

logger = logging.getLogger(__name__)


def tame_drift(b_value: np.ndarray, params: TamingParams) -> np.ndarray:
    """
    Returns b / (1 + n^(-θ) |b|^(2θ)), with |·| the Euclidean norm over the
    last axis. Accepts a single vector of shape (d,) or a batch (P, d).
    """
    b = np.asarray(b_value, dtype=float)
    squared = np.sum(b * b, axis=-1, keepdims=True)
    if params.theta == 1.0:
        growth = squared
    else:
        growth = squared ** params.theta
    return b / (1.0 + growth / params.n ** params.theta)


def compensation(problem: SdeProblem):
    """
    Returns x -> λ E[γ(x, Z)], or None when nothing has to be subtracted.
    """
    jump = problem.jump
    if not problem.has_jumps or jump.mark_mean_zero:
        return None
    if jump.compensator is None:
        raise ConfigurationError(
            f"compensator required for problem '{problem.name}': its marks "
            "are not mean-zero.",
            code="compensator_required",
        )
    return partial(_scaled_compensator, jump=jump)


def _scaled_compensator(x: np.ndarray, jump: JumpSpec) -> np.ndarray:
    return jump.intensity * jump.compensator(x, jump.mark_law)


def _compensated(
    x: np.ndarray, drift: VectorField, jump: JumpSpec
) -> np.ndarray:
    return drift(x) - _scaled_compensator(x, jump)


def compensate_drift(problem: SdeProblem) -> VectorField:
    """
    Drift of the equation rewritten against the uncompensated Poisson
    measure: b(x) - λ E[γ(x, Z)]. Mean-zero marks (or no jumps at all)
    return the drift itself.
    """
    if compensation(problem) is None:
        return problem.drift
    logger.debug("Compensating the drift of '%s'", problem.name)
    return partial(_compensated, drift=problem.drift, jump=problem.jump)
