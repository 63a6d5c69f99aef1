import logging
import math
import os
from typing import List, Sequence, Tuple

import numpy as np
from scipy import stats

from tamedlevy.convergence.models import ErrorTable, RateFit
from tamedlevy.core.errors import DomainError

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95


def normal_quantile(confidence: float = CONFIDENCE) -> float:
    """Two-sided normal quantile, 1.959963... for 95 %."""
    return float(stats.norm.ppf(0.5 + confidence / 2))


def _as_errors(absolute_errors: Sequence[float]) -> np.ndarray:
    errors = np.asarray(absolute_errors, dtype=float).reshape(-1)
    if errors.size == 0:
        raise DomainError("Cannot take the L^q norm of an empty sample.")
    if not np.all(np.isfinite(errors)) or np.any(errors < 0):
        raise DomainError("Errors must be finite and nonnegative.")
    return errors


def _check_q(q: float) -> None:
    if not q >= 1:
        raise DomainError(f"q must be at least 1, got {q}.")


def lq_error(absolute_errors: Sequence[float], q: float) -> float:
    """
    ((1/M) Σ |e_i|^q)^(1/q).
    """
    return lq_error_with_half_width(absolute_errors, q)[0]


def lq_error_with_half_width(
    absolute_errors: Sequence[float],
    q: float,
    confidence: float = CONFIDENCE,
) -> Tuple[float, float]:
    """
    The L^q error and the half-width of its confidence interval: the normal
    interval of the mean of |e|^q carried through x -> x^(1/q) by the delta
    method. The half-width is NaN for a single sample. Errors are scaled by
    the largest one first so large q neither underflows nor overflows.
    """
    _check_q(q)
    errors = _as_errors(absolute_errors)
    scale = float(errors.max())
    if scale == 0.0:
        return 0.0, 0.0
    powers = (errors / scale) ** q
    moment = float(np.mean(powers))
    error = scale * moment ** (1.0 / q)
    if errors.size < 2:
        return error, math.nan
    spread = float(np.std(powers, ddof=1)) / math.sqrt(errors.size)
    half_width = (
        scale
        * moment ** (1.0 / q - 1.0)
        / q
        * normal_quantile(confidence)
        * spread
    )
    return error, half_width


def mean_with_half_width(
    values: Sequence[float], confidence: float = CONFIDENCE
) -> Tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, math.nan
    spread = float(np.std(values, ddof=1)) / math.sqrt(values.size)
    return mean, normal_quantile(confidence) * spread


def fit_rate(table: ErrorTable, q: float) -> RateFit:
    """
    Least-squares line through (-level, log2 error). The slope is the
    empirical strong order. Levels whose error is zero (or undefined because
    every path diverged) are left out with a warning.
    """
    rows = table.rows_for(q)
    levels, logs = [], []
    for row in rows:
        if not (np.isfinite(row.error) and row.error > 0):
            logger.warning(
                "Leaving level %d out of the q=%g fit: error is %r",
                row.level,
                q,
                row.error,
            )
            continue
        levels.append(row.level)
        logs.append(math.log2(row.error))
    if len(levels) < 2:
        raise DomainError(
            f"Fitting a rate needs at least two levels with positive error "
            f"for q={q:g}, got {len(levels)}."
        )
    fit = stats.linregress(-np.asarray(levels, dtype=float), logs)
    return RateFit(
        q=q,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=min(1.0, float(fit.rvalue) ** 2),
        levels_used=tuple(levels),
    )


def fit_rates(table: ErrorTable) -> List[RateFit]:
    return [fit_rate(table, q) for q in table.q_list]


def resolve_workers(workers: int) -> int:
    """0 means one worker per available CPU."""
    if workers == 0:
        return os.cpu_count() or 1
    return workers
