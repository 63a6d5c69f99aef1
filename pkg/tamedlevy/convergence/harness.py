"""
Monte Carlo drivers for strong convergence and moment experiments.

Paths are split into batches of consecutive path indices. Every batch draws
its own noise from the per-path keys, so a batch computes the same numbers
whichever process runs it, and results land in arrays indexed by path
before anything is reduced.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from tamedlevy.convergence.models import (DEFAULT_BATCH_SIZE,
                                          DIVERGENCE_TOLERANCE,
                                          ConvergenceConfig,
                                          ConvergenceTables, ErrorMeasure,
                                          ErrorRow, ErrorTable, MomentRow,
                                          MomentTable, as_levels)
from tamedlevy.convergence.utils import (lq_error_with_half_width,
                                         mean_with_half_width,
                                         resolve_workers)
from tamedlevy.core.errors import ConfigurationError, DivergenceError
from tamedlevy.noise.models import BatchView
from tamedlevy.noise.utils import coarsen, sample_noise
from tamedlevy.problems.models import SdeProblem
from tamedlevy.schemes.models import BatchResult, SchemeKind, SchemeSpec
from tamedlevy.schemes.utils import build_scheme, default_kind, simulate_batch

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class ErrorBatch:
    start: int
    errors: np.ndarray
    sup_errors: np.ndarray
    diverged: np.ndarray
    reference_diverged: np.ndarray


@dataclass(frozen=True)
class LevelBatch:
    start: int
    terminal_values: np.ndarray
    sup_norms: np.ndarray
    diverged: np.ndarray


@dataclass(frozen=True)
class LevelResults:
    """
    Per-path outcomes on several levels driven by shared noise. Arrays are
    indexed by (level position, path index).
    """

    specs: Tuple[SchemeSpec, ...]
    terminal_values: np.ndarray
    sup_norms: np.ndarray
    diverged: np.ndarray


def batch_bounds(paths: int, batch_size: int) -> List[Tuple[int, int]]:
    return [
        (start, min(start + batch_size, paths))
        for start in range(0, paths, batch_size)
    ]


def _coupled_batch(
    problem: SdeProblem,
    level_max: int,
    seed: int,
    start: int,
    stop: int,
) -> List:
    return [
        sample_noise(problem, level_max, seed, index)
        for index in range(start, stop)
    ]


def _simulate_level(
    problem: SdeProblem,
    spec: SchemeSpec,
    noises: Sequence,
    trajectory_stride: Optional[int] = None,
) -> BatchResult:
    batch = BatchView.stack([coarsen(noise, spec.level) for noise in noises])
    if trajectory_stride is None:
        return simulate_batch(problem, spec, batch)
    return simulate_batch(
        problem,
        spec,
        batch,
        keep_trajectory=True,
        trajectory_stride=trajectory_stride,
    )


def _distances(gap: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(gap * gap, axis=-1))


def error_batch(
    problem: SdeProblem,
    reference: SchemeSpec,
    coarse: Sequence[SchemeSpec],
    seed: int,
    bounds: Tuple[int, int],
) -> ErrorBatch:
    """
    Errors of every level for the paths in ``bounds``, with the noise drawn
    once on the reference grid and coarsened for every level: the distance
    at the terminal time and the largest distance over the level's grid
    points. Errors of paths where either side diverged are NaN.
    """
    start, stop = bounds
    noises = _coupled_batch(problem, reference.level, seed, start, stop)
    finest = max(spec.level for spec in coarse)
    # The reference is only kept on the grid of the finest coarse level.
    exact = _simulate_level(
        problem, reference, noises, 2 ** (reference.level - finest)
    )
    shape = (len(coarse), stop - start)
    errors = np.empty(shape)
    sup_errors = np.empty(shape)
    diverged = np.zeros(shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        for row, spec in enumerate(coarse):
            result = _simulate_level(problem, spec, noises, 1)
            errors[row] = _distances(
                exact.terminal_values - result.terminal_values
            )
            track = exact.trajectories[:: 2 ** (finest - spec.level)]
            sup_errors[row] = np.max(
                _distances(track - result.trajectories), axis=0
            )
            diverged[row] = result.diverged | exact.diverged
    return ErrorBatch(
        start=start,
        errors=errors,
        sup_errors=sup_errors,
        diverged=diverged,
        reference_diverged=exact.diverged,
    )


def level_batch(
    problem: SdeProblem,
    specs: Sequence[SchemeSpec],
    seed: int,
    bounds: Tuple[int, int],
) -> LevelBatch:
    start, stop = bounds
    noises = _coupled_batch(problem, specs[-1].level, seed, start, stop)
    shape = (len(specs), stop - start)
    terminal_values = np.empty(shape + (problem.dim_state,))
    sup_norms = np.empty(shape)
    diverged = np.zeros(shape, dtype=bool)
    for row, spec in enumerate(specs):
        result = _simulate_level(problem, spec, noises)
        terminal_values[row] = result.terminal_values
        sup_norms[row] = result.sup_norms
        diverged[row] = result.diverged
    return LevelBatch(
        start=start,
        terminal_values=terminal_values,
        sup_norms=sup_norms,
        diverged=diverged,
    )


def run_batches(
    task: Callable[[Tuple[int, int]], T],
    bounds: Sequence[Tuple[int, int]],
    workers: int,
) -> List[T]:
    """
    Apply ``task`` to every batch, in this process for a single worker and
    in a process pool otherwise. Results come back in batch order.
    """
    workers = resolve_workers(workers)
    if workers == 1 or len(bounds) == 1:
        results = []
        for number, batch in enumerate(bounds, start=1):
            results.append(task(batch))
            logger.debug("Finished batch %d of %d", number, len(bounds))
        return results
    logger.info(
        "Running %d batches on %d worker processes", len(bounds), workers
    )
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, bounds))


def check_divergence(
    kind: SchemeKind, level: int, diverged: int, paths: int
) -> None:
    if not diverged:
        return
    logger.warning(
        "%d of %d paths of %s diverged on level %d",
        diverged,
        paths,
        kind,
        level,
    )
    if kind != SchemeKind.UNTAMED_MILSTEIN and (
        diverged > DIVERGENCE_TOLERANCE * paths
    ):
        raise DivergenceError(
            f"{diverged} of {paths} paths of the tamed scheme {kind} "
            f"diverged on level {level}; taming should keep them bounded."
        )


def _error_rows(
    coarse: Sequence[SchemeSpec],
    errors: np.ndarray,
    diverged: np.ndarray,
    q_list: Sequence[float],
) -> Tuple[ErrorRow, ...]:
    rows = []
    for index, spec in enumerate(coarse):
        kept = errors[index][~diverged[index]]
        for q in q_list:
            if kept.size:
                error, half_width = lq_error_with_half_width(kept, q)
            else:
                error, half_width = np.nan, np.nan
            rows.append(
                ErrorRow(
                    level=spec.level,
                    h=spec.h,
                    q=q,
                    error=error,
                    half_width=half_width,
                    paths_used=int(kept.size),
                    diverged=int(diverged[index].sum()),
                )
            )
    return tuple(rows)


def convergence_tables(
    problem: SdeProblem, config: ConvergenceConfig
) -> ConvergenceTables:
    """
    Estimate the L^q errors of ``config.scheme`` on every level against the
    coupled reference solution, both at the terminal time and as the
    largest error over the level's grid points. The tables depend on the
    config only, not on the batch layout's scheduling or the number of
    workers.
    """
    kind = SchemeKind(config.scheme or default_kind(problem))
    reference_kind = SchemeKind(config.reference_scheme or kind)
    reference = build_scheme(problem, reference_kind, config.reference_level)
    coarse = [build_scheme(problem, kind, level) for level in config.levels]
    bounds = batch_bounds(config.paths, config.batch_size)
    logger.info(
        "Strong convergence of %s for '%s': levels %s against level %d, "
        "%d paths",
        kind,
        problem.name,
        list(config.levels),
        config.reference_level,
        config.paths,
    )

    task = partial(
        error_batch, problem, reference, coarse, config.master_seed
    )
    errors = np.empty((len(coarse), config.paths))
    sup_errors = np.empty((len(coarse), config.paths))
    diverged = np.zeros((len(coarse), config.paths), dtype=bool)
    reference_diverged = np.zeros(config.paths, dtype=bool)
    for batch in run_batches(task, bounds, config.workers):
        stop = batch.start + batch.errors.shape[1]
        errors[:, batch.start : stop] = batch.errors
        sup_errors[:, batch.start : stop] = batch.sup_errors
        diverged[:, batch.start : stop] = batch.diverged
        reference_diverged[batch.start : stop] = batch.reference_diverged

    check_divergence(
        reference_kind,
        config.reference_level,
        int(reference_diverged.sum()),
        config.paths,
    )
    for index, spec in enumerate(coarse):
        check_divergence(
            kind, spec.level, int(diverged[index].sum()), config.paths
        )

    def table(values: np.ndarray, measure: ErrorMeasure) -> ErrorTable:
        return ErrorTable(
            scheme=kind,
            reference_scheme=reference_kind,
            reference_level=config.reference_level,
            paths=config.paths,
            rows=_error_rows(coarse, values, diverged, config.q_list),
            reference_diverged=int(reference_diverged.sum()),
            measure=measure,
        )

    return ConvergenceTables(
        terminal=table(errors, ErrorMeasure.TERMINAL),
        grid_sup=table(sup_errors, ErrorMeasure.GRID_SUP),
    )


def run_strong_convergence(
    problem: SdeProblem, config: ConvergenceConfig
) -> ErrorTable:
    """
    The L^q errors at the terminal time; see ``convergence_tables``.
    """
    return convergence_tables(problem, config).terminal


def simulate_levels(
    problem: SdeProblem,
    kind: Optional[SchemeKind],
    levels: Sequence[int],
    paths: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    workers: int = 1,
) -> LevelResults:
    """
    Simulate ``paths`` paths on every level, all levels sharing the noise
    drawn on the finest of them.
    """
    levels = as_levels(levels)
    if paths < 1:
        raise ConfigurationError(f"paths must be positive, got {paths}.")
    kind = SchemeKind(kind or default_kind(problem))
    specs = tuple(build_scheme(problem, kind, level) for level in levels)

    task = partial(level_batch, problem, specs, seed)
    shape = (len(specs), paths)
    terminal_values = np.empty(shape + (problem.dim_state,))
    sup_norms = np.empty(shape)
    diverged = np.zeros(shape, dtype=bool)
    for batch in run_batches(task, batch_bounds(paths, batch_size), workers):
        stop = batch.start + batch.sup_norms.shape[1]
        terminal_values[:, batch.start : stop] = batch.terminal_values
        sup_norms[:, batch.start : stop] = batch.sup_norms
        diverged[:, batch.start : stop] = batch.diverged
    return LevelResults(
        specs=specs,
        terminal_values=terminal_values,
        sup_norms=sup_norms,
        diverged=diverged,
    )


def moment_sweep(
    problem: SdeProblem,
    kind: Optional[SchemeKind],
    levels: Sequence[int],
    p: float,
    paths: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    workers: int = 1,
) -> MomentTable:
    """
    Estimate E[max_k |x_k|^p], the p-th moment of the path's maximum over
    the grid points, on every level. All levels share the noise drawn on
    the finest of them.
    """
    if not p >= 2:
        raise ConfigurationError(f"p must be at least 2, got {p}.")
    kind = SchemeKind(kind or default_kind(problem))
    logger.info(
        "Moment sweep of %s for '%s': p=%g on levels %s, %d paths",
        kind,
        problem.name,
        p,
        list(levels),
        paths,
    )
    results = simulate_levels(
        problem, kind, levels, paths, seed, batch_size, workers
    )

    rows = []
    for index, spec in enumerate(results.specs):
        diverged = results.diverged[index]
        count = int(diverged.sum())
        check_divergence(kind, spec.level, count, paths)
        kept = results.sup_norms[index][~diverged]
        estimate, half_width = mean_with_half_width(kept ** p)
        rows.append(
            MomentRow(
                level=spec.level,
                h=spec.h,
                p=p,
                estimate=estimate,
                half_width=half_width,
                paths_used=int(kept.size),
                diverged=count,
            )
        )
    return MomentTable(scheme=kind, p=p, paths=paths, rows=tuple(rows))
