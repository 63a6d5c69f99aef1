import logging
import math
from typing import BinaryIO, List

import numpy as np

from tamedlevy.core.errors import ConfigurationError, DomainError
from tamedlevy.noise.models import (CoarseView, JumpEvent, NoiseRealization,
                                    brownian_grid)
from tamedlevy.noise.random import (Stream, generator, open_uniforms, seed_key,
                                    standard_normals)
from tamedlevy.problems.models import SdeProblem

logger = logging.getLogger(__name__)

MAX_LEVEL = 30
# Finest increments are whole multiples of 2**-INCREMENT_BITS·sqrt(T)
# (rounded up to a power of two), so sums of them are exact in float64 as
# long as they stay below 2**(53 - INCREMENT_BITS)·sqrt(T).
INCREMENT_BITS = 40


def kappa(n: int, t: float, horizon: float = 1.0) -> float:
    """
    Left grid point ⌊nt⌋/n of the grid with n cells per unit time.
    """
    if n < 1:
        raise DomainError(f"The grid parameter must be at least 1, got {n}.")
    if not 0.0 <= t <= horizon:
        raise DomainError(f"Time {t} is outside [0, {horizon}].")
    return math.floor(n * t) / n


def cell_indices(times: np.ndarray, level: int, horizon: float) -> np.ndarray:
    """
    Index of the dyadic cell [kh, kh + h) holding each time, with the
    horizon itself assigned to the last cell.
    """
    cells = 2 ** level
    index = np.floor(np.asarray(times, dtype=float) / horizon * cells)
    return np.clip(index, 0, cells - 1).astype(np.int64)


def dyadic_round(values: np.ndarray, horizon: float) -> np.ndarray:
    """
    Round to the nearest multiple of 2^e, e = ⌈log2 √T⌉ - INCREMENT_BITS.
    """
    exponent = math.ceil(0.5 * math.log2(horizon)) - INCREMENT_BITS
    return np.ldexp(np.rint(np.ldexp(values, -exponent)), exponent)


def _check_level(level_max: int) -> None:
    if not (
        isinstance(level_max, (int, np.integer))
        and 1 <= level_max <= MAX_LEVEL
    ):
        raise ConfigurationError(
            f"level_max must be an integer in [1, {MAX_LEVEL}], got "
            f"{level_max}."
        )


def _jump_times(
    rate: float, horizon: float, rng: np.random.Generator
) -> List[float]:
    """Exponential inter-arrival times of a rate-`rate` Poisson process."""
    times: List[float] = []
    t = 0.0
    while True:
        step = -math.log(float(open_uniforms(rng, None))) / rate
        t_next = t + step
        if t_next <= t:
            t_next = float(np.nextafter(t, np.inf))
        if t_next > horizon:
            return times
        times.append(t_next)
        t = t_next


def sample_noise(
    problem: SdeProblem, level_max: int, seed: int, path_index: int = 0
) -> NoiseRealization:
    """
    Draw one realization of the Brownian motion and the Poisson random
    measure driving ``problem``. Fully determined by (seed, path_index).
    """
    _check_level(level_max)
    m = problem.dim_noise
    horizon = problem.horizon
    cells = 2 ** level_max
    h = horizon / cells

    gaussian = generator(seed, path_index, Stream.GAUSSIAN)
    increments = dyadic_round(
        math.sqrt(h) * standard_normals(gaussian, (cells, m)), horizon
    )
    increments.setflags(write=False)

    events: List[JumpEvent] = []
    jump = problem.jump
    if jump is not None and jump.intensity > 0:
        times = _jump_times(
            jump.intensity,
            horizon,
            generator(seed, path_index, Stream.EXPONENTIAL),
        )
        if times:
            marks = jump.mark_law.from_uniforms(
                open_uniforms(
                    generator(seed, path_index, Stream.MARK), len(times)
                )
            )
            bridge = standard_normals(
                generator(seed, path_index, Stream.BRIDGE), (len(times), m)
            )
            events = _bridge_events(
                np.asarray(times), marks, bridge, increments, h, horizon
            )

    return NoiseRealization(
        level_max=level_max,
        horizon=horizon,
        brownian_increments=increments,
        jump_events=tuple(events),
        seed=seed_key(seed),
        path_index=path_index,
    )


def _bridge_events(
    times: np.ndarray,
    marks: np.ndarray,
    normals: np.ndarray,
    increments: np.ndarray,
    h: float,
    horizon: float,
) -> List[JumpEvent]:
    """
    Place each jump inside its finest cell by Brownian-bridge conditioning
    on the cell's end values.
    """
    level_max = int(round(math.log2(increments.shape[0])))
    cells = cell_indices(times, level_max, horizon)
    path = brownian_grid(increments)
    events = []
    for time, mark, normal, cell in zip(times, marks, normals, cells):
        start = cell * h
        elapsed = min(max(time - start, 0.0), h)
        left = path[cell]
        mean = left + (elapsed / h) * (path[cell + 1] - left)
        std = math.sqrt(elapsed * (h - elapsed) / h)
        value = mean + std * normal
        events.append(
            JumpEvent(
                time=float(time),
                mark=float(mark),
                brownian_at_jump=tuple(float(v) for v in value),
            )
        )
    return events


def coarsen(noise: NoiseRealization, level: int) -> CoarseView:
    """
    View ``noise`` on the grid of ``level`` <= level_max. A coarse increment
    is the sum of the finest increments of its cell, and since the finest
    increments are dyadic those sums and all partial sums of them are
    exact.
    """
    if not 1 <= level <= noise.level_max:
        raise DomainError(
            f"Level {level} is outside [1, {noise.level_max}] for this "
            "realization."
        )
    fine = noise.brownian_increments
    if level == noise.level_max:
        increments = fine
    else:
        stride = 2 ** (noise.level_max - level)
        increments = fine.reshape(2 ** level, stride, fine.shape[1]).sum(
            axis=1
        )
    times = np.array([event.time for event in noise.jump_events], dtype=float)
    return CoarseView(
        level=level,
        horizon=noise.horizon,
        increments=increments,
        jump_events=noise.jump_events,
        jump_cells=cell_indices(times, level, noise.horizon),
    )


_HEADER = np.dtype("<u8")
_VALUES = np.dtype("<f8")


def dump_noise(noise: NoiseRealization, fh: BinaryIO) -> int:
    """
    Write a realization as a little-endian binary record: a header of four
    unsigned 64-bit integers (level_max, m, jump count, seed), the float64
    increments row by row, then one (time, mark, w_1..w_m) float64 record per
    jump. Returns the number of bytes written. For debugging only.
    """
    m = noise.dim_noise
    header = np.array(
        [noise.level_max, m, len(noise.jump_events), noise.seed], dtype=_HEADER
    )
    jumps = np.array(
        [
            (event.time, event.mark) + tuple(event.brownian_at_jump)
            for event in noise.jump_events
        ],
        dtype=_VALUES,
    ).reshape(-1, 2 + m)
    payload = (
        header.tobytes()
        + np.ascontiguousarray(
            noise.brownian_increments, dtype=_VALUES
        ).tobytes()
        + jumps.tobytes()
    )
    fh.write(payload)
    logger.debug(
        "Dumped noise for path %d: %d bytes", noise.path_index, len(payload)
    )
    return len(payload)


def load_noise(fh: BinaryIO, horizon: float = 1.0) -> NoiseRealization:
    header = np.frombuffer(fh.read(4 * _HEADER.itemsize), dtype=_HEADER)
    level_max, m, count, seed = (int(v) for v in header)
    cells = 2 ** level_max
    increments = np.frombuffer(
        fh.read(cells * m * _VALUES.itemsize), dtype=_VALUES
    ).reshape(cells, m)
    records = np.frombuffer(
        fh.read(count * (2 + m) * _VALUES.itemsize), dtype=_VALUES
    ).reshape(count, 2 + m)
    return NoiseRealization(
        level_max=level_max,
        horizon=horizon,
        brownian_increments=increments.astype(float),
        jump_events=tuple(
            JumpEvent(
                time=float(row[0]),
                mark=float(row[1]),
                brownian_at_jump=tuple(float(v) for v in row[2:]),
            )
            for row in records
        ),
        seed=seed,
    )
