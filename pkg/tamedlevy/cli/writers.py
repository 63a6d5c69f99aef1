"""
CSV output. Floats are written with 17 significant digits so every value
reads back as the same 64-bit float.
"""
import logging
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from tamedlevy.convergence.harness import LevelResults
from tamedlevy.convergence.models import ErrorTable, MomentTable, RateFit

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.16e"


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def _log2(values) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(np.asarray(values, dtype=float))


def errors_frame(table: ErrorTable) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "level": [row.level for row in table.rows],
            "h": [row.h for row in table.rows],
            "q": [row.q for row in table.rows],
            "error": [row.error for row in table.rows],
            "half_width": [row.half_width for row in table.rows],
            "paths": [row.paths_used for row in table.rows],
            "diverged": [row.diverged for row in table.rows],
        }
    )
    frame["log2_h"] = _log2(frame["h"])
    frame["log2_error"] = _log2(frame["error"])
    return frame.sort_values(["q", "level"], kind="stable")


def rates_frame(fits: Sequence[RateFit]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "q": [fit.q for fit in fits],
            "slope": [fit.slope for fit in fits],
            "intercept": [fit.intercept for fit in fits],
            "r_squared": [fit.r_squared for fit in fits],
        }
    )


def moments_frame(table: MomentTable) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "level": [row.level for row in table.rows],
            "h": [row.h for row in table.rows],
            "p": [row.p for row in table.rows],
            "estimate": [row.estimate for row in table.rows],
            "half_width": [row.half_width for row in table.rows],
            "paths": [row.paths_used for row in table.rows],
            "diverged": [row.diverged for row in table.rows],
        }
    )
    frame["log2_h"] = _log2(frame["h"])
    return frame


def paths_frame(results: LevelResults) -> pd.DataFrame:
    """
    One row per (level, path) with the terminal state, the grid maximum of
    |x| and the divergence flag.
    """
    frames: List[pd.DataFrame] = []
    for index, spec in enumerate(results.specs):
        values = results.terminal_values[index]
        columns = {
            "path": np.arange(values.shape[0]),
            "level": np.full(values.shape[0], spec.level),
        }
        for component in range(values.shape[1]):
            columns[f"x{component + 1}"] = values[:, component]
        columns["sup_norm"] = results.sup_norms[index]
        columns["diverged"] = results.diverged[index]
        frames.append(pd.DataFrame(columns))
    return pd.concat(frames, ignore_index=True)
