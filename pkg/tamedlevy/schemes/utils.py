import logging
from typing import Optional, Union

import numpy as np

from tamedlevy.core.errors import (ConfigurationError, DomainError,
                                   UnsupportedSchemeError)
from tamedlevy.noise.models import BatchView, NoiseRealization
from tamedlevy.noise.utils import coarsen
from tamedlevy.problems.models import SdeProblem
from tamedlevy.problems.validators import (check_diffusion_commutativity,
                                           check_jump_commutativity)
from tamedlevy.schemes.kernels import KERNELS
from tamedlevy.schemes.models import (DIVERGENCE_THRESHOLD, JUMP_KINDS,
                                      BatchResult, PathResult, SchemeKind,
                                      SchemeSpec)
from tamedlevy.taming.models import EULER_THETA, MILSTEIN_THETA, TamingParams
from tamedlevy.taming.utils import compensation

logger = logging.getLogger(__name__)


def default_kind(problem: SdeProblem) -> SchemeKind:
    """
    The strong-order-one scheme suited to ``problem``.
    """
    if not problem.has_jumps:
        return SchemeKind.TAMED_MILSTEIN_CONTINUOUS
    if problem.dim_state == 1 and problem.dim_noise == 1:
        return SchemeKind.TAMED_MILSTEIN_JUMP_1D
    return SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE


def _require_commutative_diffusion(problem: SdeProblem, kind: str) -> None:
    if problem.dim_noise == 1:
        return
    report = check_diffusion_commutativity(problem)
    if not report.ok:
        raise UnsupportedSchemeError(
            f"{kind} needs a commutative diffusion for m > 1; problem "
            f"'{problem.name}' violates it by {report.max_violation:.3e}."
        )


def _check_compatibility(problem: SdeProblem, kind: SchemeKind):
    """
    Raises for pairs the kind cannot handle and returns the compensator the
    kind has to subtract from the drift, if any.
    """
    if problem.has_jumps and not (
        kind in JUMP_KINDS or kind == SchemeKind.TAMED_EULER
    ):
        raise UnsupportedSchemeError(
            f"{kind} is for continuous problems; '{problem.name}' has jumps."
        )
    compensator = compensation(problem)

    if kind in (
        SchemeKind.TAMED_MILSTEIN_CONTINUOUS,
        SchemeKind.UNTAMED_MILSTEIN,
    ):
        _require_commutative_diffusion(problem, kind)
    elif kind == SchemeKind.TAMED_MILSTEIN_JUMP_1D:
        if problem.dim_state != 1 or problem.dim_noise != 1:
            raise UnsupportedSchemeError(
                f"{kind} needs d = m = 1, got d={problem.dim_state}, "
                f"m={problem.dim_noise}."
            )
    elif kind == SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE:
        if problem.jump is not None and problem.jump.mark_dependent:
            raise UnsupportedSchemeError(
                f"{kind} needs a mark-independent jump coefficient."
            )
        _require_commutative_diffusion(problem, kind)
        report = check_jump_commutativity(problem)
        if not report.ok:
            raise UnsupportedSchemeError(
                f"{kind} needs commutative jumps; problem '{problem.name}' "
                f"violates it by {report.max_violation:.3e}."
            )
    return compensator


def build_scheme(
    problem: SdeProblem,
    kind: Union[SchemeKind, str],
    level: int,
    theta: Optional[float] = None,
) -> SchemeSpec:
    """
    Bind a scheme kind to ``problem`` on the grid of ``level``.

    Taming uses θ = 1/2 for the Euler kind and θ = 1 otherwise unless
    ``theta`` overrides it. Raises UnsupportedSchemeError for pairs the
    kind cannot handle.
    """
    try:
        kind = SchemeKind(kind)
    except ValueError:
        raise ConfigurationError(
            f"Unknown scheme '{kind}'. Valid schemes are: "
            f"{', '.join(SchemeKind.values)}."
        )
    if not (isinstance(level, (int, np.integer)) and level >= 1):
        raise ConfigurationError(f"Level must be at least 1, got {level}.")
    compensator = _check_compatibility(problem, kind)
    if theta is None:
        theta = (
            EULER_THETA if kind == SchemeKind.TAMED_EULER else MILSTEIN_THETA
        )
    return SchemeSpec(
        kind=kind,
        level=int(level),
        taming=TamingParams.for_level(level, problem.horizon, theta),
        horizon=problem.horizon,
        compensator=compensator,
    )


def _norms(x: np.ndarray) -> np.ndarray:
    if x.shape[1] == 1:
        return np.abs(x[:, 0])
    return np.sqrt(np.sum(x * x, axis=1))


def simulate_batch(
    problem: SdeProblem,
    spec: SchemeSpec,
    batch: BatchView,
    keep_trajectory: bool = False,
    trajectory_stride: int = 1,
) -> BatchResult:
    """
    Run the scheme over every cell of ``batch`` for all of its paths at
    once. A path whose state stops being finite or leaves the ball of
    radius DIVERGENCE_THRESHOLD is flagged, parked at the origin so the
    others can continue, and reported with a NaN terminal value.

    With ``keep_trajectory`` the states at every ``trajectory_stride``-th
    grid point are kept, NaN once a path diverged.
    """
    if batch.level != spec.level or batch.horizon != spec.horizon:
        raise DomainError(
            f"The noise is on level {batch.level} over [0, {batch.horizon}] "
            f"but the scheme expects level {spec.level} over "
            f"[0, {spec.horizon}]."
        )
    if trajectory_stride < 1 or batch.cell_count % trajectory_stride:
        raise DomainError(
            f"A trajectory stride of {trajectory_stride} does not divide "
            f"the {batch.cell_count} cells of level {batch.level}."
        )
    step = KERNELS[spec.kind]
    size = batch.size
    x = np.tile(problem.initial_value, (size, 1))
    sup_norms = np.full(size, float(np.linalg.norm(problem.initial_value)))
    blowup = np.full(size, -1, dtype=np.int64)
    alive = np.ones(size, dtype=bool)
    trajectories = None
    if keep_trajectory:
        trajectories = np.full(
            (batch.cell_count // trajectory_stride + 1, size, x.shape[1]),
            np.nan,
        )
        trajectories[0] = x

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for index in range(batch.cell_count):
            x = step(problem, spec, x, batch.cell(index))
            norms = _norms(x)
            # NaN fails the comparison too.
            bad = ~(norms <= DIVERGENCE_THRESHOLD)
            if alive.all() and not bad.any():
                np.maximum(sup_norms, norms, out=sup_norms)
            else:
                new = bad & alive
                if new.any():
                    blowup[new] = index + 1
                    logger.debug(
                        "%d path(s) of %s diverged at grid index %d",
                        int(new.sum()),
                        spec.kind,
                        index + 1,
                    )
                alive = blowup < 0
                np.maximum(sup_norms, norms, out=sup_norms, where=alive)
                x[~alive] = 0.0
            done = index + 1
            if trajectories is not None and done % trajectory_stride == 0:
                row = done // trajectory_stride
                trajectories[row] = x
                trajectories[row, ~alive] = np.nan
            if not alive.any():
                break

    diverged = ~alive
    x[diverged] = np.nan
    sup_norms[diverged] = np.inf
    return BatchResult(
        terminal_values=x,
        sup_norms=sup_norms,
        blowup_index=blowup,
        trajectories=trajectories,
    )


def simulate_path(
    problem: SdeProblem,
    spec: SchemeSpec,
    noise: NoiseRealization,
    keep_trajectory: bool = False,
) -> PathResult:
    """
    Run the scheme on ``noise`` seen at the scheme's level, starting from
    the problem's initial value.
    """
    if spec.level > noise.level_max:
        raise DomainError(
            f"The scheme level {spec.level} is finer than the noise "
            f"(level_max {noise.level_max})."
        )
    batch = BatchView.stack([coarsen(noise, spec.level)])
    return simulate_batch(
        problem, spec, batch, keep_trajectory=keep_trajectory
    ).path(0)
