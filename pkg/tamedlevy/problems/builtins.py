"""
Benchmark problems shipped with the library and the registry custom problems
are added to.

Coefficients are module-level functions bound with ``functools.partial`` so
that problems can be pickled into worker processes.
"""
from functools import lru_cache, partial
from typing import Callable, Dict, List

import numpy as np

from tamedlevy.core.errors import ConfigurationError
from tamedlevy.problems.models import (JumpSpec, MarkDistribution,
                                       NormalMarks, SdeProblem, UniformMarks)

ProblemFactory = Callable[[], SdeProblem]


def polynomial_drift(
    x: np.ndarray, linear: float, power: int, coefficient: float
) -> np.ndarray:
    """b(x) = linear·x + coefficient·x^power, componentwise."""
    return linear * x + coefficient * x ** power


@lru_cache(maxsize=None)
def _identity(d: int) -> np.ndarray:
    eye = np.eye(d)
    eye.setflags(write=False)
    return eye


@lru_cache(maxsize=None)
def _diagonal_cube(d: int) -> np.ndarray:
    # [i, j, u] = 1 iff i == j == u
    cube = np.zeros((d, d, d))
    index = np.arange(d)
    cube[index, index, index] = 1.0
    cube.setflags(write=False)
    return cube


def linear_diffusion(x: np.ndarray) -> np.ndarray:
    """σ(x) = diag(x) for d = m."""
    if x.shape[1] == 1:
        return x[:, :, np.newaxis].copy()
    return x[:, :, np.newaxis] * _identity(x.shape[1])


def linear_diffusion_jacobian(x: np.ndarray) -> np.ndarray:
    """A read-only view; the Jacobian does not depend on x."""
    d = x.shape[1]
    return np.broadcast_to(_diagonal_cube(d), (x.shape[0], d, d, d))


def multiplicative_jump(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """γ(x, z) = x·z."""
    return x * z[:, np.newaxis]


def multiplicative_jump_jacobian(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    return z[:, np.newaxis, np.newaxis] * _identity(x.shape[1])


def multiplicative_compensator(
    x: np.ndarray, mark_law: MarkDistribution
) -> np.ndarray:
    """E[γ(x, Z)] = x·E[Z] for γ(x, z) = x·z."""
    return x * mark_law.mean()


def quintic_problem() -> SdeProblem:
    return SdeProblem(
        name="example1",
        dim_state=1,
        dim_noise=1,
        drift=partial(polynomial_drift, linear=1.0, power=5, coefficient=-1.0),
        diffusion=linear_diffusion,
        diffusion_jacobian=linear_diffusion_jacobian,
        initial_value=np.array([1.0]),
        horizon=1.0,
        growth_exponent=3.0,
        description="dx = (x - x^5)dt + x dw, x0 = 1",
    )


def cubic_jump_problem(
    name: str, mark_law: MarkDistribution, intensity: float
) -> SdeProblem:
    return SdeProblem(
        name=name,
        dim_state=1,
        dim_noise=1,
        drift=partial(
            polynomial_drift, linear=0.0, power=3, coefficient=-0.10
        ),
        diffusion=linear_diffusion,
        diffusion_jacobian=linear_diffusion_jacobian,
        initial_value=np.array([1.0]),
        horizon=1.0,
        jump=JumpSpec(
            intensity=intensity,
            mark_law=mark_law,
            coefficient=multiplicative_jump,
            coefficient_jacobian=multiplicative_jump_jacobian,
            mark_mean_zero=mark_law.mean() == 0,
            mark_dependent=True,
            compensator=multiplicative_compensator,
        ),
        growth_exponent=1.0,
        description=(
            "dx = -0.10 x^3 dt + x dw + ∫ x z Ñ(dt, dz), x0 = 1, "
            f"λ = {intensity:g}, marks {mark_law}"
        ),
    )


_NORMAL_MARKS = NormalMarks(mean_value=0.0, variance_value=0.125)
_UNIFORM_MARKS = UniformMarks(lo=-0.25, hi=0.25)

_REGISTRY: Dict[str, ProblemFactory] = {
    "example1": quintic_problem,
    "example2-normal-λ3": partial(
        cubic_jump_problem, "example2-normal-λ3", _NORMAL_MARKS, 3.0
    ),
    "example2-normal-λ5": partial(
        cubic_jump_problem, "example2-normal-λ5", _NORMAL_MARKS, 5.0
    ),
    "example2-uniform-λ3": partial(
        cubic_jump_problem, "example2-uniform-λ3", _UNIFORM_MARKS, 3.0
    ),
    "example2-uniform-λ5": partial(
        cubic_jump_problem, "example2-uniform-λ5", _UNIFORM_MARKS, 5.0
    ),
}


def _normalize_name(name: str) -> str:
    # Shells and config files without unicode can spell λ as "lambda".
    return name.strip().replace("lambda", "λ")


def builtin_names() -> List[str]:
    return sorted(_REGISTRY)


def register_problem(name: str, factory: ProblemFactory) -> None:
    """
    Make a custom problem available to ``builtin_problem`` (and therefore to
    run configs) under ``name``.
    """
    name = _normalize_name(name)
    if name in _REGISTRY:
        raise ConfigurationError(
            f"A problem named '{name}' is already registered."
        )
    _REGISTRY[name] = factory


def builtin_problem(name: str) -> SdeProblem:
    """
    Returns a freshly wired problem for a registered name.
    """
    try:
        factory = _REGISTRY[_normalize_name(name)]
    except KeyError:
        raise ConfigurationError(
            f"Unknown problem '{name}'. Valid names are: "
            f"{', '.join(builtin_names())}."
        )
    return factory()
