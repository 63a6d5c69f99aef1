from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtri

from tamedlevy.core.errors import ConfigurationError

# Coefficient callbacks work on batches of states: ``x`` has shape (P, d).
VectorField = Callable[[np.ndarray], np.ndarray]
MarkField = Callable[[np.ndarray, np.ndarray], np.ndarray]


class MarkDistribution:
    """
    Law of the scalar mark attached to each jump. Draws go through the
    inverse CDF so that every mark consumes exactly one uniform.
    """

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class NormalMarks(MarkDistribution):
    mean_value: float
    variance_value: float

    def __post_init__(self):
        if not self.variance_value > 0:
            raise ConfigurationError(
                "Normal marks require a positive variance, got "
                f"{self.variance_value}."
            )

    def mean(self) -> float:
        return self.mean_value

    def variance(self) -> float:
        return self.variance_value

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self.mean_value + np.sqrt(self.variance_value) * ndtri(u)


@dataclass(frozen=True)
class UniformMarks(MarkDistribution):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(
                f"Uniform marks require lo < hi, got [{self.lo}, {self.hi}]."
            )

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * u


@dataclass(frozen=True)
class DegenerateMarks(MarkDistribution):
    value: float

    def mean(self) -> float:
        return self.value

    def variance(self) -> float:
        return 0.0

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), self.value, dtype=float)


Compensator = Callable[[np.ndarray, MarkDistribution], np.ndarray]


@dataclass(frozen=True)
class JumpSpec:
    """
    Finite-activity jump part of an SDE: the Lévy measure is represented as
    ``intensity`` times the probability law of the marks.

    ``compensator(x, mark_law)`` returns E[γ(x, Z)] in closed form and is
    only needed when the marks do not integrate γ to zero.
    """

    intensity: float
    mark_law: MarkDistribution
    coefficient: MarkField
    coefficient_jacobian: MarkField
    mark_mean_zero: bool
    mark_dependent: bool = True
    compensator: Optional[Compensator] = None

    def __post_init__(self):
        if not (np.isfinite(self.intensity) and self.intensity >= 0):
            raise ConfigurationError(
                f"Jump intensity must be finite and nonnegative, got "
                f"{self.intensity}."
            )


@dataclass(frozen=True, eq=False)
class SdeProblem:
    """
    The SDE dx = b(x)dt + σ(x)dw + ∫γ(x,z)Ñ(dt,dz) on [0, horizon] started
    from a deterministic initial value.
    """

    name: str
    dim_state: int
    dim_noise: int
    drift: VectorField
    diffusion: VectorField
    diffusion_jacobian: VectorField
    initial_value: np.ndarray
    horizon: float = 1.0
    jump: Optional[JumpSpec] = None
    # Growth exponent of the drift's local Lipschitz constant. Stored, never
    # verified.
    growth_exponent: float = 0.0
    description: str = ""

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_noise < 1:
            raise ConfigurationError(
                "State and noise dimensions must be positive, got "
                f"d={self.dim_state}, m={self.dim_noise}."
            )
        if not self.horizon > 0:
            raise ConfigurationError(
                f"The horizon must be positive, got {self.horizon}."
            )
        if self.growth_exponent < 0:
            raise ConfigurationError(
                "The growth exponent must be nonnegative, got "
                f"{self.growth_exponent}."
            )
        xi = np.array(self.initial_value, dtype=float).reshape(-1)
        if xi.shape != (self.dim_state,) or not np.all(np.isfinite(xi)):
            raise ConfigurationError(
                f"The initial value must be a finite vector of length "
                f"{self.dim_state}."
            )
        xi.setflags(write=False)
        object.__setattr__(self, "initial_value", xi)

    @property
    def has_jumps(self) -> bool:
        return self.jump is not None and self.jump.intensity > 0

    def with_initial_value(
        self, initial_value: Sequence[float]
    ) -> "SdeProblem":
        return replace(self, initial_value=np.asarray(initial_value, float))
