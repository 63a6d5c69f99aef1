from dataclasses import dataclass

import numpy as np

from tamedlevy.core.errors import ConfigurationError

EULER_THETA = 0.5
MILSTEIN_THETA = 1.0


@dataclass(frozen=True)
class TamingParams:
    """
    Grid parameter ``n`` (subintervals per unit time, so h = 1/n) and the
    taming exponent ``theta``.
    """

    n: float
    theta: float = MILSTEIN_THETA

    def __post_init__(self):
        if not (np.isfinite(self.n) and self.n > 0):
            raise ConfigurationError(
                f"The grid parameter n must be positive, got {self.n}."
            )
        if not self.theta >= EULER_THETA:
            raise ConfigurationError(
                f"The taming exponent must be at least 1/2, got {self.theta}."
            )

    @classmethod
    def for_level(
        cls, level: int, horizon: float = 1.0, theta: float = MILSTEIN_THETA
    ) -> "TamingParams":
        if level < 1:
            raise ConfigurationError(f"Level must be at least 1, got {level}.")
        return cls(n=2 ** level / horizon, theta=theta)

    @property
    def h(self) -> float:
        return 1.0 / self.n
