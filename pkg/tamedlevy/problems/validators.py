"""
Structural checks a problem has to pass before the Milstein kernels that rely
on them may be used.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from tamedlevy.core.errors import PreconditionError
from tamedlevy.problems.models import SdeProblem

DEFAULT_SAMPLE_COUNT = 64
DEFAULT_SAMPLE_RANGE = 2.0


@dataclass(frozen=True)
class CheckReport:
    max_violation: float
    ok: bool


def default_samples(
    dim: int, count: int = DEFAULT_SAMPLE_COUNT
) -> np.ndarray:
    """
    Quasi-uniform points in [-2, 2]^dim, shape (count, dim).
    """
    unit = qmc.Halton(d=dim, scramble=False).random(count)
    return DEFAULT_SAMPLE_RANGE * (2.0 * unit - 1.0)


def _as_samples(problem: SdeProblem, samples: Optional[np.ndarray]):
    if samples is None:
        return default_samples(problem.dim_state)
    samples = np.asarray(samples, dtype=float).reshape(-1, problem.dim_state)
    if samples.shape[0] == 0 or not np.all(np.isfinite(samples)):
        raise PreconditionError(
            "Samples must be a nonempty set of finite points."
        )
    return samples


def _report(violation: np.ndarray, tol: float) -> CheckReport:
    max_violation = float(np.max(np.abs(violation), initial=0.0))
    return CheckReport(max_violation=max_violation, ok=max_violation <= tol)


def check_diffusion_commutativity(
    problem: SdeProblem,
    samples: Optional[np.ndarray] = None,
    tol: float = 1e-12,
) -> CheckReport:
    """
    Measures Σ_u σ^(u,j) ∂σ^(i,k)/∂x^u
    - Σ_u σ^(u,k) ∂σ^(i,j)/∂x^u
    over all i, j, k at every sample.
    """
    x = _as_samples(problem, samples)
    sigma = problem.diffusion(x)
    jac = problem.diffusion_jacobian(x)
    # lhs[s, i, j, k] = Σ_u σ[s, u, j] J[s, i, k, u]
    lhs = np.einsum("suj,siku->sijk", sigma, jac)
    return _report(lhs - np.swapaxes(lhs, 2, 3), tol)


def check_jump_commutativity(
    problem: SdeProblem,
    samples: Optional[np.ndarray] = None,
    tol: float = 1e-12,
) -> CheckReport:
    """
    Measures σ^(k,j)(x + γ(x)) - σ^(k,j)(x)
    - Σ_u ∂γ^k/∂x^u σ^(u,j)(x)
    at every sample. Only defined for mark-independent jump coefficients.
    """
    jump = problem.jump
    if jump is not None and jump.mark_dependent:
        raise PreconditionError(
            "jump commutativity defined only for mark-independent γ"
        )
    x = _as_samples(problem, samples)
    if jump is None:
        return CheckReport(max_violation=0.0, ok=True)
    # Any mark will do for a mark-independent coefficient.
    z = np.zeros(x.shape[0])
    gamma = jump.coefficient(x, z)
    gamma_jac = jump.coefficient_jacobian(x, z)
    sigma = problem.diffusion(x)
    shifted = problem.diffusion(x + gamma)
    violation = shifted - sigma - np.einsum("sku,suj->skj", gamma_jac, sigma)
    return _report(violation, tol)


def _central_difference(fn, x: np.ndarray, step: float) -> np.ndarray:
    """
    Stacks ∂fn/∂x^u along a new trailing axis.
    """
    columns = []
    for u in range(x.shape[1]):
        offset = np.zeros_like(x)
        offset[:, u] = step
        columns.append((fn(x + offset) - fn(x - offset)) / (2.0 * step))
    return np.stack(columns, axis=-1)


def _relative_gap(numeric: np.ndarray, declared: np.ndarray) -> float:
    scale = np.maximum(1.0, np.abs(declared))
    return float(np.max(np.abs(numeric - declared) / scale, initial=0.0))


def check_jacobians(
    problem: SdeProblem,
    samples: Optional[np.ndarray] = None,
    step: float = 1e-6,
    rtol: float = 1e-5,
) -> CheckReport:
    """
    Compares the declared diffusion and jump Jacobians with central finite
    differences of the coefficients. Deviations are relative to
    max(1, |declared entry|).
    """
    x = _as_samples(problem, samples)
    gap = _relative_gap(
        _central_difference(problem.diffusion, x, step),
        problem.diffusion_jacobian(x),
    )
    jump = problem.jump
    if jump is not None:
        marks = jump.mark_law.from_uniforms(
            np.linspace(0.05, 0.95, x.shape[0])
        )

        def gamma(points):
            return jump.coefficient(points, marks)

        gap = max(
            gap,
            _relative_gap(
                _central_difference(gamma, x, step),
                jump.coefficient_jacobian(x, marks),
            ),
        )
    return CheckReport(max_violation=gap, ok=gap <= rtol)
