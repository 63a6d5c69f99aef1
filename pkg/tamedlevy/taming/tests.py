from dataclasses import replace

import numpy as np
import pytest
from faker import Faker

from tamedlevy.core.errors import ConfigurationError
from tamedlevy.problems.builtins import builtin_problem, cubic_jump_problem
from tamedlevy.problems.models import DegenerateMarks
from tamedlevy.taming.models import TamingParams
from tamedlevy.taming.utils import compensate_drift, tame_drift

fake = Faker()


def test_tame_zero_drift():
    assert tame_drift(np.zeros(2), TamingParams(n=4)) == pytest.approx(0.0)


def test_tame_small_drift():
    tamed = tame_drift(np.array([-0.8]), TamingParams(n=4))
    assert tamed[0] == pytest.approx(-0.8 / 1.16)
    assert tamed[0] == pytest.approx(-0.68966, abs=1e-5)


def test_tame_large_drift_is_bounded_by_sqrt_n():
    tamed = tame_drift(np.array([100.0]), TamingParams(n=4))
    assert tamed[0] == pytest.approx(100.0 / 2501.0)
    assert tamed[0] <= min(2.0, 100.0)


def test_for_level_uses_subintervals_per_unit_time():
    params = TamingParams.for_level(3, horizon=2.0)
    assert params.n == 4.0
    assert params.h == 0.25
    assert params.theta == 1.0


@pytest.mark.parametrize("theta", [0.0, 0.49, -1.0])
def test_theta_below_one_half_raises_ConfigurationError(theta):
    with pytest.raises(ConfigurationError):
        TamingParams(n=4, theta=theta)


@pytest.mark.parametrize("n", [0, -2, np.inf])
def test_nonpositive_n_raises_ConfigurationError(n):
    with pytest.raises(ConfigurationError):
        TamingParams(n=n)


@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_bound_holds_exactly_over_random_pairs(theta):
    rng = np.random.default_rng(fake.pyint())
    dims = rng.integers(1, 4, size=10 ** 5)
    ns = rng.integers(1, 2 ** 20 + 1, size=10 ** 5)
    values = rng.uniform(-1e6, 1e6, size=(10 ** 5, 3))
    for d, n, b in zip(dims, ns, values):
        b = b[:d]
        tamed = tame_drift(b, TamingParams(n=float(n), theta=theta))
        size = np.linalg.norm(tamed)
        assert size <= np.sqrt(n)
        assert size <= np.linalg.norm(b)


def test_direction_is_preserved():
    rng = np.random.default_rng(fake.pyint())
    b = rng.normal(scale=50.0, size=(1000, 3))
    tamed = tame_drift(b, TamingParams(n=16))
    ratio = tamed / b
    assert np.all(ratio > 0)
    assert np.all(ratio <= 1)
    assert np.allclose(ratio, ratio[:, :1], rtol=1e-14, atol=0)


@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_taming_gap_is_bounded(theta):
    rng = np.random.default_rng(fake.pyint())
    b = rng.uniform(-20.0, 20.0, size=(1000, 1))
    for level in range(1, 25):
        params = TamingParams.for_level(level, theta=theta)
        gap = np.abs(tame_drift(b, params) - b)
        bound = params.n ** -theta * np.abs(b) ** (2 * theta + 1)
        assert np.all(gap <= bound * (1 + 1e-12))


def test_taming_converges_to_drift():
    b = np.array([[3.0, -4.0]])
    gaps = [
        np.max(np.abs(tame_drift(b, TamingParams.for_level(level)) - b))
        for level in (4, 10, 20, 30)
    ]
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 1e-6


def test_compensate_drift_with_mean_zero_marks_returns_drift():
    problem = builtin_problem("example2-uniform-λ3")
    assert compensate_drift(problem) is problem.drift


def test_compensate_drift_without_jumps_returns_drift():
    problem = builtin_problem("example1")
    assert compensate_drift(problem) is problem.drift


def test_compensate_drift_with_degenerate_marks():
    problem = cubic_jump_problem("degenerate", DegenerateMarks(0.1), 2.0)
    x = np.linspace(-2.0, 2.0, 9).reshape(-1, 1)
    expected = problem.drift(x) - 0.2 * x
    assert np.allclose(compensate_drift(problem)(x), expected)


def test_compensate_drift_without_compensator_raises_ConfigurationError():
    problem = cubic_jump_problem("degenerate", DegenerateMarks(0.1), 2.0)
    problem = replace(problem, jump=replace(problem.jump, compensator=None))
    with pytest.raises(ConfigurationError, match="compensator required"):
        compensate_drift(problem)
