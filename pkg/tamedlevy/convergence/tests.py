import logging
import math
from functools import partial

import numpy as np
import pytest
from faker import Faker

from tamedlevy.convergence.harness import (batch_bounds, check_divergence,
                                           convergence_tables, error_batch,
                                           moment_sweep,
                                           run_strong_convergence)
from tamedlevy.convergence.models import (ConvergenceConfig, ErrorMeasure,
                                          ErrorRow, ErrorTable)
from tamedlevy.convergence.utils import (fit_rate, fit_rates, lq_error,
                                         lq_error_with_half_width)
from tamedlevy.core.errors import (ConfigurationError, DivergenceError,
                                   DomainError)
from tamedlevy.problems.builtins import builtin_problem, polynomial_drift
from tamedlevy.problems.models import SdeProblem
from tamedlevy.schemes.models import SchemeKind
from tamedlevy.schemes.utils import build_scheme

fake = Faker()

# Published L² errors of the tamed Milstein scheme for
# dx = (x - x^5)dt + x dw, x0 = 1, on levels 11 through 20.
PUBLISHED_L2_ERRORS = {
    11: 0.0035802581,
    12: 0.0015293072,
    13: 0.0007232200,
    14: 0.0003519474,
    15: 0.0001723833,
    16: 0.0000844630,
    17: 0.0000408359,
    18: 0.0000190372,
    19: 0.0000081546,
    20: 0.0000027396,
}


def zero_diffusion(x):
    return np.zeros(x.shape + (1,))


def zero_diffusion_jacobian(x):
    return np.zeros(x.shape + (1, x.shape[1]))


def still_problem(xi):
    return SdeProblem(
        name="still",
        dim_state=1,
        dim_noise=1,
        drift=partial(polynomial_drift, linear=0.0, power=1, coefficient=0),
        diffusion=zero_diffusion,
        diffusion_jacobian=zero_diffusion_jacobian,
        initial_value=np.array([xi]),
    )


def table_of(errors, q=2.0):
    rows = tuple(
        ErrorRow(
            level=level,
            h=2.0 ** -level,
            q=q,
            error=error,
            half_width=0.0,
            paths_used=1,
            diverged=0,
        )
        for level, error in errors.items()
    )
    return ErrorTable(
        scheme=SchemeKind.TAMED_MILSTEIN_CONTINUOUS,
        reference_scheme=SchemeKind.TAMED_MILSTEIN_CONTINUOUS,
        reference_level=max(errors) + 3,
        paths=1,
        rows=rows,
    )


def small_config(**kwargs):
    options = dict(
        levels=(3, 4, 5),
        reference_level=8,
        paths=48,
        q_list=(1, 2, 3),
        master_seed=fake.pyint(),
        batch_size=16,
    )
    options.update(kwargs)
    return ConvergenceConfig(**options)


def test_lq_error_of_constant_sample():
    c = fake.pyfloat(min_value=0.001, max_value=10)
    for q in (1, 2, 3.5, 5):
        assert lq_error([c, c, c], q) == c


def test_lq_error_examples():
    assert lq_error([0.0, 2.0], 2) == pytest.approx(math.sqrt(2))
    assert lq_error([0.1, 0.3], 1) == pytest.approx(0.2)
    assert lq_error([0.1, 0.3], 2) == pytest.approx(0.2236, abs=1e-4)


def test_lq_error_is_nondecreasing_in_q():
    rng = np.random.default_rng(fake.pyint())
    sample = rng.exponential(size=500)
    errors = [lq_error(sample, q) for q in (1, 1.5, 2, 3, 4, 5, 8)]
    assert errors == sorted(errors)


def test_lq_error_agrees_with_the_interval_estimate():
    rng = np.random.default_rng(fake.pyint())
    sample = rng.exponential(size=50)
    for q in (1, 2, 4.5):
        assert lq_error(sample, q) == lq_error_with_half_width(sample, q)[0]


def test_lq_error_of_large_errors_does_not_overflow():
    assert lq_error([1e200, 1e200], 5) == pytest.approx(1e200)


def test_lq_error_of_empty_sample_raises_DomainError():
    with pytest.raises(DomainError):
        lq_error([], 2)


@pytest.mark.parametrize("sample", [[0.1, np.nan], [0.1, -0.2]])
def test_lq_error_of_invalid_sample_raises_DomainError(sample):
    with pytest.raises(DomainError):
        lq_error(sample, 2)


def test_lq_error_with_q_below_one_raises_DomainError():
    with pytest.raises(DomainError):
        lq_error([0.1], 0.5)


def test_half_width_of_constant_sample_is_zero():
    error, half_width = lq_error_with_half_width([0.25] * 10, 3)
    assert error == 0.25
    assert half_width == 0.0


def test_half_width_of_single_sample_is_nan():
    _, half_width = lq_error_with_half_width([0.25], 2)
    assert math.isnan(half_width)


def test_half_width_uses_delta_method():
    sample = np.array([0.1, 0.2, 0.3, 0.4])
    error, half_width = lq_error_with_half_width(sample, 2)
    moment = np.mean(sample ** 2)
    spread = np.std(sample ** 2, ddof=1) / 2
    expected = 0.5 * moment ** -0.5 * 1.959963984540054 * spread
    assert error == pytest.approx(math.sqrt(moment))
    assert half_width == pytest.approx(expected)


def test_fit_rate_of_halving_errors():
    fit = fit_rate(table_of({k: 2.0 ** -k for k in range(4, 10)}), 2.0)
    assert fit.slope == pytest.approx(1.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.levels_used == tuple(range(4, 10))


def test_fit_rate_of_quartering_errors():
    fit = fit_rate(table_of({k: 3 * 4.0 ** -k for k in range(2, 6)}), 2.0)
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(math.log2(3))


def test_fit_rate_of_published_errors_is_near_one():
    fit = fit_rate(table_of(PUBLISHED_L2_ERRORS), 2.0)
    assert 0.85 <= fit.slope <= 1.15
    assert fit.slope == pytest.approx(1.107, abs=0.01)
    assert fit.r_squared >= 0.99


def test_fit_rate_leaves_out_zero_errors(caplog):
    errors = {3: 2.0 ** -3, 4: 0.0, 5: 2.0 ** -5, 6: 2.0 ** -6}
    with caplog.at_level(logging.WARNING):
        fit = fit_rate(table_of(errors), 2.0)
    assert fit.levels_used == (3, 5, 6)
    assert fit.slope == pytest.approx(1.0)
    assert "level 4" in caplog.text


def test_fit_rate_with_one_level_raises_DomainError():
    with pytest.raises(DomainError):
        fit_rate(table_of({3: 0.1, 4: 0.0}), 2.0)


def test_config_reference_guard():
    with pytest.raises(ConfigurationError):
        ConvergenceConfig(levels=(8, 9, 10), reference_level=12)
    config = ConvergenceConfig(levels=[8, 9, 10], reference_level=13)
    assert config.levels == (8, 9, 10)
    assert config.paths == 10_000
    assert config.q_list == (2.0,)


@pytest.mark.parametrize(
    "options",
    [
        {"levels": ()},
        {"levels": (4, 3)},
        {"levels": (0, 1)},
        {"q_list": (0.5,)},
        {"paths": 0},
        {"batch_size": 0},
        {"workers": -1},
    ],
)
def test_invalid_config_raises_ConfigurationError(options):
    with pytest.raises(ConfigurationError):
        small_config(**options)


def test_batch_bounds_cover_paths_in_order():
    assert batch_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]


def test_run_strong_convergence_fills_every_row():
    config = small_config()
    table = run_strong_convergence(builtin_problem("example1"), config)
    assert len(table.rows) == 9
    assert table.levels == [3, 4, 5]
    assert table.scheme == SchemeKind.TAMED_MILSTEIN_CONTINUOUS
    for level in table.levels:
        errors = [table.row(level, q).error for q in (1.0, 2.0, 3.0)]
        assert errors == sorted(errors)
        assert all(error > 0 for error in errors)
        assert table.row(level, 2.0).paths_used == 48
    assert table.row(3, 2.0).h == 0.125


def test_run_strong_convergence_is_deterministic():
    problem = builtin_problem("example2-uniform-λ3")
    config = small_config()
    first = run_strong_convergence(problem, config)
    second = run_strong_convergence(problem, config)
    assert first.rows == second.rows
    assert first.scheme == SchemeKind.TAMED_MILSTEIN_JUMP_1D


def test_run_strong_convergence_ignores_worker_count():
    problem = builtin_problem("example2-normal-λ5")
    single = run_strong_convergence(problem, small_config(master_seed=7))
    pooled = run_strong_convergence(
        problem, small_config(master_seed=7, workers=3)
    )
    assert single.rows == pooled.rows


def test_coupled_reference_has_zero_error_on_its_own_level():
    problem = builtin_problem("example2-uniform-λ5")
    reference = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 6)
    coarse = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 3)
    batch = error_batch(problem, reference, [reference, coarse], 5, (0, 32))
    assert np.all(batch.errors[0] == 0.0)
    assert np.all(batch.errors[1] > 0.0)
    assert np.all(batch.sup_errors[0] == 0.0)
    assert np.all(batch.sup_errors[1] >= batch.errors[1])


def test_grid_sup_error_bounds_the_terminal_error():
    problem = builtin_problem("example2-uniform-λ5")
    kind = SchemeKind.TAMED_MILSTEIN_JUMP_1D
    reference = build_scheme(problem, kind, 7)
    coarse = [build_scheme(problem, kind, level) for level in (2, 4)]
    batch = error_batch(problem, reference, coarse, 5, (0, 32))

    assert batch.sup_errors.shape == (2, 32)
    assert np.all(batch.sup_errors >= batch.errors)
    assert np.any(batch.sup_errors > batch.errors)


def test_convergence_tables_measure_the_same_paths():
    problem = builtin_problem("example1")
    config = small_config()
    tables = convergence_tables(problem, config)
    terminal, grid_sup = tables.terminal, tables.grid_sup

    assert terminal.measure == ErrorMeasure.TERMINAL
    assert grid_sup.measure == ErrorMeasure.GRID_SUP
    assert terminal.rows == run_strong_convergence(problem, config).rows
    assert grid_sup.levels == terminal.levels
    for row in terminal.rows:
        sup_row = grid_sup.row(row.level, row.q)
        assert sup_row.error >= row.error
        assert sup_row.paths_used == row.paths_used
        assert sup_row.h == row.h


def test_grid_sup_error_without_noise_or_drift_is_zero():
    tables = convergence_tables(still_problem(1.5), small_config())
    assert all(row.error == 0.0 for row in tables.grid_sup.rows)


def test_check_divergence_fails_tamed_schemes_only():
    check_divergence(SchemeKind.TAMED_EULER, 4, 1, 1000)
    check_divergence(SchemeKind.UNTAMED_MILSTEIN, 4, 900, 1000)
    with pytest.raises(DivergenceError):
        check_divergence(SchemeKind.TAMED_EULER, 4, 2, 1000)


def test_moment_sweep_without_noise_or_drift():
    table = moment_sweep(
        still_problem(2.0),
        SchemeKind.TAMED_MILSTEIN_CONTINUOUS,
        [2, 3, 4],
        p=2,
        paths=20,
        seed=fake.pyint(),
    )
    assert [row.estimate for row in table.rows] == [4.0, 4.0, 4.0]
    assert [row.half_width for row in table.rows] == [0.0, 0.0, 0.0]
    assert table.diverged == {2: 0, 3: 0, 4: 0}


def test_moment_sweep_tallies_untamed_divergence():
    problem = builtin_problem("example1").with_initial_value([3.0])
    table = moment_sweep(
        problem, SchemeKind.UNTAMED_MILSTEIN, [4], p=2, paths=50, seed=3
    )
    assert table.diverged[4] >= 1
    assert table.rows[0].paths_used == 50 - table.diverged[4]


def test_moment_sweep_with_p_below_two_raises_ConfigurationError():
    with pytest.raises(ConfigurationError):
        moment_sweep(builtin_problem("example1"), None, [3], 1.5, 10, 0)


@pytest.mark.slow
def test_half_widths_shrink_with_more_paths():
    problem = builtin_problem("example1")
    small = run_strong_convergence(
        problem, small_config(paths=2000, batch_size=256, master_seed=11)
    )
    large = run_strong_convergence(
        problem, small_config(paths=4000, batch_size=256, master_seed=11)
    )
    for row in small.rows:
        ratio = large.row(row.level, row.q).half_width / row.half_width
        assert 1 / math.sqrt(2) - 0.15 <= ratio <= 1 / math.sqrt(2) + 0.15


@pytest.mark.slow
def test_quintic_problem_converges_with_order_one_in_every_norm():
    config = ConvergenceConfig(
        levels=tuple(range(8, 14)),
        reference_level=16,
        paths=10_000,
        q_list=(1, 2, 3, 4, 5),
        master_seed=42,
    )
    tables = convergence_tables(builtin_problem("example1"), config)
    fits = {fit.q: fit for fit in fit_rates(tables.terminal)}
    assert 0.85 <= fits[2.0].slope <= 1.15
    assert fits[2.0].r_squared >= 0.99
    for fit in fits.values():
        assert 0.80 <= fit.slope <= 1.20
    for fit in fit_rates(tables.grid_sup):
        assert 0.80 <= fit.slope <= 1.20


@pytest.mark.slow
def test_jump_problem_converges_with_order_one():
    config = ConvergenceConfig(
        levels=tuple(range(7, 13)),
        reference_level=15,
        paths=20_000,
        master_seed=42,
        scheme=SchemeKind.TAMED_MILSTEIN_JUMP_1D,
    )
    table = run_strong_convergence(
        builtin_problem("example2-uniform-λ3"), config
    )
    assert 0.80 <= fit_rate(table, 2.0).slope <= 1.25


@pytest.mark.slow
def test_normal_marks_give_larger_errors_than_uniform_marks():
    config = ConvergenceConfig(
        levels=tuple(range(7, 11)), reference_level=13, master_seed=42
    )
    normal = run_strong_convergence(
        builtin_problem("example2-normal-λ5"), config
    )
    uniform = run_strong_convergence(
        builtin_problem("example2-uniform-λ5"), config
    )
    for level in config.levels:
        assert (
            normal.row(level, 2.0).error > uniform.row(level, 2.0).error
        )


@pytest.mark.slow
def test_tamed_moments_stay_bounded_while_untamed_diverges():
    problem = builtin_problem("example1").with_initial_value([3.0])
    tamed = moment_sweep(
        problem,
        SchemeKind.TAMED_MILSTEIN_CONTINUOUS,
        range(4, 13),
        p=2,
        paths=10_000,
        seed=42,
    )
    assert all(count == 0 for count in tamed.diverged.values())
    estimates = [row.estimate for row in tamed.rows]
    widest = max(row.half_width for row in tamed.rows)
    assert max(estimates) <= 2 * min(estimates) + 4 * widest

    untamed = moment_sweep(
        problem, SchemeKind.UNTAMED_MILSTEIN, [4], p=2, paths=10_000, seed=42
    )
    assert untamed.diverged[4] >= 1
