import io
import math

import numpy as np
import pytest
from faker import Faker
from scipy import stats

from tamedlevy.core.errors import ConfigurationError, DomainError
from tamedlevy.noise.models import BatchView, JumpEvent, NoiseRealization
from tamedlevy.noise.random import (Stream, generator, open_uniforms,
                                    seed_key)
from tamedlevy.noise.utils import (INCREMENT_BITS, MAX_LEVEL, cell_indices,
                                   coarsen, dump_noise, dyadic_round, kappa,
                                   load_noise, sample_noise)
from tamedlevy.problems.builtins import builtin_problem

fake = Faker()

SIGNIFICANCE = 0.001


def jump_problem():
    # λ = 5 on [0, 1]
    return builtin_problem("example2-normal-λ5")


def realization_with_jumps(times, level_max=3):
    events = tuple(
        JumpEvent(time=t, mark=0.1 * k, brownian_at_jump=(0.0,))
        for k, t in enumerate(times)
    )
    return NoiseRealization(
        level_max=level_max,
        horizon=1.0,
        brownian_increments=np.zeros((2 ** level_max, 1)),
        jump_events=events,
        seed=0,
    )


@pytest.mark.parametrize(
    "n, t, expected", [(4, 0.3, 0.25), (4, 0.25, 0.25), (1, 0.999, 0.0)]
)
def test_kappa_examples(n, t, expected):
    assert kappa(n, t) == expected


def test_kappa_is_idempotent():
    n = fake.pyint(min_value=1, max_value=1024)
    t = fake.pyfloat(min_value=0, max_value=1)
    assert kappa(n, kappa(n, t)) == kappa(n, t)


@pytest.mark.parametrize("n, t", [(4, -0.1), (4, 1.5), (0, 0.5)])
def test_kappa_outside_domain_raises_DomainError(n, t):
    with pytest.raises(DomainError):
        kappa(n, t)


def test_cell_indices_puts_horizon_in_last_cell():
    times = np.array([0.0, 0.24, 0.25, 0.6, 1.0])
    assert list(cell_indices(times, 2, 1.0)) == [0, 0, 1, 2, 3]


def test_open_uniforms_are_strictly_inside_unit_interval():
    rng = generator(fake.pyint(), 0, Stream.MARK)
    u = open_uniforms(rng, 10_000)
    assert np.all((u > 0) & (u < 1))


def test_seed_key_folds_negative_seeds():
    assert seed_key(-1) == 2 ** 64 - 1
    assert seed_key(42) == 42


@pytest.mark.parametrize("level_max", [0, MAX_LEVEL + 1, 2.5])
def test_level_max_out_of_range_raises_ConfigurationError(level_max):
    with pytest.raises(ConfigurationError):
        sample_noise(builtin_problem("example1"), level_max, 0)


def test_zero_intensity_draws_no_jumps():
    noise = sample_noise(builtin_problem("example1"), 6, fake.pyint())

    assert noise.jump_events == ()
    assert noise.brownian_increments.shape == (64, 1)


def test_sample_noise_is_deterministic():
    seed = fake.pyint()
    first = sample_noise(jump_problem(), 8, seed, path_index=3)
    second = sample_noise(jump_problem(), 8, seed, path_index=3)

    assert first.brownian_increments.tobytes() == (
        second.brownian_increments.tobytes()
    )
    assert first.jump_events == second.jump_events


def test_paths_draw_independent_noise():
    seed = fake.pyint()
    first = sample_noise(jump_problem(), 8, seed, path_index=0)
    second = sample_noise(jump_problem(), 8, seed, path_index=1)
    assert not np.array_equal(
        first.brownian_increments, second.brownian_increments
    )


def test_jump_events_are_ordered_inside_horizon():
    for index in range(50):
        noise = sample_noise(jump_problem(), 5, 11, path_index=index)
        times = [event.time for event in noise.jump_events]
        assert times == sorted(set(times))
        assert all(0.0 < t <= 1.0 for t in times)
        for event in noise.jump_events:
            assert np.all(np.isfinite(event.brownian_at_jump))


def test_brownian_increments_are_standard_gaussian():
    noise = sample_noise(builtin_problem("example1"), 16, fake.pyint())
    z = noise.brownian_increments[:, 0] / math.sqrt(noise.h)
    count = z.size

    assert abs(z.mean()) < 4 / math.sqrt(count)
    assert abs(z.var() - 1.0) < 4 * math.sqrt(2 / count)


def test_terminal_brownian_value_has_mean_zero():
    problem = builtin_problem("example1")
    count = 20_000
    terminal = np.array(
        [
            sample_noise(problem, 1, 5, path_index=index).brownian_path[-1, 0]
            for index in range(count)
        ]
    )
    assert abs(terminal.mean()) < 4 / math.sqrt(count)
    assert abs(terminal.var() - 1.0) < 4 * math.sqrt(2 / count)


def poisson_counts(count, seed):
    problem = jump_problem()
    return np.array(
        [
            len(sample_noise(problem, 1, seed, path_index=index).jump_events)
            for index in range(count)
        ]
    )


def assert_poisson(counts, rate):
    assert abs(counts.mean() - rate) < 4 * math.sqrt(rate / counts.size)

    top = 12
    observed = np.bincount(np.minimum(counts, top), minlength=top + 1)
    expected = stats.poisson.pmf(np.arange(top), rate)
    expected = np.append(expected, stats.poisson.sf(top - 1, rate))
    result = stats.chisquare(observed, counts.size * expected)
    assert result.pvalue > SIGNIFICANCE


def test_jump_counts_are_poisson():
    assert_poisson(poisson_counts(20_000, 3), 5.0)


def standardized_bridge_values(noise):
    values = []
    path = noise.brownian_path[:, 0]
    h = noise.h
    for event in noise.jump_events:
        cell = int(
            cell_indices(np.array([event.time]), noise.level_max, 1.0)[0]
        )
        elapsed = event.time - cell * h
        mean = path[cell] + (elapsed / h) * (path[cell + 1] - path[cell])
        std = math.sqrt(elapsed * (h - elapsed) / h)
        values.append((event.brownian_at_jump[0] - mean) / std)
    return values


def test_brownian_value_at_jump_follows_the_bridge():
    values = []
    index = 0
    while len(values) < 10_000:
        noise = sample_noise(jump_problem(), 2, 17, path_index=index)
        values.extend(standardized_bridge_values(noise))
        index += 1
    assert stats.kstest(values, "norm").pvalue > SIGNIFICANCE


def test_coarsen_to_finest_level_is_identity():
    noise = sample_noise(jump_problem(), 6, fake.pyint())
    view = coarsen(noise, 6)

    assert np.array_equal(view.brownian_path, noise.brownian_path)
    assert view.jump_events == noise.jump_events
    assert np.array_equal(view.increments, noise.brownian_increments)


def test_coarse_increment_sums_fine_increments():
    noise = sample_noise(builtin_problem("example1"), 3, fake.pyint())
    view = coarsen(noise, 1)

    assert view.increments.shape == (2, 1)
    assert view.increments[0, 0] == noise.brownian_increments[:4, 0].sum()
    assert view.increments[1, 0] == sum(noise.brownian_increments[4:, 0])


def test_finest_increments_are_dyadic():
    noise = sample_noise(jump_problem(), 8, fake.pyint())
    scaled = np.ldexp(noise.brownian_increments, INCREMENT_BITS)
    assert np.array_equal(scaled, np.rint(scaled))


def test_dyadic_round_scales_with_the_horizon():
    value = np.array([0.1])
    assert dyadic_round(value, 1.0)[0] * 2 ** 40 % 1 == 0
    assert dyadic_round(value, 4.0)[0] * 2 ** 39 % 1 == 0
    assert dyadic_round(value, 1.0)[0] == pytest.approx(0.1, abs=2 ** -40)


def test_coarse_partial_sums_reproduce_the_finest_endpoint():
    for seed in range(20):
        noise = sample_noise(jump_problem(), 10, seed)
        endpoint = noise.brownian_path[-1]
        for level in range(1, 11):
            view = coarsen(noise, level)
            stride = 2 ** (10 - level)
            fine = noise.brownian_increments.reshape(2 ** level, stride, 1)
            assert np.array_equal(view.increments, fine.sum(axis=1))
            assert np.array_equal(
                np.cumsum(view.increments, axis=0)[-1], endpoint
            )
            assert np.array_equal(
                np.cumsum(view.increments[::-1], axis=0)[-1], endpoint
            )


def test_coarse_grid_values_are_finest_values():
    noise = sample_noise(jump_problem(), 10, fake.pyint())
    for level in range(1, 11):
        view = coarsen(noise, level)
        stride = 2 ** (10 - level)
        assert view.brownian_path[-1, 0] == noise.brownian_path[-1, 0]
        assert np.array_equal(
            view.brownian_path, noise.brownian_path[::stride]
        )


def test_coarsen_bins_jumps_by_cell():
    noise = realization_with_jumps([0.2, 0.6, 0.7, 1.0])
    view = coarsen(noise, 1)
    batch = BatchView.stack([view])

    assert list(view.jump_cells) == [0, 1, 1, 1]
    assert [e.time for e in batch.cell(0).jumps[0]] == [0.2]
    assert [e.time for e in batch.cell(1).jumps[0]] == [0.6, 0.7, 1.0]
    assert list(batch.jump_counts[:, 0]) == [1, 3]


@pytest.mark.parametrize("level", [0, 4])
def test_coarsen_outside_levels_raises_DomainError(level):
    with pytest.raises(DomainError):
        coarsen(realization_with_jumps([]), level)


def test_batch_view_stacks_paths():
    views = [
        coarsen(realization_with_jumps([0.6]), 2),
        coarsen(realization_with_jumps([]), 2),
        coarsen(realization_with_jumps([0.55, 0.7]), 2),
    ]
    batch = BatchView.stack(views)

    assert batch.size == 3
    assert batch.cell_count == 4
    assert batch.brownian_path.shape == (5, 3, 1)
    assert list(batch.jump_counts[2]) == [1, 0, 2]
    assert sorted(batch.cell(2).jumps) == [0, 2]
    assert not batch.cell(0).has_jumps


def test_batch_view_of_mixed_levels_raises():
    with pytest.raises(ValueError):
        BatchView.stack(
            [
                coarsen(realization_with_jumps([]), 1),
                coarsen(realization_with_jumps([]), 2),
            ]
        )


def test_dump_and_load_keep_the_realization():
    noise = sample_noise(jump_problem(), 4, fake.pyint(), path_index=2)
    buffer = io.BytesIO()

    written = dump_noise(noise, buffer)
    buffer.seek(0)
    loaded = load_noise(buffer)

    count = len(noise.jump_events)
    assert written == 8 * (4 + 16 + 3 * count)
    assert loaded.level_max == 4
    assert loaded.seed == noise.seed
    assert np.array_equal(
        loaded.brownian_increments, noise.brownian_increments
    )
    assert loaded.jump_events == noise.jump_events


@pytest.mark.slow
def test_jump_counts_over_many_seeds_are_poisson():
    assert_poisson(poisson_counts(100_000, 23), 5.0)
