from functools import partial

import numpy as np
import pytest
from faker import Faker
from scipy.integrate import solve_ivp

from tamedlevy.core.errors import (ConfigurationError, DomainError,
                                   UnsupportedSchemeError)
from tamedlevy.noise.models import BatchView, Cell, JumpEvent, NoiseRealization
from tamedlevy.noise.utils import coarsen, sample_noise
from tamedlevy.problems.builtins import (builtin_problem, cubic_jump_problem,
                                         linear_diffusion,
                                         linear_diffusion_jacobian,
                                         polynomial_drift)
from tamedlevy.problems.models import (DegenerateMarks, JumpSpec, SdeProblem,
                                       UniformMarks)
from tamedlevy.schemes.kernels import (step_tamed_euler,
                                       step_tamed_milstein_continuous,
                                       step_tamed_milstein_jump_1d,
                                       step_tamed_milstein_jump_commutative,
                                       step_untamed_milstein)
from tamedlevy.schemes.models import SchemeKind
from tamedlevy.schemes.utils import (build_scheme, default_kind,
                                     simulate_batch, simulate_path)
from tamedlevy.taming.models import TamingParams
from tamedlevy.taming.utils import tame_drift

fake = Faker()

QUINTIC = partial(polynomial_drift, linear=1.0, power=5, coefficient=-1.0)
ZERO_DRIFT = partial(polynomial_drift, linear=0.0, power=1, coefficient=0.0)


def zero_diffusion(x):
    return np.zeros(x.shape + (1,))


def zero_diffusion_jacobian(x):
    return np.zeros(x.shape + (1, x.shape[1]))


def constant_diffusion(x):
    return np.full(x.shape + (1,), 0.3)


def half_jump(x, z):
    return 0.5 * x


def half_jump_jacobian(x, z):
    return np.full((x.shape[0], 1, 1), 0.5)


def row_diffusion(x):
    # σ(x) = (x, x²) for d = 1, m = 2
    return np.stack([x, x ** 2], axis=-1)


def row_diffusion_jacobian(x):
    return np.stack([np.ones_like(x), 2 * x], axis=-1)[..., np.newaxis]


def continuous_problem(
    drift=QUINTIC,
    diffusion=linear_diffusion,
    jacobian=linear_diffusion_jacobian,
    initial_value=1.0,
):
    return SdeProblem(
        name="continuous",
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        diffusion_jacobian=jacobian,
        initial_value=np.array([initial_value]),
    )


def commutative_problem(drift=QUINTIC, intensity=0.0):
    return SdeProblem(
        name="commutative",
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=linear_diffusion,
        diffusion_jacobian=linear_diffusion_jacobian,
        initial_value=np.array([1.0]),
        jump=JumpSpec(
            intensity=intensity,
            mark_law=DegenerateMarks(0.0),
            coefficient=half_jump,
            coefficient_jacobian=half_jump_jacobian,
            mark_mean_zero=True,
            mark_dependent=False,
        ),
    )


def make_cell(dw, events=(), h=0.25):
    return Cell(
        h=h,
        increments=np.array([[dw]]),
        jump_counts=np.array([len(events)]),
        left=np.zeros((1, 1)),
        right=np.array([[dw]]),
        jumps={0: tuple(events)} if events else {},
    )


def batch_for(problem, level, paths, seed, level_max=None):
    views = [
        coarsen(sample_noise(problem, level_max or level, seed, i), level)
        for i in range(paths)
    ]
    return BatchView.stack(views)


def test_tamed_euler_step_example():
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.TAMED_EULER, 2)
    nxt = step_tamed_euler(problem, spec, np.array([[1.0]]), make_cell(0.5))
    assert nxt[0, 0] == pytest.approx(1.5)


def test_tamed_euler_step_without_noise_keeps_equilibrium():
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.TAMED_EULER, 2)
    nxt = step_tamed_euler(problem, spec, np.array([[1.0]]), make_cell(0.0))
    assert nxt[0, 0] == 1.0


def test_tamed_euler_step_adds_jumps_and_compensation():
    problem = cubic_jump_problem("degenerate", DegenerateMarks(0.1), 2.0)
    spec = build_scheme(problem, SchemeKind.TAMED_EULER, 2)
    event = JumpEvent(time=0.1, mark=0.1, brownian_at_jump=(0.0,))
    x = np.array([[1.0]])
    nxt = step_tamed_euler(problem, spec, x, make_cell(0.0, [event]))
    tamed = tame_drift(np.array([-0.1]), TamingParams(n=4, theta=0.5))
    expected = 1.0 + (tamed[0] - 0.2) * 0.25 + 0.1
    assert nxt[0, 0] == pytest.approx(expected)


@pytest.mark.parametrize("dw, expected", [(0.5, 1.5), (0.0, 0.875)])
def test_tamed_milstein_continuous_step_examples(dw, expected):
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 2)
    nxt = step_tamed_milstein_continuous(
        problem, spec, np.array([[1.0]]), make_cell(dw)
    )
    assert nxt[0, 0] == pytest.approx(expected)


def test_tamed_milstein_jump_1d_step_example():
    problem = builtin_problem("example2-uniform-λ3")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 2)
    event = JumpEvent(time=0.1, mark=0.1, brownian_at_jump=(0.2,))
    nxt = step_tamed_milstein_jump_1d(
        problem, spec, np.array([[1.0]]), make_cell(0.0, [event])
    )
    assert nxt[0, 0] == pytest.approx(0.9500624, abs=1e-7)


def test_tamed_milstein_jump_1d_double_sum_counts_each_pair_once():
    problem = builtin_problem("example2-uniform-λ3")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 2)
    x = np.array([[1.0]])
    c = 0.1
    events = [
        JumpEvent(time=0.05, mark=c, brownian_at_jump=(0.0,)),
        JumpEvent(time=0.15, mark=c, brownian_at_jump=(0.0,)),
    ]
    plain = step_tamed_milstein_jump_1d(problem, spec, x, make_cell(0.0))
    jumped = step_tamed_milstein_jump_1d(
        problem, spec, x, make_cell(0.0, events)
    )
    # two single jumps of x·c plus the (1, 2) pair term (x + xc)c - xc
    assert jumped[0, 0] - plain[0, 0] == pytest.approx(2 * c + c * c)


def test_tamed_milstein_jump_1d_without_jumps_equals_continuous():
    problem = builtin_problem("example2-uniform-λ3")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 3)
    x = np.array([[1.3]])
    cell = make_cell(0.17, h=0.125)
    assert np.array_equal(
        step_tamed_milstein_jump_1d(problem, spec, x, cell),
        step_tamed_milstein_continuous(problem, spec, x, cell),
    )


def test_tamed_milstein_jump_commutative_step_example():
    problem = commutative_problem(drift=ZERO_DRIFT)
    spec = build_scheme(
        problem, SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE, 2
    )
    events = [
        JumpEvent(time=0.05, mark=0.0, brownian_at_jump=(0.01,)),
        JumpEvent(time=0.2, mark=0.0, brownian_at_jump=(0.08,)),
    ]
    nxt = step_tamed_milstein_jump_commutative(
        problem, spec, np.array([[1.0]]), make_cell(0.1, events)
    )
    # 1 + σΔw - 0.12 + γΔN + (σ(1.5) - σ(1))ΔNΔw
    #   + ½(γ(1.5) - γ(1))(ΔN² - ΔN)
    assert nxt[0, 0] == pytest.approx(1.0 + 0.1 - 0.12 + 1.0 + 0.1 + 0.25)


def test_tamed_milstein_jump_commutative_single_jump_has_no_pair_term():
    problem = commutative_problem(drift=ZERO_DRIFT)
    spec = build_scheme(
        problem, SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE, 2
    )
    event = JumpEvent(time=0.05, mark=0.0, brownian_at_jump=(0.01,))
    x = np.array([[1.0]])
    plain = step_tamed_milstein_continuous(problem, spec, x, make_cell(0.1))
    jumped = step_tamed_milstein_jump_commutative(
        problem, spec, x, make_cell(0.1, [event])
    )
    assert jumped[0, 0] - plain[0, 0] == pytest.approx(0.5 + 0.5 * 0.1)


def test_untamed_milstein_step_overshoots():
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.UNTAMED_MILSTEIN, 1)
    x = np.array([[3.0]])
    untamed = step_untamed_milstein(problem, spec, x, make_cell(0.0, h=0.5))
    assert untamed[0, 0] == pytest.approx(3.0 - 120.0 - 0.75)
    tamed = step_tamed_milstein_continuous(
        problem, spec, x, make_cell(0.0, h=0.5)
    )
    assert abs(tamed[0, 0]) < abs(untamed[0, 0])


def test_untamed_milstein_step_at_equilibrium_equals_tamed():
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.UNTAMED_MILSTEIN, 3)
    x = np.array([[1.0]])
    cell = make_cell(0.21, h=0.125)
    assert np.array_equal(
        step_untamed_milstein(problem, spec, x, cell),
        step_tamed_milstein_continuous(problem, spec, x, cell),
    )


def test_untamed_milstein_step_gap_for_lipschitz_drift():
    # b(x) = -x is globally Lipschitz
    problem = continuous_problem(
        drift=partial(polynomial_drift, linear=-1.0, power=1, coefficient=0)
    )
    spec = build_scheme(problem, SchemeKind.UNTAMED_MILSTEIN, 12)
    x = np.linspace(-3.0, 3.0, 13).reshape(-1, 1)
    cell = Cell(
        h=spec.h,
        increments=np.full((13, 1), 0.01),
        jump_counts=np.zeros(13, dtype=np.int64),
    )
    gap = np.abs(
        step_untamed_milstein(problem, spec, x, cell)
        - step_tamed_milstein_continuous(problem, spec, x, cell)
    )
    bound = np.abs(x) ** 3 / spec.taming.n * spec.h
    assert np.all(gap <= bound + 1e-15)


def test_default_kind_follows_problem():
    assert default_kind(builtin_problem("example1")) == (
        SchemeKind.TAMED_MILSTEIN_CONTINUOUS
    )
    assert default_kind(builtin_problem("example2-normal-λ5")) == (
        SchemeKind.TAMED_MILSTEIN_JUMP_1D
    )


def test_build_scheme_picks_theta_by_kind():
    problem = builtin_problem("example1")
    euler = build_scheme(problem, "tamed-euler", 5)
    milstein = build_scheme(problem, "tamed-milstein-continuous", 5)
    assert euler.taming.theta == 0.5
    assert milstein.taming.theta == 1.0
    assert milstein.taming.n == 32.0
    assert milstein.h == 1 / 32


def test_build_scheme_resolves_the_compensator():
    problem = cubic_jump_problem("degenerate", DegenerateMarks(0.1), 2.0)
    spec = build_scheme(problem, SchemeKind.TAMED_EULER, 2)
    x = np.array([[1.0], [-2.0]])

    assert np.allclose(spec.compensator(x), 0.2 * x)
    assert build_scheme(problem, SchemeKind.TAMED_EULER, 3) == (
        build_scheme(problem, SchemeKind.TAMED_EULER, 3)
    )


@pytest.mark.parametrize(
    "name, kind",
    [
        ("example1", SchemeKind.TAMED_EULER),
        ("example2-normal-λ5", SchemeKind.TAMED_MILSTEIN_JUMP_1D),
    ],
)
def test_mean_zero_or_continuous_problems_need_no_compensator(name, kind):
    assert build_scheme(builtin_problem(name), kind, 2).compensator is None


def test_build_scheme_with_unknown_kind_raises_ConfigurationError():
    with pytest.raises(ConfigurationError):
        build_scheme(builtin_problem("example1"), fake.word(), 4)


def test_continuous_scheme_on_jump_problem_raises_UnsupportedSchemeError():
    with pytest.raises(UnsupportedSchemeError):
        build_scheme(
            builtin_problem("example2-normal-λ3"),
            SchemeKind.TAMED_MILSTEIN_CONTINUOUS,
            4,
        )


def test_untamed_scheme_on_jump_problem_raises_UnsupportedSchemeError():
    with pytest.raises(UnsupportedSchemeError):
        build_scheme(
            builtin_problem("example2-normal-λ3"),
            SchemeKind.UNTAMED_MILSTEIN,
            4,
        )


def test_noncommutative_diffusion_raises_UnsupportedSchemeError():
    problem = SdeProblem(
        name="row",
        dim_state=1,
        dim_noise=2,
        drift=QUINTIC,
        diffusion=row_diffusion,
        diffusion_jacobian=row_diffusion_jacobian,
        initial_value=np.array([1.0]),
    )
    with pytest.raises(UnsupportedSchemeError):
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 4)
    # Euler needs no commutativity
    build_scheme(problem, SchemeKind.TAMED_EULER, 4)


def test_jump_1d_scheme_in_two_dimensions_raises_UnsupportedSchemeError():
    problem = SdeProblem(
        name="planar",
        dim_state=2,
        dim_noise=2,
        drift=QUINTIC,
        diffusion=linear_diffusion,
        diffusion_jacobian=linear_diffusion_jacobian,
        initial_value=np.array([1.0, 1.0]),
    )
    with pytest.raises(UnsupportedSchemeError):
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 4)


def test_commutative_scheme_with_mark_dependent_jumps_raises_error():
    with pytest.raises(UnsupportedSchemeError):
        build_scheme(
            builtin_problem("example2-uniform-λ5"),
            SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE,
            4,
        )


def test_jump_1d_without_jumps_reproduces_continuous_bitwise():
    problem = cubic_jump_problem("no-jumps", UniformMarks(-0.25, 0.25), 0.0)
    batch = batch_for(problem, 7, 100, fake.pyint())
    jump = simulate_batch(
        problem,
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 7),
        batch,
    )
    continuous = simulate_batch(
        problem,
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 7),
        batch,
    )
    assert np.array_equal(jump.terminal_values, continuous.terminal_values)
    assert np.array_equal(jump.sup_norms, continuous.sup_norms)


def test_commutative_without_jumps_reproduces_continuous_bitwise():
    problem = commutative_problem(intensity=0.0)
    batch = batch_for(problem, 7, 100, fake.pyint())
    jump = simulate_batch(
        problem,
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE, 7),
        batch,
    )
    continuous = simulate_batch(
        problem,
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 7),
        batch,
    )
    assert np.array_equal(jump.terminal_values, continuous.terminal_values)


def test_continuous_with_constant_diffusion_reproduces_euler_bitwise():
    problem = continuous_problem(
        diffusion=constant_diffusion, jacobian=zero_diffusion_jacobian
    )
    batch = batch_for(problem, 7, 100, fake.pyint())
    milstein = simulate_batch(
        problem,
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 7),
        batch,
    )
    euler = simulate_batch(
        problem,
        build_scheme(problem, SchemeKind.TAMED_EULER, 7, theta=1.0),
        batch,
    )
    assert np.array_equal(milstein.terminal_values, euler.terminal_values)


def test_simulate_path_matches_batch_rows():
    problem = builtin_problem("example2-normal-λ5")
    seed = fake.pyint()
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_JUMP_1D, 6)
    batch = batch_for(problem, 6, 5, seed, level_max=9)
    result = simulate_batch(problem, spec, batch)
    for i in range(5):
        path = simulate_path(problem, spec, sample_noise(problem, 9, seed, i))
        assert np.array_equal(path.terminal_value, result.terminal_values[i])
        assert path.sup_norm == result.sup_norms[i]


def test_simulate_path_without_noise_or_drift_stays_at_initial_value():
    problem = continuous_problem(
        drift=ZERO_DRIFT,
        diffusion=zero_diffusion,
        jacobian=zero_diffusion_jacobian,
        initial_value=fake.pyfloat(min_value=-5, max_value=5),
    )
    noise = NoiseRealization(
        level_max=6,
        horizon=1.0,
        brownian_increments=np.zeros((64, 1)),
        jump_events=(),
        seed=0,
    )
    for kind in SchemeKind.values:
        result = simulate_path(problem, build_scheme(problem, kind, 6), noise)
        assert result.terminal_value[0] == problem.initial_value[0]
        assert not result.diverged


@pytest.mark.parametrize("xi", [1.0, 0.5])
def test_deterministic_problem_matches_ode_reference(xi):
    problem = continuous_problem(
        diffusion=zero_diffusion,
        jacobian=zero_diffusion_jacobian,
        initial_value=xi,
    )
    noise = sample_noise(problem, 16, fake.pyint(), 0)
    tamed = simulate_path(
        problem,
        build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 16),
        noise,
    )
    untamed = simulate_path(
        problem, build_scheme(problem, SchemeKind.UNTAMED_MILSTEIN, 16), noise
    )
    reference = solve_ivp(
        lambda t, y: y - y ** 5,
        (0.0, 1.0),
        [xi],
        method="RK45",
        rtol=1e-12,
        atol=1e-12,
        max_step=1e-3,
    )
    assert tamed.terminal_value[0] == pytest.approx(
        reference.y[0, -1], abs=1e-3
    )
    assert tamed.terminal_value[0] == pytest.approx(
        untamed.terminal_value[0], abs=1e-6
    )


def test_simulate_path_above_noise_level_raises_DomainError():
    problem = builtin_problem("example1")
    noise = sample_noise(problem, 4, fake.pyint())
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 5)
    with pytest.raises(DomainError):
        simulate_path(problem, spec, noise)


def test_untamed_milstein_diverges_from_large_initial_value():
    problem = builtin_problem("example1").with_initial_value([3.0])
    spec = build_scheme(problem, SchemeKind.UNTAMED_MILSTEIN, 4)
    result = simulate_batch(problem, spec, batch_for(problem, 4, 20, 1))
    assert result.diverged.any()
    path = result.path(int(np.flatnonzero(result.diverged)[0]))
    assert path.diverged
    assert path.blowup_index >= 1
    assert np.isnan(path.terminal_value).all()
    assert path.sup_norm == np.inf


def test_trajectory_is_cell_local():
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 5)
    noise = sample_noise(problem, 5, fake.pyint())
    increments = noise.brownian_increments.copy()
    increments[20:] = increments[20:][::-1]
    shuffled = NoiseRealization(
        level_max=5,
        horizon=1.0,
        brownian_increments=increments,
        jump_events=(),
        seed=noise.seed,
    )
    first = simulate_path(problem, spec, noise, keep_trajectory=True)
    second = simulate_path(problem, spec, shuffled, keep_trajectory=True)
    assert first.trajectory.shape == (33, 1)
    assert np.array_equal(first.trajectory[:21], second.trajectory[:21])


def test_trajectory_stride_keeps_every_stride_th_state():
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 5)
    batch = batch_for(problem, 5, 4, fake.pyint())

    full = simulate_batch(problem, spec, batch, keep_trajectory=True)
    sparse = simulate_batch(
        problem, spec, batch, keep_trajectory=True, trajectory_stride=8
    )

    assert sparse.trajectories.shape == (5, 4, 1)
    assert np.array_equal(sparse.trajectories, full.trajectories[::8])
    assert np.array_equal(sparse.terminal_values, full.terminal_values)


@pytest.mark.parametrize("stride", [0, 3])
def test_trajectory_stride_must_divide_the_grid(stride):
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 5)
    with pytest.raises(DomainError):
        simulate_batch(
            problem,
            spec,
            batch_for(problem, 5, 2, fake.pyint()),
            keep_trajectory=True,
            trajectory_stride=stride,
        )


def test_diverged_paths_leave_nan_in_strided_trajectories():
    problem = builtin_problem("example1").with_initial_value([3.0])
    spec = build_scheme(problem, SchemeKind.UNTAMED_MILSTEIN, 4)
    result = simulate_batch(
        problem,
        spec,
        batch_for(problem, 4, 20, 1),
        keep_trajectory=True,
        trajectory_stride=4,
    )
    row = int(np.flatnonzero(result.diverged)[0])
    assert np.isnan(result.trajectories[-1, row]).all()
    assert result.trajectories[0, row, 0] == 3.0


def test_continuous_step_mean_matches_tamed_drift():
    problem = builtin_problem("example1")
    spec = build_scheme(problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, 4)
    size = 10 ** 6
    rng = np.random.default_rng(fake.pyint())
    x0 = 1.4
    cell = Cell(
        h=spec.h,
        increments=rng.normal(scale=np.sqrt(spec.h), size=(size, 1)),
        jump_counts=np.zeros(size, dtype=np.int64),
    )
    moves = (
        step_tamed_milstein_continuous(
            problem, spec, np.full((size, 1), x0), cell
        )[:, 0]
        - x0
    )
    expected = tame_drift(problem.drift(np.array([[x0]])), spec.taming)
    error = np.std(moves) / np.sqrt(size)
    assert abs(np.mean(moves) - expected[0, 0] * spec.h) <= 4 * error


@pytest.mark.slow
@pytest.mark.parametrize("xi", [1.0, 2.0, 3.0])
def test_tamed_milstein_stays_finite(xi):
    problem = builtin_problem("example1").with_initial_value([xi])
    seed = fake.pyint()
    for start in range(0, 10 ** 4, 500):
        noises = [
            sample_noise(problem, 12, seed, i)
            for i in range(start, start + 500)
        ]
        for level in range(4, 13):
            spec = build_scheme(
                problem, SchemeKind.TAMED_MILSTEIN_CONTINUOUS, level
            )
            batch = BatchView.stack([coarsen(n, level) for n in noises])
            result = simulate_batch(problem, spec, batch)
            assert not result.diverged.any()
            assert np.all(result.sup_norms < 1e6)
