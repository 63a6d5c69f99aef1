import numpy as np
import pytest
from faker import Faker

from tamedlevy.core.errors import ConfigurationError, PreconditionError
from tamedlevy.problems.builtins import (builtin_names, builtin_problem,
                                         linear_diffusion,
                                         linear_diffusion_jacobian,
                                         polynomial_drift, register_problem)
from tamedlevy.problems.models import (DegenerateMarks, JumpSpec, NormalMarks,
                                       SdeProblem, UniformMarks)
from tamedlevy.problems.validators import (check_diffusion_commutativity,
                                           check_jacobians,
                                           check_jump_commutativity,
                                           default_samples)

fake = Faker()


def cubic_drift(x):
    return polynomial_drift(x, linear=0.0, power=3, coefficient=-1.0)


def skewed_diffusion(x):
    sigma = np.zeros((x.shape[0], 2, 2))
    sigma[:, 0, 0] = 1.0
    sigma[:, 1, 1] = x[:, 0]
    return sigma


def skewed_diffusion_jacobian(x):
    jac = np.zeros((x.shape[0], 2, 2, 2))
    jac[:, 1, 1, 0] = 1.0
    return jac


def row_diffusion(x):
    # d = 1, m = 2: σ = (x, x²)
    return np.stack([x, x ** 2], axis=-1)


def row_diffusion_jacobian(x):
    return np.stack([np.ones_like(x), 2 * x], axis=-1)[..., np.newaxis]


def square_diffusion(x):
    return (x ** 2)[:, :, np.newaxis]


def square_diffusion_jacobian(x):
    return (2 * x)[:, :, np.newaxis, np.newaxis]


def half_jump(x, z):
    return 0.5 * x


def half_jump_jacobian(x, z):
    return np.broadcast_to(0.5 * np.eye(x.shape[1]), x.shape + (x.shape[1],))


def unit_jump(x, z):
    return np.ones_like(x)


def unit_jump_jacobian(x, z):
    return np.zeros(x.shape + (x.shape[1],))


def zero_jacobian(x):
    return np.zeros(x.shape + (x.shape[1], x.shape[1]))


def linear_problem(dim=1, jump=None, diffusion_jacobian=None):
    return SdeProblem(
        name="linear",
        dim_state=dim,
        dim_noise=dim,
        drift=cubic_drift,
        diffusion=linear_diffusion,
        diffusion_jacobian=diffusion_jacobian or linear_diffusion_jacobian,
        initial_value=np.ones(dim),
        jump=jump,
    )


def independent_jump(coefficient, jacobian, intensity=1.0):
    return JumpSpec(
        intensity=intensity,
        mark_law=DegenerateMarks(0.0),
        coefficient=coefficient,
        coefficient_jacobian=jacobian,
        mark_mean_zero=True,
        mark_dependent=False,
    )


def test_example1_coefficients():
    problem = builtin_problem("example1")
    x = np.array([[2.0], [-1.0]])

    assert (problem.dim_state, problem.dim_noise) == (1, 1)
    assert list(problem.initial_value) == [1.0]
    assert problem.horizon == 1.0
    assert not problem.has_jumps
    assert list(problem.drift(x)[:, 0]) == [-30.0, 0.0]
    assert list(problem.diffusion(x)[:, 0, 0]) == [2.0, -1.0]
    assert list(problem.diffusion_jacobian(x)[:, 0, 0, 0]) == [1.0, 1.0]


@pytest.mark.parametrize(
    "name, intensity, mark_type",
    [
        ("example2-normal-λ3", 3.0, NormalMarks),
        ("example2-normal-λ5", 5.0, NormalMarks),
        ("example2-uniform-λ3", 3.0, UniformMarks),
        ("example2-uniform-λ5", 5.0, UniformMarks),
    ],
)
def test_example2_variants(name, intensity, mark_type):
    problem = builtin_problem(name)
    jump = problem.jump

    assert problem.has_jumps
    assert jump.intensity == intensity
    assert isinstance(jump.mark_law, mark_type)
    assert jump.mark_law.mean() == 0.0
    assert jump.mark_mean_zero
    assert jump.mark_dependent
    assert problem.drift(np.array([[2.0]]))[0, 0] == pytest.approx(-0.8)
    gamma = jump.coefficient(np.array([[2.0], [3.0]]), np.array([0.5, -1.0]))
    assert list(gamma[:, 0]) == [1.0, -3.0]


def test_mark_laws_of_example2():
    normal = builtin_problem("example2-normal-λ5").jump.mark_law
    uniform = builtin_problem("example2-uniform-λ5").jump.mark_law

    assert normal.variance() == 0.125
    assert (uniform.lo, uniform.hi) == (-0.25, 0.25)
    assert uniform.variance() == pytest.approx(0.5 ** 2 / 12)


def test_problem_names_accept_spelled_out_lambda():
    assert builtin_problem("example2-uniform-lambda3").name == (
        "example2-uniform-λ3"
    )


def test_unknown_problem_raises_ConfigurationError():
    with pytest.raises(ConfigurationError) as exc:
        builtin_problem(fake.pystr())
    for name in builtin_names():
        assert name in str(exc.value)


def test_register_existing_name_raises_ConfigurationError():
    with pytest.raises(ConfigurationError):
        register_problem("example1", linear_problem)


def test_builtin_problem_returns_a_fresh_problem():
    assert builtin_problem("example1") is not builtin_problem("example1")


def test_with_initial_value_leaves_original_untouched():
    problem = builtin_problem("example1")
    moved = problem.with_initial_value([3.0])

    assert list(moved.initial_value) == [3.0]
    assert list(problem.initial_value) == [1.0]
    assert moved.drift is problem.drift


def test_initial_value_is_read_only():
    problem = builtin_problem("example1")
    with pytest.raises(ValueError):
        problem.initial_value[0] = 2.0


@pytest.mark.parametrize(
    "options",
    [
        {"dim_state": 0},
        {"horizon": 0.0},
        {"growth_exponent": -1.0},
        {"initial_value": np.array([1.0, 2.0])},
        {"initial_value": np.array([np.nan])},
    ],
)
def test_invalid_problem_raises_ConfigurationError(options):
    fields = dict(
        name="bad",
        dim_state=1,
        dim_noise=1,
        drift=cubic_drift,
        diffusion=linear_diffusion,
        diffusion_jacobian=linear_diffusion_jacobian,
        initial_value=np.array([1.0]),
    )
    fields.update(options)
    with pytest.raises(ConfigurationError):
        SdeProblem(**fields)


def test_zero_intensity_means_no_jumps():
    problem = linear_problem(
        jump=independent_jump(half_jump, half_jump_jacobian, 0.0)
    )
    assert not problem.has_jumps


def test_negative_intensity_raises_ConfigurationError():
    with pytest.raises(ConfigurationError):
        independent_jump(half_jump, half_jump_jacobian, -1.0)


@pytest.mark.parametrize(
    "factory",
    [
        lambda: NormalMarks(mean_value=0.0, variance_value=0.0),
        lambda: UniformMarks(lo=1.0, hi=1.0),
    ],
)
def test_invalid_mark_law_raises_ConfigurationError(factory):
    with pytest.raises(ConfigurationError):
        factory()


def test_mark_laws_map_the_median_to_the_mean():
    half = np.array([0.5])
    assert NormalMarks(0.3, 2.0).from_uniforms(half)[0] == 0.3
    assert UniformMarks(-1.0, 3.0).from_uniforms(half)[0] == 1.0
    assert DegenerateMarks(0.2).from_uniforms(half)[0] == 0.2


def test_default_samples_cover_the_box():
    samples = default_samples(3)
    assert samples.shape == (64, 3)
    assert np.all(np.abs(samples) <= 2.0)


def test_scalar_diffusion_commutes():
    report = check_diffusion_commutativity(builtin_problem("example1"))
    assert report.ok
    assert report.max_violation == 0.0


def test_diagonal_linear_diffusion_commutes():
    assert check_diffusion_commutativity(linear_problem(dim=3)).ok


def test_skewed_diffusion_does_not_commute():
    problem = SdeProblem(
        name="skewed",
        dim_state=2,
        dim_noise=2,
        drift=cubic_drift,
        diffusion=skewed_diffusion,
        diffusion_jacobian=skewed_diffusion_jacobian,
        initial_value=np.ones(2),
    )
    report = check_diffusion_commutativity(problem)

    assert not report.ok
    assert report.max_violation == 1.0


def test_jump_commutativity_of_mark_dependent_jumps_raises():
    with pytest.raises(PreconditionError):
        check_jump_commutativity(builtin_problem("example2-normal-λ3"))


def test_proportional_jump_commutes_with_linear_diffusion():
    problem = linear_problem(
        dim=2, jump=independent_jump(half_jump, half_jump_jacobian)
    )
    report = check_jump_commutativity(problem)
    assert report.ok
    assert report.max_violation == pytest.approx(0.0, abs=1e-12)


def test_additive_jump_does_not_commute_with_linear_diffusion():
    problem = linear_problem(
        jump=independent_jump(unit_jump, unit_jump_jacobian)
    )
    report = check_jump_commutativity(problem)
    assert not report.ok
    assert report.max_violation == pytest.approx(1.0)


def test_jump_commutativity_without_jumps_is_trivial():
    assert check_jump_commutativity(builtin_problem("example1")).ok


def test_declared_jacobians_of_builtins_are_consistent():
    for name in builtin_names():
        assert check_jacobians(builtin_problem(name)).ok, name


@pytest.mark.parametrize("name", builtin_names())
def test_declared_jacobians_match_at_random_points(name):
    problem = builtin_problem(name)
    rng = np.random.default_rng(fake.pyint())
    samples = rng.uniform(-2.0, 2.0, size=(100, problem.dim_state))

    report = check_jacobians(problem, samples=samples)

    assert report.ok, report.max_violation


def test_random_points_catch_a_wrong_jacobian():
    rng = np.random.default_rng(fake.pyint())
    samples = rng.uniform(-2.0, 2.0, size=(100, 2))
    problem = linear_problem(dim=2, diffusion_jacobian=zero_jacobian)
    assert not check_jacobians(problem, samples=samples).ok


def test_linear_diffusion_jacobian_is_a_read_only_view():
    jac = linear_diffusion_jacobian(np.ones((4, 2)))

    assert jac.shape == (4, 2, 2, 2)
    assert not jac.flags.writeable
    assert jac[3, 1, 1, 1] == 1.0
    assert jac[3, 0, 1, 1] == 0.0
    assert np.array_equal(jac[0], jac[3])


def test_wrong_diffusion_jacobian_is_reported():
    report = check_jacobians(linear_problem(diffusion_jacobian=zero_jacobian))
    assert not report.ok
    assert report.max_violation == pytest.approx(1.0, rel=1e-6)


def test_checks_reject_non_finite_samples():
    with pytest.raises(PreconditionError):
        check_diffusion_commutativity(
            builtin_problem("example1"), samples=np.array([[np.inf]])
        )


def test_example_values_at_the_origin():
    problem = builtin_problem("example1")
    origin = np.zeros((1, 1))
    assert problem.drift(origin)[0, 0] == 0.0
    assert problem.diffusion(origin)[0, 0, 0] == 0.0


def test_uniform_example_drift_at_one():
    problem = builtin_problem("example2-uniform-λ3")
    assert problem.drift(np.ones((1, 1)))[0, 0] == pytest.approx(-0.10)


def test_row_diffusion_violates_commutativity_at_one():
    problem = SdeProblem(
        name="row",
        dim_state=1,
        dim_noise=2,
        drift=cubic_drift,
        diffusion=row_diffusion,
        diffusion_jacobian=row_diffusion_jacobian,
        initial_value=np.ones(1),
    )
    report = check_diffusion_commutativity(problem, samples=[[1.0]])

    assert report.max_violation == 1.0
    assert not report.ok


def test_proportional_jump_violates_commutativity_with_square_diffusion():
    problem = SdeProblem(
        name="square",
        dim_state=1,
        dim_noise=1,
        drift=cubic_drift,
        diffusion=square_diffusion,
        diffusion_jacobian=square_diffusion_jacobian,
        initial_value=np.ones(1),
        jump=independent_jump(half_jump, half_jump_jacobian),
    )
    report = check_jump_commutativity(problem, samples=[[1.0]])

    assert report.max_violation == pytest.approx(0.75)
    assert not report.ok
