import json

import numpy as np
import pandas as pd
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from faker import Faker
from rest_framework.exceptions import ValidationError

from tamedlevy.cli.models import Command
from tamedlevy.cli.utils import parse_config, run
from tamedlevy.core.errors import ConfigurationError
from tamedlevy.problems.builtins import (builtin_names, polynomial_drift,
                                         register_problem)
from tamedlevy.problems.models import SdeProblem
from tamedlevy.schemes.models import SchemeKind

fake = Faker()

NONCOMMUTATIVE = "noncommutative-plane"


def skewed_diffusion(x):
    # σ = [[1, 0], [0, x1]]
    sigma = np.zeros((x.shape[0], 2, 2))
    sigma[:, 0, 0] = 1.0
    sigma[:, 1, 1] = x[:, 0]
    return sigma


def skewed_diffusion_jacobian(x):
    jac = np.zeros((x.shape[0], 2, 2, 2))
    jac[:, 1, 1, 0] = 1.0
    return jac


def linear_drift(x):
    return polynomial_drift(x, linear=-1.0, power=1, coefficient=0.0)


def noncommutative_problem():
    return SdeProblem(
        name=NONCOMMUTATIVE,
        dim_state=2,
        dim_noise=2,
        drift=linear_drift,
        diffusion=skewed_diffusion,
        diffusion_jacobian=skewed_diffusion_jacobian,
        initial_value=np.array([1.0, 1.0]),
    )


@pytest.fixture
def noncommutative():
    if NONCOMMUTATIVE not in builtin_names():
        register_problem(NONCOMMUTATIVE, noncommutative_problem)
    return NONCOMMUTATIVE


@pytest.fixture
def converge_document(tmp_path):
    return {
        "problem": "example1",
        "command": "converge",
        "levels": "3..8",
        "reference_level": 11,
        "paths": 8,
        "q_list": [1, 2],
        "seed": fake.pyint(),
        "batch_size": 4,
        "worker_count": 1,
        "output": str(tmp_path / "example1"),
    }


def write_config(tmp_path, document):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document))
    return str(path)


def test_parse_config_fills_defaults(settings):
    settings.TAMEDLEVY_WORKERS = 0
    config = parse_config(
        json.dumps(
            {
                "problem": "example1",
                "command": "converge",
                "levels": "8..13",
                "reference_level": 16,
                "seed": 42,
            }
        )
    )

    assert config.command == Command.CONVERGE
    assert config.levels == (8, 9, 10, 11, 12, 13)
    assert config.reference_level == 16
    assert config.master_seed == 42
    assert config.paths == 10_000
    assert config.q_list == (2.0,)
    assert config.worker_count == 0
    assert config.scheme is None


def test_parse_config_accepts_five_norms():
    config = parse_config(
        json.dumps(
            {
                "problem": "example1",
                "command": "converge",
                "levels": [8, 9, 10],
                "reference_level": 16,
                "q_list": [1, 2, 3, 4, 5],
                "seed": 1,
            }
        )
    )
    assert config.q_list == (1.0, 2.0, 3.0, 4.0, 5.0)


def test_parse_config_reads_scheme_names():
    config = parse_config(
        json.dumps(
            {
                "problem": "example2-uniform-lambda3",
                "command": "simulate",
                "levels": [4],
                "scheme": "tamed-euler",
                "seed": 1,
            }
        )
    )
    assert config.problem == "example2-uniform-λ3"
    assert config.scheme == SchemeKind.TAMED_EULER


def test_level_at_reference_level_raises_ValidationError():
    with pytest.raises(ValidationError) as exc:
        parse_config(
            json.dumps(
                {
                    "problem": "example1",
                    "command": "converge",
                    "levels": [8, 16],
                    "reference_level": 16,
                    "seed": 1,
                }
            )
        )
    assert "reference_level" in exc.value.detail


def test_unknown_key_is_named():
    with pytest.raises(ValidationError) as exc:
        parse_config(
            json.dumps(
                {
                    "problem": "example1",
                    "command": "check",
                    "seed": 1,
                    "colour": "blue",
                }
            )
        )
    assert "colour" in exc.value.detail


def test_missing_keys_are_listed():
    with pytest.raises(ValidationError) as exc:
        parse_config(json.dumps({"command": "check"}))
    assert set(exc.value.detail) == {"problem", "seed"}


def test_unknown_problem_lists_valid_names():
    with pytest.raises(ValidationError) as exc:
        parse_config(
            json.dumps({"problem": "nope", "command": "check", "seed": 1})
        )
    assert "example1" in str(exc.value.detail["problem"][0])


def test_initial_value_must_match_dimension():
    with pytest.raises(ValidationError) as exc:
        parse_config(
            json.dumps(
                {
                    "problem": "example1",
                    "command": "check",
                    "seed": 1,
                    "initial_value": [1.0, 2.0],
                }
            )
        )
    assert "initial_value" in exc.value.detail


def test_run_commands_need_levels():
    with pytest.raises(ValidationError) as exc:
        parse_config(
            json.dumps(
                {"problem": "example1", "command": "moments", "seed": 1}
            )
        )
    assert "levels" in exc.value.detail


@pytest.mark.parametrize("text", ["{", "[1, 2]", '"converge"'])
def test_malformed_document_raises_ConfigurationError(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_overrides_replace_document_values():
    config = parse_config(
        json.dumps(
            {
                "problem": "example1",
                "levels": [4, 5],
                "seed": 1,
                "worker_count": 3,
            }
        ),
        overrides={
            "command": "simulate",
            "seed": 99,
            "worker_count": None,
            "output": "out/run",
        },
    )
    assert config.command == Command.SIMULATE
    assert config.master_seed == 99
    assert config.worker_count == 3
    assert config.output == "out/run"


def test_conflicting_command_override_raises_ValidationError():
    with pytest.raises(ValidationError) as exc:
        parse_config(
            json.dumps(
                {"problem": "example1", "command": "converge", "seed": 1}
            ),
            overrides={"command": "check"},
        )
    assert "command" in exc.value.detail


def test_converge_writes_a_row_per_level_and_norm(
    converge_document, tmp_path
):
    outcome = run(parse_config(json.dumps(converge_document)))

    assert outcome.exit_code == 0
    errors = pd.read_csv(tmp_path / "example1_errors.csv")
    rates = pd.read_csv(tmp_path / "example1_rates.csv")
    assert len(errors) == 6 * 2
    assert list(errors.columns) == [
        "level",
        "h",
        "q",
        "error",
        "half_width",
        "paths",
        "diverged",
        "log2_h",
        "log2_error",
    ]
    assert list(errors["log2_h"]) == [-level for level in errors["level"]]
    assert list(rates.columns) == ["q", "slope", "intercept", "r_squared"]
    assert list(rates["q"]) == [1.0, 2.0]


def test_converge_writes_grid_sup_errors(converge_document, tmp_path):
    outcome = run(parse_config(json.dumps(converge_document)))

    assert [path.name for path in outcome.files] == [
        "example1_errors.csv",
        "example1_rates.csv",
        "example1_sup_errors.csv",
        "example1_sup_rates.csv",
    ]
    errors = pd.read_csv(tmp_path / "example1_errors.csv")
    sup_errors = pd.read_csv(tmp_path / "example1_sup_errors.csv")
    assert list(sup_errors.columns) == list(errors.columns)
    assert list(sup_errors["level"]) == list(errors["level"])
    assert (sup_errors["error"] >= errors["error"]).all()
    rates = pd.read_csv(tmp_path / "example1_sup_rates.csv")
    assert list(rates["q"]) == [1.0, 2.0]


def test_converge_csv_is_byte_identical_across_runs(
    converge_document, tmp_path
):
    first = tmp_path / "first"
    second = tmp_path / "second"
    run(parse_config(json.dumps({**converge_document, "output": str(first)})))
    run(
        parse_config(
            json.dumps(
                {
                    **converge_document,
                    "output": str(second),
                    "worker_count": 2,
                }
            )
        )
    )

    for suffix in ("errors", "rates", "sup_errors", "sup_rates"):
        assert (tmp_path / f"first_{suffix}.csv").read_bytes() == (
            tmp_path / f"second_{suffix}.csv"
        ).read_bytes()


def test_simulate_writes_terminal_values(tmp_path):
    config = parse_config(
        json.dumps(
            {
                "problem": "example2-normal-λ3",
                "command": "simulate",
                "levels": [3, 5],
                "paths": 5,
                "seed": fake.pyint(),
                "worker_count": 1,
                "output": str(tmp_path / "jumps"),
            }
        )
    )
    outcome = run(config)

    frame = pd.read_csv(outcome.files[0])
    assert outcome.files[0].name == "jumps_paths.csv"
    assert list(frame.columns) == [
        "path",
        "level",
        "x1",
        "sup_norm",
        "diverged",
    ]
    assert list(frame["level"]) == [3] * 5 + [5] * 5
    assert list(frame["path"]) == list(range(5)) * 2
    assert not frame["diverged"].any()


def test_moments_uses_the_initial_value_override(tmp_path):
    config = parse_config(
        json.dumps(
            {
                "problem": "example1",
                "command": "moments",
                "levels": [2, 3],
                "paths": 6,
                "p": 4,
                "seed": fake.pyint(),
                "worker_count": 1,
                "initial_value": [0.0],
                "output": str(tmp_path / "origin"),
            }
        )
    )
    outcome = run(config)

    # The origin is an equilibrium of the drift and the diffusion.
    frame = pd.read_csv(outcome.files[0])
    assert list(frame["estimate"]) == [0.0, 0.0]
    assert list(frame["p"]) == [4.0, 4.0]


def test_check_on_scalar_jump_problem_passes(tmp_path, capsys):
    config = write_config(tmp_path, {"problem": "example2-uniform-λ3"})

    call_command("check", config=config, seed=0)

    report = capsys.readouterr().out
    assert "diffusion commutativity: ok" in report
    assert "jump commutativity: not applicable" in report
    assert "jacobian consistency: ok" in report


def test_check_violation_exits_with_three(tmp_path, noncommutative):
    config = write_config(tmp_path, {"problem": noncommutative, "seed": 0})

    with pytest.raises(CommandError) as exc:
        call_command("check", config=config)
    assert exc.value.returncode == 3


def test_invalid_config_exits_with_one(tmp_path):
    config = write_config(tmp_path, {"problem": "example1", "seed": 0})

    with pytest.raises(CommandError) as exc:
        call_command("converge", config=config)
    assert exc.value.returncode == 1
    assert "levels" in str(exc.value)


def test_missing_config_file_exits_with_one(tmp_path):
    with pytest.raises(CommandError) as exc:
        call_command("check", config=str(tmp_path / "absent.json"))
    assert exc.value.returncode == 1


def test_incompatible_scheme_exits_with_two(tmp_path, noncommutative):
    config = write_config(
        tmp_path,
        {
            "problem": noncommutative,
            "levels": [3],
            "paths": 2,
            "scheme": "tamed-milstein-continuous",
            "seed": 0,
        },
    )

    with pytest.raises(CommandError) as exc:
        call_command("simulate", config=config, out=str(tmp_path / "x"))
    assert exc.value.returncode == 2


def test_converge_command_honours_flags(converge_document, tmp_path):
    config = write_config(tmp_path, converge_document)

    call_command(
        "converge",
        config=config,
        seed=7,
        threads=1,
        out=str(tmp_path / "flagged"),
    )

    assert (tmp_path / "flagged_errors.csv").exists()
    assert (tmp_path / "flagged_rates.csv").exists()
