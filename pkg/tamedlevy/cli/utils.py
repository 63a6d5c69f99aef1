import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from django.conf import settings
from rest_framework.exceptions import ValidationError

from tamedlevy.cli import writers
from tamedlevy.cli.models import Command, RunConfig, RunOutcome
from tamedlevy.cli.serializers import RunConfigSerializer
from tamedlevy.convergence.harness import (convergence_tables,
                                           moment_sweep, simulate_levels)
from tamedlevy.convergence.utils import fit_rates
from tamedlevy.core.errors import (CheckViolationError, ConfigurationError,
                                   PreconditionError)
from tamedlevy.problems.builtins import builtin_problem
from tamedlevy.problems.models import SdeProblem
from tamedlevy.problems.validators import (check_diffusion_commutativity,
                                           check_jacobians,
                                           check_jump_commutativity)
from tamedlevy.schemes.models import SchemeKind

logger = logging.getLogger(__name__)


def parse_config(
    text: str, overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Parse and validate a JSON run document. ``overrides`` (command-line
    flags) replace document values; a ``command`` override must agree with
    the document if the document names one.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"The run config is not valid JSON: {exc}")
    if not isinstance(document, dict):
        raise ConfigurationError("The run config must be a JSON object.")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "command" and document.get("command", value) != value:
            raise ValidationError(
                {
                    "command": [
                        f"The config is for '{document['command']}', not "
                        f"'{value}'."
                    ]
                }
            )
        document[key] = value

    serializer = RunConfigSerializer(data=document)
    serializer.is_valid(raise_exception=True)
    data = serializer.validated_data
    return RunConfig(
        problem=data["problem"],
        command=Command(data["command"]),
        master_seed=data["seed"],
        levels=tuple(data.get("levels", ())),
        scheme=_kind(data.get("scheme")),
        reference_level=data.get("reference_level"),
        reference_scheme=_kind(data.get("reference_scheme")),
        paths=data["paths"],
        q_list=tuple(data["q_list"]),
        p=data["p"],
        worker_count=data["worker_count"],
        batch_size=data["batch_size"],
        output=data["output"],
        initial_value=(
            tuple(data["initial_value"]) if "initial_value" in data else None
        ),
    )


def _kind(value: Optional[str]) -> Optional[SchemeKind]:
    return SchemeKind(value) if value else None


def resolve_problem(config: RunConfig) -> SdeProblem:
    problem = builtin_problem(config.problem)
    if config.initial_value is not None:
        problem = problem.with_initial_value(config.initial_value)
    return problem


def output_prefix(config: RunConfig) -> Path:
    if config.output:
        return Path(config.output)
    return Path(settings.TAMEDLEVY_OUTPUT_DIR or os.curdir) / config.problem


def _suffixed(prefix: Path, suffix: str) -> Path:
    return prefix.with_name(f"{prefix.name}_{suffix}.csv")


def run_simulate(config: RunConfig) -> RunOutcome:
    results = simulate_levels(
        resolve_problem(config),
        config.scheme,
        config.levels,
        config.paths,
        config.master_seed,
        batch_size=config.batch_size,
        workers=config.worker_count,
    )
    path = writers.write_frame(
        writers.paths_frame(results),
        _suffixed(output_prefix(config), "paths"),
    )
    return RunOutcome(files=[path])


def _log_fits(label: str, fits) -> None:
    for fit in fits:
        logger.info(
            "%s, q=%g: slope %.4f, r^2 %.4f over levels %s",
            label,
            fit.q,
            fit.slope,
            fit.r_squared,
            list(fit.levels_used),
        )


def run_converge(config: RunConfig) -> RunOutcome:
    """
    Writes the terminal-time errors and rates as ``_errors`` and ``_rates``
    and the grid-supremum ones as ``_sup_errors`` and ``_sup_rates``.
    """
    tables = convergence_tables(
        resolve_problem(config), config.convergence_config()
    )
    prefix = output_prefix(config)
    files = []
    for table, errors_name, rates_name in (
        (tables.terminal, "errors", "rates"),
        (tables.grid_sup, "sup_errors", "sup_rates"),
    ):
        fits = fit_rates(table)
        _log_fits(table.measure.label, fits)
        files.append(
            writers.write_frame(
                writers.errors_frame(table), _suffixed(prefix, errors_name)
            )
        )
        files.append(
            writers.write_frame(
                writers.rates_frame(fits), _suffixed(prefix, rates_name)
            )
        )
    return RunOutcome(files=files)


def run_moments(config: RunConfig) -> RunOutcome:
    table = moment_sweep(
        resolve_problem(config),
        config.scheme,
        config.levels,
        config.p,
        config.paths,
        config.master_seed,
        batch_size=config.batch_size,
        workers=config.worker_count,
    )
    path = writers.write_frame(
        writers.moments_frame(table),
        _suffixed(output_prefix(config), "moments"),
    )
    return RunOutcome(files=[path])


def _verdict(ok: bool) -> str:
    return "ok" if ok else "VIOLATED"


def run_check(config: RunConfig) -> RunOutcome:
    problem = resolve_problem(config)
    lines: List[str] = [f"problem: {problem.name}"]
    ok = True

    report = check_diffusion_commutativity(problem)
    ok = ok and report.ok
    lines.append(
        f"diffusion commutativity: {_verdict(report.ok)} "
        f"(max violation {report.max_violation:.3e})"
    )

    if not problem.has_jumps:
        lines.append("jump commutativity: not applicable (no jumps)")
    else:
        try:
            report = check_jump_commutativity(problem)
        except PreconditionError as exc:
            lines.append(
                f"jump commutativity: not applicable ({exc.detail})"
            )
        else:
            ok = ok and report.ok
            lines.append(
                f"jump commutativity: {_verdict(report.ok)} "
                f"(max violation {report.max_violation:.3e})"
            )

    report = check_jacobians(problem)
    ok = ok and report.ok
    lines.append(
        f"jacobian consistency: {_verdict(report.ok)} "
        f"(max relative deviation {report.max_violation:.3e})"
    )
    return RunOutcome(
        exit_code=0 if ok else CheckViolationError.exit_code,
        report="\n".join(lines),
    )


RUNNERS = {
    Command.SIMULATE: run_simulate,
    Command.CONVERGE: run_converge,
    Command.MOMENTS: run_moments,
    Command.CHECK: run_check,
}


def run(config: RunConfig) -> RunOutcome:
    """
    Execute a validated run and write its files. Library errors propagate
    to the caller, which maps them to exit codes.
    """
    logger.info("Running '%s' on '%s'", config.command, config.problem)
    return RUNNERS[config.command](config)
