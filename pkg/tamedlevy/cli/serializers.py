import re

from django.conf import settings
from django.utils.translation import gettext_lazy as _
from rest_framework import serializers

from tamedlevy.cli.models import Command
from tamedlevy.convergence.models import (DEFAULT_PATHS,
                                          REFERENCE_SEPARATION)
from tamedlevy.core.errors import ConfigurationError
from tamedlevy.core.serializers import ValidationMixin
from tamedlevy.noise.utils import MAX_LEVEL
from tamedlevy.problems.builtins import builtin_names, builtin_problem
from tamedlevy.schemes.models import SchemeKind

_RANGE = re.compile(r"\s*(\d+)\s*\.\.\s*(\d+)\s*")


def default_worker_count() -> int:
    return settings.TAMEDLEVY_WORKERS


def default_batch_size() -> int:
    return settings.TAMEDLEVY_BATCH_SIZE


class LevelsField(serializers.Field):
    """
    A list of levels, given either as a JSON list of integers or as an
    inclusive range string such as "8..13".
    """

    default_error_messages = {
        "invalid": _(
            'Levels must be a list of integers or a range such as "8..13".'
        ),
        "empty": _("At least one level is required."),
    }

    def to_internal_value(self, data):
        if isinstance(data, str):
            match = _RANGE.fullmatch(data)
            if match is None:
                self.fail("invalid")
            first, last = int(match.group(1)), int(match.group(2))
            levels = list(range(first, last + 1))
        elif isinstance(data, list) and all(
            isinstance(level, int) and not isinstance(level, bool)
            for level in data
        ):
            levels = list(data)
        else:
            self.fail("invalid")
        if not levels:
            self.fail("empty")
        return levels

    def to_representation(self, value):
        return list(value)


class RunConfigSerializer(ValidationMixin, serializers.Serializer):
    problem = serializers.CharField()
    command = serializers.ChoiceField(choices=Command.choices)
    seed = serializers.IntegerField()
    levels = LevelsField(required=False)
    scheme = serializers.ChoiceField(
        choices=SchemeKind.choices, required=False, allow_null=True
    )
    reference_level = serializers.IntegerField(
        min_value=1, max_value=MAX_LEVEL, required=False
    )
    reference_scheme = serializers.ChoiceField(
        choices=SchemeKind.choices, required=False, allow_null=True
    )
    paths = serializers.IntegerField(min_value=1, default=DEFAULT_PATHS)
    q_list = serializers.ListField(
        child=serializers.FloatField(min_value=1.0),
        min_length=1,
        default=lambda: [2.0],
    )
    p = serializers.FloatField(min_value=2.0, default=2.0)
    worker_count = serializers.IntegerField(
        min_value=0, default=default_worker_count
    )
    batch_size = serializers.IntegerField(
        min_value=1, default=default_batch_size
    )
    output = serializers.CharField(allow_blank=True, default="")
    initial_value = serializers.ListField(
        child=serializers.FloatField(), min_length=1, required=False
    )

    field_error_messages = {
        "unknown_problem": (
            "problem",
            _("Unknown problem '{name}'. Valid names are: {names}."),
        ),
        "levels_required": (
            "levels",
            _("The '{command}' command needs a list of levels."),
        ),
        "levels_not_ascending": (
            "levels",
            _("Levels must be strictly ascending positive integers."),
        ),
        "level_too_fine": (
            "levels",
            _("Levels cannot exceed {max_level}."),
        ),
        "two_levels_required": (
            "levels",
            _("Fitting a convergence rate needs at least two levels."),
        ),
        "reference_level_required": (
            "reference_level",
            _("The 'converge' command needs a reference_level."),
        ),
        "reference_level_too_coarse": (
            "reference_level",
            _(
                "reference_level must be at least max(levels) + {separation}"
                " = {minimum}, got {value}."
            ),
        ),
        "initial_value_dimension": (
            "initial_value",
            _("The initial value of '{name}' needs {dim} entries."),
        ),
    }

    def to_internal_value(self, data):
        self.reject_unknown_keys(data, self.fields)
        return super().to_internal_value(data)

    def validate(self, data):
        try:
            problem = builtin_problem(data["problem"])
        except ConfigurationError:
            self.fail_for_field(
                "unknown_problem",
                name=data["problem"],
                names=", ".join(builtin_names()),
            )
        data["problem"] = problem.name

        command = data["command"]
        levels = data.get("levels")
        if command != Command.CHECK:
            if not levels:
                self.fail_for_field("levels_required", command=command)
            if any(level < 1 for level in levels) or any(
                b <= a for a, b in zip(levels, levels[1:])
            ):
                self.fail_for_field("levels_not_ascending")
            if levels[-1] > MAX_LEVEL:
                self.fail_for_field("level_too_fine", max_level=MAX_LEVEL)

        if command == Command.CONVERGE:
            if len(levels) < 2:
                self.fail_for_field("two_levels_required")
            reference_level = data.get("reference_level")
            if reference_level is None:
                self.fail_for_field("reference_level_required")
            minimum = levels[-1] + REFERENCE_SEPARATION
            if reference_level < minimum:
                self.fail_for_field(
                    "reference_level_too_coarse",
                    separation=REFERENCE_SEPARATION,
                    minimum=minimum,
                    value=reference_level,
                )

        initial_value = data.get("initial_value")
        if initial_value is not None:
            dim = problem.dim_state
            if len(initial_value) != dim:
                self.fail_for_field(
                    "initial_value_dimension", name=data["problem"], dim=dim
                )
        return data
