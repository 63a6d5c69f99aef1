import pytest
from rest_framework import serializers
from rest_framework.exceptions import ValidationError

from tamedlevy.core.errors import (CheckViolationError, ConfigurationError,
                                   DivergenceError, DomainError,
                                   UnsupportedSchemeError, format_report,
                                   get_formatted_exception)
from tamedlevy.core.serializers import ValidationMixin


class SeedSerializer(ValidationMixin, serializers.Serializer):
    seed = serializers.IntegerField()

    field_error_messages = {
        "odd_seed": ("seed", "Seed {seed} is odd."),
    }

    def to_internal_value(self, data):
        self.reject_unknown_keys(data, self.fields)
        return super().to_internal_value(data)

    def validate(self, data):
        if data["seed"] % 2:
            self.fail_for_field("odd_seed", seed=data["seed"])
        return data


@pytest.mark.parametrize(
    "error, exit_code",
    [
        (ConfigurationError(), 1),
        (DomainError(), 1),
        (UnsupportedSchemeError(), 2),
        (DivergenceError(), 2),
        (CheckViolationError(), 3),
    ],
)
def test_errors_carry_exit_codes(error, exit_code):
    report = get_formatted_exception(error)
    assert report["exit_code"] == exit_code
    assert report["fallback_message"] == error.default_detail


def test_domain_error_is_a_value_error():
    with pytest.raises(ValueError):
        raise DomainError("t is outside [0, 1].")


def test_formatted_validation_error_lists_fields():
    report = get_formatted_exception(
        ValidationError({"levels": ["Bad levels."], "seed": ["Bad seed."]})
    )

    assert report["exit_code"] == 1
    assert report["type"] == "validation_error"
    assert report["detail"]["field_errors"] == [
        {"field": "levels", "message": "Bad levels."},
        {"field": "seed", "message": "Bad seed."},
    ]
    assert format_report(report).splitlines() == [
        "error (validation_error): Bad levels.",
        "  levels: Bad levels.",
        "  seed: Bad seed.",
    ]


def test_foreign_exceptions_are_not_formatted():
    assert get_formatted_exception(KeyError("x")) is None


def test_fail_for_field_attaches_message_to_field():
    serializer = SeedSerializer(data={"seed": 3})

    assert not serializer.is_valid()
    assert serializer.errors == {"seed": ["Seed 3 is odd."]}


def test_unknown_keys_are_rejected_by_name():
    serializer = SeedSerializer(data={"seed": 2, "colour": 1, "size": 2})

    assert not serializer.is_valid()
    assert sorted(serializer.errors) == ["colour", "size"]


def test_unregistered_error_key_is_a_programming_error():
    serializer = SeedSerializer()
    with pytest.raises(AssertionError):
        serializer.fail_for_field("missing")
