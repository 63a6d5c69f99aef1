from typing import Any, Dict, Optional

from rest_framework.exceptions import ValidationError


class TamedLevyError(Exception):
    """
    Base class for every error raised on purpose by this project. Each
    subclass carries the exit code the command line reports for it.
    """

    exit_code = 2
    default_detail = "A run error occurred."
    default_code = "error"

    def __init__(
        self, detail: Optional[str] = None, code: Optional[str] = None
    ):
        self.detail = str(
            detail if detail is not None else self.default_detail
        )
        self.code = code if code is not None else self.default_code
        super().__init__(self.detail)


class ConfigurationError(TamedLevyError):
    exit_code = 1
    default_detail = "The configuration is not valid."
    default_code = "configuration_error"


class DomainError(ConfigurationError, ValueError):
    default_detail = "The argument is outside the operation's domain."
    default_code = "domain_error"


class PreconditionError(TamedLevyError):
    exit_code = 2
    default_detail = "The operation is not defined for this input."
    default_code = "precondition_error"


class UnsupportedSchemeError(PreconditionError):
    default_detail = "The scheme cannot be applied to this problem."
    default_code = "unsupported_scheme"


class DivergenceError(TamedLevyError):
    exit_code = 2
    default_detail = "Too many paths of a tamed scheme diverged."
    default_code = "divergence"


class CheckViolationError(TamedLevyError):
    exit_code = 3
    default_detail = "A structural check on the problem failed."
    default_code = "check_violation"


def _flatten_validation_detail(detail: Any) -> Dict[str, list]:
    field_errors = []
    non_field_errors = []
    if isinstance(detail, dict):
        for field, errors in detail.items():
            if not isinstance(errors, (list, tuple)):
                errors = [errors]
            if field == "non_field_errors":
                non_field_errors.extend(str(e) for e in errors)
                continue
            for message in errors:
                field_errors.append({"field": field, "message": str(message)})
    elif isinstance(detail, (list, tuple)):
        non_field_errors.extend(str(e) for e in detail)
    else:
        non_field_errors.append(str(detail))
    return {
        "field_errors": field_errors,
        "non_field_errors": non_field_errors,
    }


def get_formatted_exception(exc: Exception) -> Optional[dict]:
    """
    Get an exception formatted as an error report. Returns None for
    exceptions this project does not raise on purpose.
    """
    if isinstance(exc, ValidationError):
        detail = _flatten_validation_detail(exc.detail)
        return {
            "exit_code": ConfigurationError.exit_code,
            "type": "validation_error",
            "detail": detail,
            "fallback_message": (detail["field_errors"] or [{}])[0].get(
                "message", (detail["non_field_errors"] or [""])[0]
            ),
        }
    if isinstance(exc, TamedLevyError):
        return {
            "exit_code": exc.exit_code,
            "type": exc.code,
            "detail": {"field_errors": [], "non_field_errors": [exc.detail]},
            "fallback_message": exc.detail,
        }
    return None


def format_report(report: dict) -> str:
    """
    Render a formatted exception as lines for standard error.
    """
    lines = [f"error ({report['type']}): {report['fallback_message']}"]
    for item in report["detail"]["field_errors"]:
        lines.append(f"  {item['field']}: {item['message']}")
    for message in report["detail"]["non_field_errors"]:
        if message != report["fallback_message"]:
            lines.append(f"  {message}")
    return "\n".join(lines)
