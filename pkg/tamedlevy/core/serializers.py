from typing import Any, Dict, Iterable, Tuple

from django.utils.translation import gettext_lazy as _
from rest_framework.exceptions import ValidationError
from rest_framework.fields import MISSING_ERROR_MESSAGE


class ValidationMixin:
    """
    Serializer mixin for errors that belong to a named field. Subclasses map
    error keys to ``(field, message template)`` pairs in
    ``field_error_messages``.
    """

    field_error_messages: Dict[str, Tuple[str, str]] = {}
    unknown_key_message = _("Unknown key '{key}'.")

    def fail_for_field(self, key: str, **kwargs: Any):
        try:
            field, template = self.field_error_messages[key]
        except KeyError:
            raise AssertionError(
                MISSING_ERROR_MESSAGE.format(
                    class_name=self.__class__.__name__, key=key
                )
            )
        raise ValidationError({field: [template.format(**kwargs)]}, code=key)

    def reject_unknown_keys(self, data: Any, known: Iterable[str]) -> None:
        """
        Fail with one error per key of ``data`` not in ``known``.
        """
        if not isinstance(data, dict):
            return
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValidationError(
                {
                    key: [self.unknown_key_message.format(key=key)]
                    for key in unknown
                },
                code="unknown_key",
            )
