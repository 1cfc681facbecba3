from collections.abc import Iterable

from rest_framework import serializers

from smartype.core.exceptions import DatasetValidationError


def validate_records(serializer_class: type[serializers.Serializer], records: Iterable, source: str, **context) -> list[dict]:
    """
    Validate every record with the given serializer.
    The first invalid record raises DatasetValidationError naming its position in the file.
    """
    validated = []
    for index, record in enumerate(records):
        serializer = serializer_class(data=record, context=context)
        if not serializer.is_valid():
            raise DatasetValidationError(f"{source}: record {index}: {flatten_errors(serializer.errors)}")
        validated.append(serializer.validated_data)
    return validated


def flatten_errors(errors) -> str:
    """Render DRF error details as 'field: message; ...'."""
    if isinstance(errors, dict):
        parts = []
        for key, value in errors.items():
            prefix = "" if key == "non_field_errors" else f"{key}: "
            parts.append(prefix + flatten_errors(value))
        return "; ".join(parts)
    if isinstance(errors, list):
        return ", ".join(flatten_errors(item) for item in errors)
    return str(errors)
