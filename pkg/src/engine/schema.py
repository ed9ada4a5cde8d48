from __future__ import annotations

from typing import Any, Dict, List, Optional

from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError

Schema = Dict[str, Any]


def validate_json(instance: Any, schema: Schema) -> None:
	"""Check a scenario tree, reporting every violation with its key path."""
	problems = []
	for error in sorted(Draft202012Validator(schema).iter_errors(instance), key=lambda e: list(e.absolute_path)):
		where = ".".join(str(p) for p in error.absolute_path) or "<root>"
		problems.append(f"{where}: {error.message}")
	if problems:
		raise ValidationError("; ".join(problems))


def _typed(kind: str, title: str, **constraints: Any) -> Schema:
	schema: Schema = {"title": title, "type": kind}
	schema.update({k: v for k, v in constraints.items() if v is not None})
	return schema


def nullable(schema: Schema) -> Schema:
	return {"anyOf": [{"type": "null"}, schema]}


def one_of_shapes(*schemas: Schema) -> Schema:
	return {"anyOf": list(schemas)}


def enum_schema(title: str, values: List[str]) -> Schema:
	return _typed("string", title, enum=list(values))


def string_schema(title: str) -> Schema:
	return _typed("string", title, minLength=1)


def boolean_schema(title: str) -> Schema:
	return _typed("boolean", title)


def number_schema(
	title: str,
	minimum: Optional[float] = None,
	exclusive_minimum: Optional[float] = None,
) -> Schema:
	return _typed("number", title, minimum=minimum, exclusiveMinimum=exclusive_minimum)


def integer_schema(title: str, minimum: Optional[int] = None) -> Schema:
	return _typed("integer", title, minimum=minimum)


def array_schema(title: str, items: Schema, min_items: int = 0) -> Schema:
	return _typed("array", title, items=items, minItems=min_items)


def object_schema(title: str, properties: Schema, required: Optional[List[str]] = None) -> Schema:
	# closed objects: unknown keys are configuration errors
	return _typed("object", title, properties=properties, required=list(required or []), additionalProperties=False)
