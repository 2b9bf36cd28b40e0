"""Declarative action spaces for websites.

A site schema lists, per page, the concept-level actions a visitor can
take. Each action has a name and a set of named parameters; a parameter
is either closed (its admissible values form a finite domain imposed by
the UI, e.g. the reservation times a dropdown offers) or open (its value
is free text taken from the user command, e.g. a search term).

Schemas are immutable after load and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .textnorm import normalize_text

DOMAIN_TAGS = ("restaurants", "hotels", "shopping", "other")
PARAMETER_KINDS = ("closed", "open")


class SchemaError(ValueError):
    """Malformed schema file or violated schema invariant."""


class UnknownPageError(KeyError):
    """Page id not present in a site schema."""


@dataclass(frozen=True)
class ParameterSpec:
    """One action parameter: a name plus a closed domain or open free text."""

    name: str
    kind: str
    domain: tuple[str, ...] = ()
    description: str | None = None

    @property
    def is_closed(self) -> bool:
        return self.kind == "closed"


@dataclass(frozen=True)
class ActionSchema:
    """A named concept-level action with its parameter list."""

    name: str
    parameters: tuple[ParameterSpec, ...] = ()
    page: str = ""

    def parameter(self, name: str) -> ParameterSpec:
        key = normalize_text(name)
        for spec in self.parameters:
            if normalize_text(spec.name) == key:
                return spec
        raise KeyError(f"action {self.name!r} has no parameter {name!r}")

    def parameter_names(self) -> list[str]:
        return [spec.name for spec in self.parameters]


@dataclass(frozen=True)
class SiteSchema:
    """All pages of one site, each with at least one action."""

    site_id: str
    domain_tag: str
    pages: dict[str, tuple[ActionSchema, ...]] = field(default_factory=dict)

    def action(self, page_id: str, action_name: str) -> ActionSchema:
        key = normalize_text(action_name)
        for action in actions_of(self, page_id):
            if normalize_text(action.name) == key:
                return action
        raise KeyError(f"page {page_id!r} has no action {action_name!r}")


def actions_of(schema: SiteSchema, page_id: str) -> list[ActionSchema]:
    """Actions available on a page, in declaration order."""
    if page_id not in schema.pages:
        raise UnknownPageError(f"unknown page id {page_id!r} (site {schema.site_id!r})")
    return list(schema.pages[page_id])


def validate_site_schema(schema: SiteSchema) -> None:
    """Check every invariant, raising SchemaError naming the first violation."""
    if not schema.site_id:
        raise SchemaError("site_id must be a non-empty string")
    if schema.domain_tag not in DOMAIN_TAGS:
        raise SchemaError(
            f"domain_tag {schema.domain_tag!r} not one of {DOMAIN_TAGS}")
    if not schema.pages:
        raise SchemaError("schema has no pages")
    for page_id, actions in schema.pages.items():
        if not actions:
            raise SchemaError(f"page {page_id!r} has no actions")
        seen_actions: set[str] = set()
        for action in actions:
            _validate_action(page_id, action)
            key = normalize_text(action.name)
            if key in seen_actions:
                raise SchemaError(
                    f"page {page_id!r} declares action {action.name!r} more than once")
            seen_actions.add(key)


def _validate_action(page_id: str, action: ActionSchema) -> None:
    if not action.name or not action.name.strip():
        raise SchemaError(f"page {page_id!r} has an action with an empty name")
    seen_params: set[str] = set()
    for spec in action.parameters:
        _validate_parameter(action.name, spec)
        key = normalize_text(spec.name)
        if key in seen_params:
            raise SchemaError(
                f"action {action.name!r} declares parameter {spec.name!r} more than once")
        seen_params.add(key)


def _validate_parameter(action_name: str, spec: ParameterSpec) -> None:
    label = f"parameter {spec.name!r} of action {action_name!r}"
    if not spec.name or not spec.name.strip():
        raise SchemaError(f"action {action_name!r} has a parameter with an empty name")
    if spec.kind not in PARAMETER_KINDS:
        raise SchemaError(f"{label}: kind {spec.kind!r} not one of {PARAMETER_KINDS}")
    if spec.kind == "open" and spec.domain:
        raise SchemaError(f"{label}: open parameters must not declare a domain")
    if spec.kind == "closed" and not spec.domain:
        raise SchemaError(f"{label}: closed parameters need a non-empty domain")
    seen_values: set[str] = set()
    for value in spec.domain:
        if not value or not value.strip():
            raise SchemaError(f"{label}: domain contains an empty value")
        key = normalize_text(value)
        if key in seen_values:
            raise SchemaError(f"{label}: domain value {value!r} duplicated")
        seen_values.add(key)


def site_schema_to_dict(schema: SiteSchema) -> dict:
    return {
        "site_id": schema.site_id,
        "domain_tag": schema.domain_tag,
        "pages": {
            page_id: [
                {
                    "name": action.name,
                    "parameters": [
                        _parameter_to_dict(spec) for spec in action.parameters
                    ],
                }
                for action in actions
            ]
            for page_id, actions in schema.pages.items()
        },
    }


def _parameter_to_dict(spec: ParameterSpec) -> dict:
    out: dict = {"name": spec.name, "kind": spec.kind, "domain": list(spec.domain)}
    if spec.description is not None:
        out["description"] = spec.description
    return out


def site_schema_from_dict(raw: dict) -> SiteSchema:
    if not isinstance(raw, dict):
        raise SchemaError("schema root must be a JSON object")
    for key in ("site_id", "domain_tag", "pages"):
        if key not in raw:
            raise SchemaError(f"schema is missing required key {key!r}")
    if not isinstance(raw["pages"], dict):
        raise SchemaError("'pages' must map page ids to action lists")
    pages: dict[str, tuple[ActionSchema, ...]] = {}
    for page_id, actions_raw in raw["pages"].items():
        if not isinstance(actions_raw, list):
            raise SchemaError(f"page {page_id!r} must map to a list of actions")
        actions = tuple(
            _action_from_dict(page_id, action_raw) for action_raw in actions_raw
        )
        pages[page_id] = actions
    schema = SiteSchema(
        site_id=raw["site_id"], domain_tag=raw["domain_tag"], pages=pages)
    validate_site_schema(schema)
    return schema


def _action_from_dict(page_id: str, raw: dict) -> ActionSchema:
    if not isinstance(raw, dict) or "name" not in raw:
        raise SchemaError(f"page {page_id!r}: every action needs a 'name'")
    params_raw = raw.get("parameters", [])
    if not isinstance(params_raw, list):
        raise SchemaError(f"action {raw['name']!r}: 'parameters' must be a list")
    parameters = []
    for param_raw in params_raw:
        if not isinstance(param_raw, dict):
            raise SchemaError(f"action {raw['name']!r}: parameters must be objects")
        parameters.append(ParameterSpec(
            name=param_raw.get("name", ""),
            kind=param_raw.get("kind", ""),
            domain=tuple(param_raw.get("domain", [])),
            description=param_raw.get("description"),
        ))
    return ActionSchema(name=raw["name"], parameters=tuple(parameters), page=page_id)


def load_site_schema(path: str | Path) -> SiteSchema:
    """Load and validate a site schema JSON file.

    Raises SchemaError both for files that do not parse and for files
    that violate an invariant; the message names the first problem found.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file {path} is not valid JSON: {exc}") from exc
    return site_schema_from_dict(raw)


def save_site_schema(schema: SiteSchema, path: str | Path) -> None:
    validate_site_schema(schema)
    Path(path).write_text(
        json.dumps(site_schema_to_dict(schema), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
