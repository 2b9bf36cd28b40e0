"""Labeled command corpora: record types, template-based generation, splits.

An Example pairs a natural-language command with the navigation
instruction it should map to (action name plus parameter-value
assignments) and with the character span in the command that mentions
each assigned value. Synthetic corpora are produced by instantiating
command templates: each "[parameter]" placeholder is replaced by a
randomly chosen paraphrase of a randomly chosen domain value, and the
span of the inserted paraphrase becomes the gold mention.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .schema import ActionSchema, SiteSchema
from .textnorm import normalize_text

_PLACEHOLDER_RE = re.compile(r"\[([^\[\]]+)\]")


class DatasetError(ValueError):
    """Malformed examples file or invalid generation inputs."""


@dataclass(frozen=True)
class ValueAssignment:
    parameter: str
    value: str


@dataclass(frozen=True)
class NavigationInstruction:
    """An action name plus the parameter-value assignments to perform it with."""

    action: str
    assignments: tuple[ValueAssignment, ...] = ()

    def assignment_map(self) -> dict[str, str]:
        """Normalized parameter -> normalized value, for order-insensitive comparison."""
        return {
            normalize_text(a.parameter): normalize_text(a.value)
            for a in self.assignments
        }


@dataclass(frozen=True)
class MentionSpan:
    """Character span of the command substring expressing one parameter value."""

    parameter: str
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class Example:
    command: str
    site_id: str
    page_id: str
    gold: NavigationInstruction
    mentions: tuple[MentionSpan, ...] = ()

    def mention_for(self, parameter: str) -> MentionSpan | None:
        key = normalize_text(parameter)
        for span in self.mentions:
            if normalize_text(span.parameter) == key:
                return span
        return None


@dataclass(frozen=True)
class CommandTemplate:
    """Command text with "[parameter]" placeholders, tied to one page action."""

    page_id: str
    action: str
    text: str

    @property
    def placeholders(self) -> list[str]:
        return _PLACEHOLDER_RE.findall(self.text)


@dataclass
class ParaphraseTable:
    """Surface forms to substitute for placeholders during generation.

    closed maps parameter -> domain value -> paraphrase strings; open maps
    parameter -> example values (which become both mention and gold value).
    """

    closed: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    open: dict[str, list[str]] = field(default_factory=dict)


def validate_example(example: Example, schema: SiteSchema | None = None) -> None:
    """Raise DatasetError on the first structural violation in an Example."""
    for span in example.mentions:
        if not (0 <= span.start < span.end <= len(example.command)):
            raise DatasetError(
                f"mention span [{span.start}, {span.end}) out of range for "
                f"command {example.command!r}")
        if example.command[span.start:span.end] != span.text:
            raise DatasetError(
                f"mention text {span.text!r} does not equal "
                f"command[{span.start}:{span.end}]")
    seen = set()
    for assignment in example.gold.assignments:
        key = normalize_text(assignment.parameter)
        if key in seen:
            raise DatasetError(
                f"duplicate gold assignment for parameter {assignment.parameter!r}")
        seen.add(key)
    if schema is None:
        return
    action = schema.action(example.page_id, example.gold.action)
    for assignment in example.gold.assignments:
        spec = action.parameter(assignment.parameter)
        if spec.is_closed:
            domain_keys = {normalize_text(v) for v in spec.domain}
            if normalize_text(assignment.value) not in domain_keys:
                raise DatasetError(
                    f"value {assignment.value!r} not in the domain of closed "
                    f"parameter {assignment.parameter!r}")


def _check_template(template: CommandTemplate, schema: SiteSchema,
                    paraphrases: ParaphraseTable) -> ActionSchema:
    try:
        action = schema.action(template.page_id, template.action)
    except KeyError as exc:
        raise DatasetError(str(exc)) from exc
    names = template.placeholders
    if len(set(names)) != len(names):
        raise DatasetError(
            f"template {template.text!r} repeats a placeholder")
    for name in names:
        try:
            spec = action.parameter(name)
        except KeyError as exc:
            raise DatasetError(str(exc)) from exc
        if spec.is_closed:
            table = paraphrases.closed.get(spec.name, {})
            for value in spec.domain:
                if not table.get(value):
                    raise DatasetError(
                        f"no paraphrases for closed parameter {spec.name!r} "
                        f"value {value!r}")
        else:
            if not paraphrases.open.get(spec.name):
                raise DatasetError(
                    f"no example values for open parameter {spec.name!r}")
    return action


def generate(schema: SiteSchema, templates: list[CommandTemplate],
             paraphrases: ParaphraseTable, count: int,
             rng_seed: int) -> list[Example]:
    """Instantiate `count` examples from templates, deterministically per seed.

    For a closed placeholder the gold value is the sampled domain value
    and the inserted text a sampled paraphrase of it; for an open
    placeholder one sampled example value serves as both. Spans are
    computed on the fully instantiated command.
    """
    if count <= 0:
        raise DatasetError("count must be a positive integer")
    if not templates:
        raise DatasetError("no templates given")
    actions = [_check_template(t, schema, paraphrases) for t in templates]
    rng = random.Random(rng_seed)
    examples = []
    for _ in range(count):
        pick = rng.randrange(len(templates))
        examples.append(
            _instantiate(schema, templates[pick], actions[pick], paraphrases, rng))
    return examples


def _instantiate(schema: SiteSchema, template: CommandTemplate,
                 action: ActionSchema, paraphrases: ParaphraseTable,
                 rng: random.Random) -> Example:
    command_parts: list[str] = []
    assignments: list[ValueAssignment] = []
    mentions: list[MentionSpan] = []
    cursor = 0
    offset = 0
    for match in _PLACEHOLDER_RE.finditer(template.text):
        literal = template.text[cursor:match.start()]
        command_parts.append(literal)
        offset += len(literal)
        spec = action.parameter(match.group(1))
        if spec.is_closed:
            value = spec.domain[rng.randrange(len(spec.domain))]
            options = paraphrases.closed[spec.name][value]
            surface = options[rng.randrange(len(options))]
        else:
            options = paraphrases.open[spec.name]
            surface = options[rng.randrange(len(options))]
            value = surface
        command_parts.append(surface)
        assignments.append(ValueAssignment(parameter=spec.name, value=value))
        mentions.append(MentionSpan(
            parameter=spec.name, start=offset, end=offset + len(surface),
            text=surface))
        offset += len(surface)
        cursor = match.end()
    command_parts.append(template.text[cursor:])
    example = Example(
        command="".join(command_parts),
        site_id=schema.site_id,
        page_id=template.page_id,
        gold=NavigationInstruction(
            action=action.name, assignments=tuple(assignments)),
        mentions=tuple(mentions),
    )
    validate_example(example, schema)
    return example


def split(examples: list[Example], ratios: tuple[float, float, float],
          rng_seed: int) -> tuple[list[Example], list[Example], list[Example]]:
    """Shuffle and partition into train/valid/test buckets.

    Bucket sizes follow the ratios via largest-remainder rounding; when
    fewer examples than buckets exist, surplus preference is
    train > valid > test, so a single example lands in train.
    """
    if not examples:
        raise DatasetError("cannot split an empty example list")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise DatasetError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"ratios must sum to 1, got {sum(ratios)}")
    shuffled = list(examples)
    random.Random(rng_seed).shuffle(shuffled)
    n = len(shuffled)
    quotas = [n * r for r in ratios]
    sizes = [int(q) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    # Hand out leftover slots by largest remainder, ties to earlier buckets.
    for _ in range(n - sum(sizes)):
        best = max(range(3), key=lambda i: (remainders[i], -i))
        sizes[best] += 1
        remainders[best] = -1.0
    train = shuffled[:sizes[0]]
    valid = shuffled[sizes[0]:sizes[0] + sizes[1]]
    test = shuffled[sizes[0] + sizes[1]:]
    return train, valid, test


def example_to_dict(example: Example) -> dict:
    return {
        "command": example.command,
        "site_id": example.site_id,
        "page_id": example.page_id,
        "gold": {
            "action": example.gold.action,
            "assignments": [
                {"parameter": a.parameter, "value": a.value}
                for a in example.gold.assignments
            ],
        },
        "mentions": [
            {"parameter": m.parameter, "start": m.start, "end": m.end,
             "text": m.text}
            for m in example.mentions
        ],
    }


def example_from_dict(raw: dict) -> Example:
    try:
        gold = NavigationInstruction(
            action=raw["gold"]["action"],
            assignments=tuple(
                ValueAssignment(parameter=a["parameter"], value=a["value"])
                for a in raw["gold"]["assignments"]),
        )
        return Example(
            command=raw["command"],
            site_id=raw["site_id"],
            page_id=raw["page_id"],
            gold=gold,
            mentions=tuple(
                MentionSpan(parameter=m["parameter"], start=m["start"],
                            end=m["end"], text=m["text"])
                for m in raw["mentions"]),
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"missing or malformed field: {exc}") from exc


def save_examples(examples: list[Example], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(example_to_dict(example), ensure_ascii=False))
            handle.write("\n")


def load_examples(path: str | Path,
                  schema: SiteSchema | None = None) -> list[Example]:
    """Read a JSONL examples file; line numbers are reported on failure.

    Passing a schema additionally validates gold values against it.
    """
    examples = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            try:
                example = example_from_dict(raw)
                validate_example(example, schema)
            except (DatasetError, KeyError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            examples.append(example)
    return examples


def load_templates(path: str | Path) -> list[CommandTemplate]:
    """Read a JSONL templates file: {"page_id", "action", "text"} per line."""
    templates = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                templates.append(CommandTemplate(
                    page_id=raw["page_id"], action=raw["action"],
                    text=raw["text"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return templates


def save_templates(templates: list[CommandTemplate], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for template in templates:
            handle.write(json.dumps(
                {"page_id": template.page_id, "action": template.action,
                 "text": template.text}, ensure_ascii=False))
            handle.write("\n")


def load_paraphrases(path: str | Path) -> ParaphraseTable:
    """Read a paraphrase JSON file: {"closed": {...}, "open": {...}}."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DatasetError(f"{path}: paraphrase root must be an object")
    return ParaphraseTable(
        closed={
            param: {value: list(options) for value, options in table.items()}
            for param, table in raw.get("closed", {}).items()
        },
        open={param: list(values) for param, values in raw.get("open", {}).items()},
    )


def save_paraphrases(paraphrases: ParaphraseTable, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"closed": paraphrases.closed, "open": paraphrases.open},
                   ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
