"""Metrics over (gold, predicted) navigation instruction pairs.

Four aggregate numbers are reported:

- action accuracy: predicted action equals the gold action;
- parameter F1: harmonic mean of the macro-averaged per-command parameter
  precision and recall, where a wrong or missing action zeroes both;
- exact match: action and the full assignment set match, order-free;
- full-precision accuracy: correct action and parameter precision 1.0,
  i.e. nothing wrong was predicted even if recall is incomplete.

All comparisons use canonical text normalization. Aggregation runs in
exact rational arithmetic and converts to float once at the end, so a
hand-computed expectation can be asserted with equality.

classify_errors buckets each wrong pair into an automatable taxonomy:
missing action, wrong action, unidentified closed parameter, wrong closed
value, wrong or missing open value. Several buckets can apply at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .dataset import NavigationInstruction
from .schema import SiteSchema
from .textnorm import normalize_text

ERROR_CLASSES = (
    "action_not_predicted",
    "action_mispredicted",
    "closed_param_missed",
    "closed_value_mispredicted",
    "open_value_mispredicted",
)


@dataclass(frozen=True)
class EvalReport:
    a_acc: float
    p_f1: float
    ema: float
    pa100: float
    n: int
    mean_precision: float
    mean_recall: float
    error_counts: dict[str, int] = field(default_factory=dict)


def _action_match(gold: NavigationInstruction,
                  pred: NavigationInstruction | None) -> bool:
    return (pred is not None
            and normalize_text(pred.action) == normalize_text(gold.action))


def _pr_fractions(gold: NavigationInstruction,
                  pred: NavigationInstruction | None
                  ) -> tuple[Fraction, Fraction]:
    if not _action_match(gold, pred):
        return Fraction(0), Fraction(0)
    gold_map = gold.assignment_map()
    pred_map = pred.assignment_map()
    correct = sum(1 for param, value in pred_map.items()
                  if gold_map.get(param) == value)
    # Empty prediction lists are vacuously precise; recall covers the gap.
    precision = Fraction(correct, len(pred_map)) if pred_map else Fraction(1)
    recall = Fraction(correct, len(gold_map)) if gold_map else Fraction(1)
    return precision, recall


def per_example_pr(gold: NavigationInstruction,
                   pred: NavigationInstruction | None
                   ) -> tuple[float, float]:
    """Parameter precision and recall for one command."""
    precision, recall = _pr_fractions(gold, pred)
    return float(precision), float(recall)


def report(pairs: list[tuple[NavigationInstruction,
                             NavigationInstruction | None]],
           schema: SiteSchema | None = None) -> EvalReport:
    """Aggregate metrics; pass a schema to also collect error classes."""
    if not pairs:
        raise ValueError("cannot evaluate an empty pair list")
    n = len(pairs)
    action_hits = 0
    exact = 0
    full_precision = 0
    precision_sum = Fraction(0)
    recall_sum = Fraction(0)
    error_counts = {name: 0 for name in ERROR_CLASSES}
    for gold, pred in pairs:
        precision, recall = _pr_fractions(gold, pred)
        precision_sum += precision
        recall_sum += recall
        matched = _action_match(gold, pred)
        action_hits += matched
        if matched and gold.assignment_map() == pred.assignment_map():
            exact += 1
        if matched and precision == 1:
            full_precision += 1
        if schema is not None:
            for name in classify_errors(gold, pred, schema):
                error_counts[name] += 1
    mean_precision = precision_sum / n
    mean_recall = recall_sum / n
    if mean_precision + mean_recall > 0:
        p_f1 = 2 * mean_precision * mean_recall / (mean_precision + mean_recall)
    else:
        p_f1 = Fraction(0)
    return EvalReport(
        a_acc=float(Fraction(action_hits, n)),
        p_f1=float(p_f1),
        ema=float(Fraction(exact, n)),
        pa100=float(Fraction(full_precision, n)),
        n=n,
        mean_precision=float(mean_precision),
        mean_recall=float(mean_recall),
        error_counts=error_counts if schema is not None else {},
    )


def classify_errors(gold: NavigationInstruction,
                    pred: NavigationInstruction | None,
                    schema: SiteSchema, page_id: str | None = None) -> set[str]:
    """Error classes for one pair; empty set when the pair is fully correct.

    The gold action must exist in the schema (any page) to type its
    parameters as closed or open.
    """
    if pred is None:
        return {"action_not_predicted"}
    if not _action_match(gold, pred):
        return {"action_mispredicted"}
    action = _find_action(schema, gold.action, page_id)
    pred_map = pred.assignment_map()
    errors: set[str] = set()
    for assignment in gold.assignments:
        spec = action.parameter(assignment.parameter)
        key = normalize_text(assignment.parameter)
        predicted = pred_map.get(key)
        wanted = normalize_text(assignment.value)
        if spec.is_closed:
            if predicted is None:
                errors.add("closed_param_missed")
            elif predicted != wanted:
                errors.add("closed_value_mispredicted")
        else:
            if predicted is None or predicted != wanted:
                errors.add("open_value_mispredicted")
    return errors


def _find_action(schema: SiteSchema, action_name: str,
                 page_id: str | None):
    if page_id is not None:
        return schema.action(page_id, action_name)
    key = normalize_text(action_name)
    for actions in schema.pages.values():
        for action in actions:
            if normalize_text(action.name) == key:
                return action
    raise KeyError(f"action {action_name!r} not found in schema")


def format_metrics_row(label: str, rep: EvalReport) -> str:
    """One aligned text row of the four headline metrics."""
    return (f"{label:<28} {rep.a_acc:>7.3f} {rep.p_f1:>7.3f} "
            f"{rep.ema:>7.3f} {rep.pa100:>7.3f}")


def format_metrics_table(rows: list[tuple[str, EvalReport]]) -> str:
    header = (f"{'':<28} {'A-acc':>7} {'P-F1':>7} {'EMA':>7} {'PA-100':>7}")
    return "\n".join([header, *(format_metrics_row(label, rep)
                                for label, rep in rows)])


def report_to_dict(rep: EvalReport) -> dict:
    return {
        "a_acc": rep.a_acc,
        "p_f1": rep.p_f1,
        "ema": rep.ema,
        "pa100": rep.pa100,
        "n": rep.n,
        "mean_precision": rep.mean_precision,
        "mean_recall": rep.mean_recall,
        "error_counts": dict(rep.error_counts),
    }


def report_to_json(rep: EvalReport) -> str:
    return json.dumps(report_to_dict(rep), indent=2) + "\n"
