"""Candidate aggregation: from component scores to one navigation instruction.

For every action on the page, each of its parameters is resolved
independently: no extracted mention drops the parameter; an open
parameter takes the mention text verbatim at confidence 1; a closed
parameter takes its best-scoring domain value when that score clears the
threshold rho, and is otherwise rejected. A parametrized action whose
parameters all fell away is discarded. Surviving candidates are ranked
by alpha * action_score + (1 - alpha) * mean assignment confidence
(unparametrized actions rank by action score alone), with ties broken by
higher action score and then page declaration order.

The components are passed in as three callables so that trained models
and table-driven stubs go through the exact same code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .dataset import NavigationInstruction, ValueAssignment
from .mention_extractor import MentionPrediction
from .schema import ActionSchema, ParameterSpec, SiteSchema, actions_of

DEFAULT_RHO = 0.67
DEFAULT_ALPHA = 0.4


@dataclass(frozen=True)
class InferenceConfig:
    """Decision thresholds; the defaults are the tuned operating point."""

    rho: float = DEFAULT_RHO
    alpha: float = DEFAULT_ALPHA
    count_rejected_in_mean: bool = False

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class ParserModels:
    """The three trained components, reduced to their scoring surfaces."""

    score_action: Callable[[str, ActionSchema], float]
    extract_mention: Callable[[str, str], MentionPrediction]
    net_value_score: Callable[[str, str], float]


@dataclass(frozen=True)
class ScoredAssignment:
    parameter: str
    value: str
    confidence: float


@dataclass(frozen=True)
class ScoredPrediction:
    instruction: NavigationInstruction
    action_score: float
    param_score: float | None      # None for unparametrized actions
    total: float
    assignments: tuple[ScoredAssignment, ...]
    trace: tuple[dict, ...] = ()


@dataclass(frozen=True)
class ParameterOutcome:
    """How one parameter resolved: assigned, rejected (below rho) or dropped."""

    parameter: str
    status: str                    # "assigned" | "rejected" | "dropped"
    mention: str | None = None
    value: str | None = None
    confidence: float = 0.0


def assign_parameter(models: ParserModels, parameter: ParameterSpec,
                     command: str,
                     config: InferenceConfig = InferenceConfig(),
                     mention_cache: dict[str, MentionPrediction] | None = None,
                     ) -> ParameterOutcome:
    """Resolve one parameter of one candidate action against the command."""
    if mention_cache is not None and parameter.name in mention_cache:
        prediction = mention_cache[parameter.name]
    else:
        prediction = models.extract_mention(parameter.name, command)
        if mention_cache is not None:
            mention_cache[parameter.name] = prediction
    if prediction.span is None:
        return ParameterOutcome(parameter=parameter.name, status="dropped")
    mention = prediction.span.text
    if not parameter.is_closed:
        return ParameterOutcome(parameter=parameter.name, status="assigned",
                                mention=mention, value=mention,
                                confidence=1.0)
    best_value = None
    best_score = -1.0
    for value in parameter.domain:
        score = models.net_value_score(mention, value)
        if score > best_score:
            best_value = value
            best_score = score
    if best_score >= config.rho:
        return ParameterOutcome(parameter=parameter.name, status="assigned",
                                mention=mention, value=best_value,
                                confidence=best_score)
    return ParameterOutcome(parameter=parameter.name, status="rejected",
                            mention=mention, value=best_value,
                            confidence=0.0)


def score_candidate(models: ParserModels, action: ActionSchema, command: str,
                    config: InferenceConfig = InferenceConfig(),
                    mention_cache: dict[str, MentionPrediction] | None = None,
                    ) -> tuple[ScoredPrediction | None, dict]:
    """Score one action; None means the candidate was discarded.

    The accompanying dict is the trace entry for this candidate.
    """
    action_score = models.score_action(command, action)
    outcomes = [
        assign_parameter(models, spec, command, config, mention_cache)
        for spec in action.parameters
    ]
    assigned = [o for o in outcomes if o.status == "assigned"]
    trace = {
        "action": action.name,
        "action_score": action_score,
        "parameters": [
            {"parameter": o.parameter, "status": o.status,
             "mention": o.mention, "value": o.value,
             "confidence": o.confidence}
            for o in outcomes
        ],
    }
    if action.parameters and not assigned:
        trace["status"] = "discarded"
        return None, trace
    if not action.parameters:
        param_score = None
        total = action_score
    else:
        if config.count_rejected_in_mean:
            considered = [o for o in outcomes if o.status != "dropped"]
        else:
            considered = assigned
        param_score = sum(o.confidence for o in considered) / len(considered)
        total = config.alpha * action_score + (1.0 - config.alpha) * param_score
    trace["status"] = "scored"
    trace["total"] = total
    prediction = ScoredPrediction(
        instruction=NavigationInstruction(
            action=action.name,
            assignments=tuple(ValueAssignment(o.parameter, o.value)
                              for o in assigned)),
        action_score=action_score,
        param_score=param_score,
        total=total,
        assignments=tuple(ScoredAssignment(o.parameter, o.value, o.confidence)
                          for o in assigned),
    )
    return prediction, trace


def parse(models: ParserModels, schema: SiteSchema, page_id: str,
          command: str,
          config: InferenceConfig = InferenceConfig()) -> ScoredPrediction | None:
    """Highest-scoring navigation instruction for a command on a page.

    Returns None when every candidate was discarded. Mention extraction is
    memoized per parameter name, so actions sharing a parameter query the
    extractor once.
    """
    candidates: list[tuple[ScoredPrediction, int]] = []
    traces: list[dict] = []
    mention_cache: dict[str, MentionPrediction] = {}
    for order, action in enumerate(actions_of(schema, page_id)):
        prediction, trace = score_candidate(models, action, command, config,
                                            mention_cache)
        traces.append(trace)
        if prediction is not None:
            candidates.append((prediction, order))
    if not candidates:
        return None
    best, _ = max(candidates,
                  key=lambda item: (item[0].total, item[0].action_score,
                                    -item[1]))
    return ScoredPrediction(
        instruction=best.instruction,
        action_score=best.action_score,
        param_score=best.param_score,
        total=best.total,
        assignments=best.assignments,
        trace=tuple(traces),
    )


def prediction_to_dict(command: str, page_id: str,
                       prediction: ScoredPrediction | None) -> dict:
    """The stable JSON shape consumed by the CLI, the server and the files."""
    if prediction is None:
        return {"command": command, "page_id": page_id, "prediction": None,
                "trace": []}
    return {
        "command": command,
        "page_id": page_id,
        "prediction": {
            "action": prediction.instruction.action,
            "assignments": [
                {"parameter": a.parameter, "value": a.value,
                 "confidence": a.confidence}
                for a in prediction.assignments
            ],
            "action_score": prediction.action_score,
            "total": prediction.total,
        },
        "trace": list(prediction.trace),
    }
