"""End-to-end training runs: three components, one bundle, tuned thresholds.

The three components are trained independently, in the order action
scorer, mention extractor, value scorer, each keeping its best-valid
epoch. The value scorer continues training the live word-embedding
matrix, while the bundled action scorer stays frozen at its own selected
checkpoint. A finished run directory holds config.json,
dataset-manifest.json, one checkpoint directory per component,
inference.json and history.jsonl, and is everything parse/serve needs.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import action_scorer as asc
from . import mention_extractor as msc
from . import value_scorer as vsc
from .checkpoints import checkpoint_exists
from .dataset import Example, example_to_dict
from .evaluation import report
from .inference import (DEFAULT_ALPHA, DEFAULT_RHO, InferenceConfig,
                        ParserModels, parse)
from .schema import SiteSchema, site_schema_to_dict, validate_site_schema
from .transformer import EncoderConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters; the defaults are the tuned full-scale settings."""

    batch_size: int = 50
    epochs_action: int = 7
    epochs_mention: int = 3
    epochs_value: int = 22
    n_negatives: int = 1
    dropout: float = 0.1
    dim: int = 300
    learning_rate: float = 1e-4
    l2_coefficient: float = 0.001
    rng_seed: int = 0
    # Contextual-encoder settings for the mention extractor. The encoder
    # identifier is either "fresh" (train the compact encoder from this
    # config) or a checkpoint directory to start from.
    mention_encoder: str = "fresh"
    mention_hidden: int = 64
    mention_layers: int = 2
    mention_heads: int = 4
    mention_ffn: int = 256
    mention_learning_rate: float | None = None
    max_seq_len: int = 64
    span_max_len: int = 20
    value_four_way_lexical: bool = False

    def __post_init__(self):
        for name in ("batch_size", "epochs_action", "epochs_mention",
                     "epochs_value", "n_negatives", "dim", "learning_rate",
                     "l2_coefficient"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class ModelBundle:
    """Trained components plus the inference config and run provenance."""

    action: asc.ActionScorerParameters
    mention: msc.SpanExtractorParameters
    value: vsc.ValueScorerParameters
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    provenance: dict = field(default_factory=dict)

    def parser_models(self) -> ParserModels:
        return ParserModels(
            score_action=lambda command, action: asc.score_action(
                self.action, command, action),
            extract_mention=lambda parameter, command: msc.extract_mention(
                self.mention, parameter, command),
            net_value_score=lambda mention, value: vsc.net_value_score(
                self.value, mention, value).net,
        )

    def parse(self, schema: SiteSchema, page_id: str, command: str):
        return parse(self.parser_models(), schema, page_id, command,
                     self.inference)


def config_hash(config: TrainingConfig) -> str:
    canonical = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def dataset_hash(examples: list[Example]) -> str:
    digest = hashlib.sha256()
    for example in examples:
        digest.update(json.dumps(example_to_dict(example),
                                 sort_keys=True).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()[:16]


def _write_history(out_dir: Path | None, rows: list[dict]) -> None:
    if out_dir is None:
        return
    with (out_dir / "history.jsonl").open("a", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")


def train_components(schema: SiteSchema, train: list[Example],
                     valid: list[Example], config: TrainingConfig,
                     out_dir: str | Path | None = None,
                     components: tuple[str, ...] = ("action", "mention",
                                                    "value"),
                     ) -> dict:
    """Train the requested components, checkpointing each as it finishes.

    With an out_dir, an interrupted run resumes by skipping components
    whose checkpoints already exist. Returns the trained parameter objects
    keyed by component name.
    """
    validate_site_schema(schema)
    if not train:
        raise ValueError("empty training set")
    if not valid:
        raise ValueError("a validation split is required for checkpoint "
                         "selection")
    for example in train + valid:
        schema.action(example.page_id, example.gold.action)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(
            json.dumps(asdict(config), indent=2) + "\n", encoding="utf-8")
        (out_dir / "dataset-manifest.json").write_text(json.dumps({
            "site_id": schema.site_id,
            "train_examples": len(train),
            "valid_examples": len(valid),
            "train_hash": dataset_hash(train),
            "valid_hash": dataset_hash(valid),
            "schema": site_schema_to_dict(schema),
        }, indent=2) + "\n", encoding="utf-8")
    rng = np.random.default_rng(config.rng_seed)
    vocab = asc.build_vocabulary(schema, train)
    trained: dict = {}

    if "action" in components:
        action_dir = None if out_dir is None else out_dir / "action"
        if action_dir is not None and _has_checkpoint(action_dir):
            logger.info("action scorer checkpoint exists; skipping")
            trained["action"] = asc.load_action_scorer(action_dir)
        else:
            params = asc.ActionScorerParameters.create(rng, vocab, config.dim)
            params, history = asc.train_action_scorer(
                params, train, valid, schema, config)
            _write_history(out_dir, _history_rows(history))
            if action_dir is not None:
                asc.save_action_scorer(params, action_dir)
            trained["action"] = params

    if "mention" in components:
        mention_dir = None if out_dir is None else out_dir / "mention"
        if mention_dir is not None and _has_checkpoint(mention_dir):
            logger.info("mention extractor checkpoint exists; skipping")
            trained["mention"] = msc.load_mention_extractor(mention_dir)
        else:
            params = _fresh_mention_params(rng, schema, train, config)
            records = msc.derive_mention_records(train, schema)
            valid_records = msc.derive_mention_records(valid, schema)
            params, history = msc.train_mention_extractor(
                params, records, valid_records, config)
            _write_history(out_dir, _history_rows(history))
            if mention_dir is not None:
                msc.save_mention_extractor(params, mention_dir)
            trained["mention"] = params

    if "value" in components:
        value_dir = None if out_dir is None else out_dir / "value"
        if value_dir is not None and _has_checkpoint(value_dir):
            logger.info("value scorer checkpoint exists; skipping")
            trained["value"] = vsc.load_value_scorer(value_dir)
        else:
            # Share the live embedding matrix; the bundled action scorer is
            # frozen separately at its own selection point.
            live_action = trained.get("action")
            shared_e_w = live_action.e_w if live_action is not None else None
            params = vsc.ValueScorerParameters.create(
                rng, vocab, config.dim, e_w=shared_e_w,
                four_way_lexical=config.value_four_way_lexical)
            records = vsc.derive_value_records(train, schema)
            valid_records = vsc.derive_value_records(valid, schema)
            params, history = vsc.train_value_scorer(
                params, records, valid_records, config)
            _write_history(out_dir, _history_rows(history))
            if value_dir is not None:
                vsc.save_value_scorer(params, value_dir)
            trained["value"] = params

    return trained


def train_all(schema: SiteSchema, train: list[Example],
              valid: list[Example], config: TrainingConfig,
              out_dir: str | Path | None = None) -> ModelBundle:
    """Train action, mention and value components and assemble a bundle."""
    if out_dir is not None:
        out_dir = Path(out_dir)
    trained = train_components(schema, train, valid, config, out_dir,
                               ("action",))
    # Freeze the action scorer before value training mutates the shared
    # embedding matrix.
    frozen_action = asc.clone_action_scorer(trained["action"])
    trained.update(train_components(schema, train, valid, config, out_dir,
                                    ("mention", "value")))
    provenance = {
        "config_hash": config_hash(config),
        "train_hash": dataset_hash(train),
        "valid_hash": dataset_hash(valid),
        "rng_seed": config.rng_seed,
    }
    bundle = ModelBundle(action=frozen_action, mention=trained["mention"],
                         value=trained["value"],
                         inference=InferenceConfig(), provenance=provenance)
    if out_dir is not None:
        save_bundle_extras(bundle, out_dir)
    return bundle


def _history_rows(history: dict) -> list[dict]:
    rows = []
    for epoch_row in history.get("epochs", []):
        rows.append({"component": history.get("component"), **epoch_row})
    return rows


def _has_checkpoint(directory: Path) -> bool:
    return checkpoint_exists(directory)


def _fresh_mention_params(rng, schema: SiteSchema, train: list[Example],
                          config: TrainingConfig
                          ) -> msc.SpanExtractorParameters:
    if config.mention_encoder != "fresh":
        return msc.load_mention_extractor(config.mention_encoder)
    texts = [example.command for example in train]
    for actions in schema.pages.values():
        for action in actions:
            texts.append(action.name)
            for spec in action.parameters:
                texts.append(spec.name)
                texts.extend(spec.domain)
    tokenizer = msc.SubwordTokenizer.build(texts)
    encoder_config = EncoderConfig(
        vocab_size=len(tokenizer), hidden=config.mention_hidden,
        layers=config.mention_layers, heads=config.mention_heads,
        ffn=config.mention_ffn, max_seq_len=config.max_seq_len,
        dropout=config.dropout)
    return msc.SpanExtractorParameters.create(
        rng, tokenizer, encoder_config, span_max_len=config.span_max_len)


def save_bundle_extras(bundle: ModelBundle, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    (out_dir / "inference.json").write_text(json.dumps({
        "rho": bundle.inference.rho,
        "alpha": bundle.inference.alpha,
        "count_rejected_in_mean": bundle.inference.count_rejected_in_mean,
        "provenance": bundle.provenance,
    }, indent=2) + "\n", encoding="utf-8")


def save_bundle(bundle: ModelBundle, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    asc.save_action_scorer(bundle.action, out_dir / "action")
    msc.save_mention_extractor(bundle.mention, out_dir / "mention")
    vsc.save_value_scorer(bundle.value, out_dir / "value")
    save_bundle_extras(bundle, out_dir)


def load_bundle(directory: str | Path) -> ModelBundle:
    directory = Path(directory)
    for component in ("action", "mention", "value"):
        if not _has_checkpoint(directory / component):
            raise FileNotFoundError(
                f"bundle at {directory} is missing the {component} checkpoint")
    inference_config = InferenceConfig()
    provenance = {}
    inference_path = directory / "inference.json"
    if inference_path.is_file():
        raw = json.loads(inference_path.read_text(encoding="utf-8"))
        inference_config = InferenceConfig(
            rho=raw.get("rho", DEFAULT_RHO),
            alpha=raw.get("alpha", DEFAULT_ALPHA),
            count_rejected_in_mean=raw.get("count_rejected_in_mean", False))
        provenance = raw.get("provenance", {})
    return ModelBundle(
        action=asc.load_action_scorer(directory / "action"),
        mention=msc.load_mention_extractor(directory / "mention"),
        value=vsc.load_value_scorer(directory / "value"),
        inference=inference_config,
        provenance=provenance,
    )


def tune_inference(bundle: ModelBundle, valid: list[Example],
                   schema: SiteSchema, rho_grid: list[float],
                   alpha_grid: list[float]) -> InferenceConfig:
    """Grid-search (rho, alpha) maximizing exact match on the validation set.

    Ties prefer higher full-precision accuracy, then lower rho, then lower
    alpha. Component scores are computed once and reused across the grid.
    """
    if not valid:
        raise ValueError("empty validation set")
    if not rho_grid or not alpha_grid:
        raise ValueError("rho and alpha grids must be non-empty")
    for value in [*rho_grid, *alpha_grid]:
        if not 0.0 <= value <= 1.0:
            raise ValueError("grid values must lie in [0, 1]")
    models = bundle.parser_models()
    cached = [_CachedModels(models, schema, example) for example in valid]
    best_key = None
    best = None
    for rho in sorted(rho_grid):
        for alpha in sorted(alpha_grid):
            config = InferenceConfig(
                rho=rho, alpha=alpha,
                count_rejected_in_mean=bundle.inference.count_rejected_in_mean)
            pairs = []
            for cache in cached:
                prediction = parse(cache.models, schema,
                                   cache.example.page_id,
                                   cache.example.command, config)
                pairs.append((cache.example.gold,
                              None if prediction is None
                              else prediction.instruction))
            rep = report(pairs)
            key = (rep.ema, rep.pa100, -rho, -alpha)
            if best_key is None or key > best_key:
                best_key = key
                best = config
    if best is not None and best.rho >= 1.0:
        logger.warning("tuned rho of 1.0 rejects every closed-domain "
                       "assignment; exact match is limited to open-domain "
                       "and unparametrized gold instructions")
    return best


class _CachedModels:
    """Memoizes component calls for one example so grid cells reuse them."""

    def __init__(self, models: ParserModels, schema: SiteSchema,
                 example: Example):
        self.example = example
        action_scores: dict[str, float] = {}
        mentions: dict[str, object] = {}
        values: dict[tuple[str, str], float] = {}

        def score_action(command, action):
            if action.name not in action_scores:
                action_scores[action.name] = models.score_action(command,
                                                                 action)
            return action_scores[action.name]

        def extract_mention(parameter, command):
            if parameter not in mentions:
                mentions[parameter] = models.extract_mention(parameter,
                                                             command)
            return mentions[parameter]

        def net_value_score(mention, value):
            key = (mention, value)
            if key not in values:
                values[key] = models.net_value_score(mention, value)
            return values[key]

        self.models = ParserModels(score_action=score_action,
                                   extract_mention=extract_mention,
                                   net_value_score=net_value_score)
