"""Shared helper for the demo scripts: one small cached training run.

The first demo that needs a trained bundle trains it (about half a
minute on a laptop CPU) and saves it under demo-run/; later demos reload
it instantly. Delete the directory to retrain from scratch.
"""

from __future__ import annotations

from pathlib import Path

from navparse import TrainingConfig, load_bundle, train_all, tune_inference
from navparse.dataset import generate, split
from navparse.toydata import toy_site

RUN_DIR = Path(__file__).resolve().parent / "demo-run"

DEMO_CONFIG = TrainingConfig(
    dim=32,
    epochs_action=4,
    epochs_mention=3,
    epochs_value=8,
    learning_rate=1e-3,
    mention_learning_rate=1e-3,
    rng_seed=3,
)


def demo_corpus(count: int = 1200, seed: int = 11):
    schema, templates, paraphrases = toy_site()
    examples = generate(schema, templates, paraphrases, count, rng_seed=seed)
    return (schema, *split(examples, (0.8, 0.1, 0.1), rng_seed=seed))


def demo_bundle():
    """Train (or reload) the demo bundle and return (schema, splits, bundle)."""
    schema, train, valid, test = demo_corpus()
    if (RUN_DIR / "inference.json").is_file():
        print(f"reusing trained bundle from {RUN_DIR}")
        return schema, train, valid, test, load_bundle(RUN_DIR)
    print(f"training a small bundle into {RUN_DIR} (about 30s) ...")
    bundle = train_all(schema, train, valid, DEMO_CONFIG, out_dir=RUN_DIR)
    bundle.inference = tune_inference(
        bundle, valid, schema,
        rho_grid=[0.4, 0.5, 0.6, 0.67, 0.75],
        alpha_grid=[0.2, 0.4, 0.6, 0.8])
    from navparse.orchestrator import save_bundle_extras
    save_bundle_extras(bundle, RUN_DIR)
    return schema, train, valid, test, bundle
