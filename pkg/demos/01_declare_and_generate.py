"""Declare a site's action space and generate a labeled command corpus.

A site schema lists, per page, the concept-level actions a visitor can
take, with closed-domain parameters (finite value sets imposed by the UI)
and open-domain parameters (free text). Labeled data is synthesized by
instantiating command templates with value paraphrases: the paraphrase
lands in the command text, the canonical domain value in the gold
instruction, and the inserted span is recorded character-exactly.

Run:  python demos/01_declare_and_generate.py
"""

from __future__ import annotations

import json
from pathlib import Path

from navparse import (actions_of, generate, load_site_schema,
                      save_site_schema, split)
from navparse.dataset import save_examples
from navparse.schema import site_schema_to_dict
from navparse.toydata import toy_site

out_dir = Path(__file__).resolve().parent / "demo-data"
out_dir.mkdir(exist_ok=True)

# ---------------------------------------------------------------------------
# 1. The declarative action space
# ---------------------------------------------------------------------------
schema, templates, paraphrases = toy_site()
print(f"site {schema.site_id!r} with pages {list(schema.pages)}")
for page_id in schema.pages:
    for action in actions_of(schema, page_id):
        kinds = ", ".join(f"{p.name}:{p.kind}" for p in action.parameters)
        print(f"  [{page_id}] {action.name!r} ({kinds or 'no parameters'})")

schema_path = out_dir / "schema.json"
save_site_schema(schema, schema_path)
reloaded = load_site_schema(schema_path)
assert reloaded == schema
print(f"\nschema round-trips through {schema_path.name}")
print(json.dumps(site_schema_to_dict(schema)["pages"]["results"][1],
                 indent=2))

# ---------------------------------------------------------------------------
# 2. Template instantiation
# ---------------------------------------------------------------------------
print(f"\n{len(templates)} command templates, e.g.:")
for template in templates[:3]:
    print(f"  [{template.page_id}/{template.action}] {template.text!r} "
          f"-> placeholders {template.placeholders}")

examples = generate(schema, templates, paraphrases, count=1000, rng_seed=7)
example = next(e for e in examples if len(e.mentions) >= 2)
print(f"\na generated example:")
print(f"  command : {example.command!r}")
print(f"  gold    : {example.gold.action!r} "
      f"{[(a.parameter, a.value) for a in example.gold.assignments]}")
for span in example.mentions:
    print(f"  mention : {span.parameter!r} = "
          f"command[{span.start}:{span.end}] = {span.text!r}")
    assert example.command[span.start:span.end] == span.text

# ---------------------------------------------------------------------------
# 3. Deterministic splits, serialized as JSONL
# ---------------------------------------------------------------------------
train, valid, test = split(examples, (0.8, 0.1, 0.1), rng_seed=7)
print(f"\nsplit sizes: train={len(train)} valid={len(valid)} test={len(test)}")
for name, bucket in [("train", train), ("valid", valid), ("test", test)]:
    save_examples(bucket, out_dir / f"{name}.jsonl")
print(f"wrote JSONL splits to {out_dir}")

again = generate(schema, templates, paraphrases, count=1000, rng_seed=7)
assert again == examples
print("same seed reproduces the corpus byte for byte")
