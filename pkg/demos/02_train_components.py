"""Train the three model components and inspect what each one learned.

The action scorer ranks (action name, parameter names) pairs against the
command with a shared-BiLSTM dual encoder; the mention extractor finds
the command span expressing a parameter (or signals no mention) with a
compact bidirectional transformer; the value scorer resolves a mention to
a closed-domain value by averaging word-level, character-level and
lexical similarity. Each component keeps its best validation epoch.

Run:  python demos/02_train_components.py
"""

from __future__ import annotations

import json

from navparse import actions_of
from navparse.action_scorer import score_actions
from navparse.mention_extractor import extract_mention
from navparse.value_scorer import net_value_score

from common import RUN_DIR, demo_bundle

schema, train, valid, test, bundle = demo_bundle()

# ---------------------------------------------------------------------------
# 1. Training history (written as history.jsonl in the run directory)
# ---------------------------------------------------------------------------
history = (RUN_DIR / "history.jsonl").read_text().splitlines()
print("\nper-epoch history:")
for line in history:
    row = json.loads(line)
    metric = next(k for k in row if k.startswith("valid_"))
    print(f"  {row['component']:<8} epoch {row['epoch']}: "
          f"train_loss={row['train_loss']:.4f} {metric}={row[metric]:.3f}")

# ---------------------------------------------------------------------------
# 2. Action scoring: every candidate on the page, scored in [0, 1]
# ---------------------------------------------------------------------------
command = "book a table for a couple of us at 7 pm"
actions = actions_of(schema, "home")
scores = score_actions(bundle.action, command, actions)
print(f"\naction scores for {command!r}:")
for action, score in zip(actions, scores):
    print(f"  {action.name!r:<18} {score:.3f}")

# ---------------------------------------------------------------------------
# 3. Mention extraction: spans come back as exact substrings
# ---------------------------------------------------------------------------
print("\nmention extraction:")
for parameter in ("people", "time", "cuisine"):
    prediction = extract_mention(bundle.mention, parameter, command)
    if prediction.span is None:
        print(f"  {parameter!r}: no mention (p={prediction.start_prob:.2f})")
    else:
        span = prediction.span
        assert command[span.start:span.end] == span.text
        print(f"  {parameter!r}: {span.text!r} at [{span.start}, {span.end}) "
              f"(p={prediction.start_prob:.2f})")

# ---------------------------------------------------------------------------
# 4. Value scoring: blended word/char/lexical similarity
# ---------------------------------------------------------------------------
print("\nvalue scores for the mention 'a couple of us':")
for value in ("1 person", "2 people", "4 people"):
    score = net_value_score(bundle.value, "a couple of us", value)
    print(f"  vs {value!r:<10} word={score.word:.2f} char={score.char:.2f} "
          f"lex={score.lex} net={score.net:.3f}")
print(f"\nbundle provenance: {bundle.provenance}")
