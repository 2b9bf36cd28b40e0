"""Dual-encoder action scoring.

A command and each candidate pair (action name, parameter names) are
embedded into the same space: both sides run a shared BiLSTM over learned
word embeddings; the candidate side additionally combines its action-name
vector with the mean of its parameter-name vectors through a tanh
feed-forward layer. The score is cosine similarity rescaled to [0, 1],
and training pushes each gold pair at least one margin unit above
same-page alternatives via a hinge ranking loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor, no_grad
from .checkpoints import load_checkpoint, save_checkpoint
from .dataset import Example
from .recurrent import LSTMWeights, bilstm_encode
from .schema import ActionSchema, SiteSchema, actions_of
from .textnorm import normalize_text, word_tokens

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
OOV_TOKEN = "<oov>"

RANKING_MARGIN = 1.0


@dataclass(frozen=True)
class Vocabulary:
    """Word-token vocabulary with reserved padding and out-of-vocabulary slots."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index",
                           {token: i for i, token in enumerate(self.tokens)})

    @classmethod
    def build(cls, texts) -> "Vocabulary":
        seen = set()
        for text in texts:
            seen.update(word_tokens(text))
        seen.discard(PAD_TOKEN)
        seen.discard(OOV_TOKEN)
        return cls(tokens=(PAD_TOKEN, OOV_TOKEN, *sorted(seen)))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return self.encode_tokens(word_tokens(text))

    def encode_tokens(self, tokens: list[str]) -> list[int]:
        index = self._index
        oov = index[OOV_TOKEN]
        return [index.get(token, oov) for token in tokens]


def build_vocabulary(schema: SiteSchema, examples: list[Example]) -> Vocabulary:
    """Vocabulary over training commands plus every schema surface string."""
    texts = [example.command for example in examples]
    for actions in schema.pages.values():
        for action in actions:
            texts.append(action.name)
            for spec in action.parameters:
                texts.append(spec.name)
                texts.extend(spec.domain)
    return Vocabulary.build(texts)


@dataclass
class ActionScorerParameters:
    vocab: Vocabulary
    dim: int
    e_w: Tensor            # (|V|, dim) word embeddings
    fw: LSTMWeights        # shared across command, action-name and parameter text
    bw: LSTMWeights
    w_a: Tensor            # (4*dim, 2*dim) pair combiner
    b_a: Tensor            # (2*dim,)

    @classmethod
    def create(cls, rng: np.random.Generator, vocab: Vocabulary,
               dim: int) -> "ActionScorerParameters":
        if len(vocab) < 2:
            raise ValueError("vocabulary must hold at least pad and oov tokens")
        return cls(
            vocab=vocab,
            dim=dim,
            e_w=ad.glorot(rng, len(vocab), dim),
            fw=LSTMWeights.create(rng, dim, dim),
            bw=LSTMWeights.create(rng, dim, dim),
            w_a=ad.glorot(rng, 4 * dim, 2 * dim),
            b_a=Tensor(np.zeros(2 * dim), requires_grad=True),
        )

    def trainable(self) -> list[Tensor]:
        return [self.e_w, *self.fw.tensors(), *self.bw.tensors(),
                self.w_a, self.b_a]

    def weight_matrices(self) -> list[Tensor]:
        """Tensors subject to the L2 penalty (biases excluded)."""
        return [self.e_w, self.fw.wx, self.fw.wh, self.bw.wx, self.bw.wh,
                self.w_a]


def encode_texts(params: ActionScorerParameters, texts: list[str], *,
                 training: bool = False, dropout: float = 0.0,
                 rng: np.random.Generator | None = None) -> Tensor:
    """BiLSTM-encode a batch of strings into (len(texts), 2*dim)."""
    token_ids = [params.vocab.encode(text) for text in texts]
    for text, ids in zip(texts, token_ids):
        if not ids:
            raise ValueError(f"empty token sequence for text {text!r}")
    longest = max(len(ids) for ids in token_ids)
    batch = len(texts)
    idx = np.zeros((batch, longest), dtype=np.int64)
    mask = np.zeros((batch, longest))
    for row, ids in enumerate(token_ids):
        idx[row, :len(ids)] = ids
        mask[row, :len(ids)] = 1.0
    steps = [ad.index_rows(params.e_w, idx[:, t]) for t in range(longest)]
    encoded = bilstm_encode(params.fw, params.bw, steps, mask)
    return ad.dropout(encoded, dropout, rng, training)


def encode_command(params: ActionScorerParameters, command: str, *,
                   training: bool = False, dropout: float = 0.0,
                   rng: np.random.Generator | None = None) -> Tensor:
    """Joint forward/backward representation of a command, shape (2*dim,)."""
    encoded = encode_texts(params, [command], training=training,
                           dropout=dropout, rng=rng)
    return encoded[0, :]

def encode_actions(params: ActionScorerParameters,
                   actions: list[ActionSchema], *,
                   training: bool = False, dropout: float = 0.0,
                   rng: np.random.Generator | None = None) -> Tensor:
    """Encode candidate pairs into (len(actions), 2*dim).

    Every action name and parameter name goes through one batched BiLSTM
    pass; an action with no parameters contributes a zero mean-parameter
    vector.
    """
    texts: list[str] = []
    name_idx: list[int] = []
    param_idx: list[list[int]] = []
    for action in actions:
        name_idx.append(len(texts))
        texts.append(action.name)
        rows = []
        for spec in action.parameters:
            rows.append(len(texts))
            texts.append(spec.name)
        param_idx.append(rows)
    encoded = encode_texts(params, texts, training=training, dropout=dropout,
                           rng=rng)
    zero_row = len(texts)
    padded = ad.concat([encoded, Tensor(np.zeros((1, 2 * params.dim)))], axis=0)
    widest = max((len(rows) for rows in param_idx), default=0)
    widest = max(widest, 1)
    gather = np.full((len(actions), widest), zero_row, dtype=np.int64)
    counts = np.ones((len(actions), 1))
    for row, rows in enumerate(param_idx):
        gather[row, :len(rows)] = rows
        counts[row, 0] = max(len(rows), 1)
    names = ad.index_rows(padded, np.asarray(name_idx, dtype=np.int64))
    param_mean = ad.mul(ad.sum_(ad.index_rows(padded, gather), axis=1),
                        1.0 / counts)
    combined = ad.concat([names, param_mean], axis=-1)
    return ad.tanh(ad.add(ad.matmul(combined, params.w_a), params.b_a))


def encode_action(params: ActionScorerParameters,
                  action: ActionSchema) -> Tensor:
    """Combined (name, parameters) representation, shape (2*dim,)."""
    return encode_actions(params, [action])[0, :]


def _rescaled_cosine(v_c: Tensor, v_ap: Tensor) -> Tensor:
    return ad.mul(ad.add(ad.cosine_similarity(v_c, v_ap), 1.0), 0.5)


def score_action(params: ActionScorerParameters, command: str,
                 action: ActionSchema) -> float:
    """Similarity of command intent and action, in [0, 1]."""
    with no_grad():
        score = _rescaled_cosine(encode_command(params, command),
                                 encode_action(params, action))
    return score.item()


def score_actions(params: ActionScorerParameters, command: str,
                  actions: list[ActionSchema]) -> np.ndarray:
    """Scores for every candidate action on a page, one batched pass."""
    with no_grad():
        v_c = encode_texts(params, [command])
        v_ap = encode_actions(params, actions)
        scores = _rescaled_cosine(v_c, v_ap)
    return scores.data.copy()


def action_ranking_loss(params: ActionScorerParameters, command: str,
                        positives: list[ActionSchema],
                        negatives: list[ActionSchema], *,
                        training: bool = False, dropout: float = 0.0,
                        rng: np.random.Generator | None = None) -> Tensor:
    """Hinge ranking loss summed over positive x negative score pairs."""
    if not positives:
        raise ValueError("at least one positive action is required")
    if not negatives:
        logger.warning("no negative actions for command %r; loss is 0", command)
        return Tensor(0.0)
    v_c = encode_command(params, command, training=training, dropout=dropout,
                         rng=rng)
    pos = encode_actions(params, positives, training=training,
                         dropout=dropout, rng=rng)
    neg = encode_actions(params, negatives, training=training,
                         dropout=dropout, rng=rng)
    s_pos = _rescaled_cosine(v_c, pos)   # (|positives|,)
    s_neg = _rescaled_cosine(v_c, neg)   # (|negatives|,)
    diff = ad.add(ad.add(ad.reshape(s_neg, (1, -1)),
                         ad.mul(ad.reshape(s_pos, (-1, 1)), -1.0)),
                  RANKING_MARGIN)
    return ad.sum_(ad.relu(diff))


def _batched_pair_loss(params: ActionScorerParameters, commands: list[str],
                       gold_actions: list[ActionSchema],
                       negative_actions: list[list[ActionSchema]],
                       dropout: float,
                       rng: np.random.Generator) -> Tensor:
    """Mean per-command ranking loss for one minibatch.

    Encodes each distinct action once; the per-command loss follows the
    same positive-vs-sampled-negatives hinge as action_ranking_loss.
    """
    unique: dict[tuple[str, str], int] = {}
    order: list[ActionSchema] = []
    for action in gold_actions:
        key = (action.page, normalize_text(action.name))
        if key not in unique:
            unique[key] = len(order)
            order.append(action)
    for groups in negative_actions:
        for action in groups:
            key = (action.page, normalize_text(action.name))
            if key not in unique:
                unique[key] = len(order)
                order.append(action)
    v_c = encode_texts(params, commands, training=True, dropout=dropout,
                       rng=rng)
    v_ap = encode_actions(params, order, training=True, dropout=dropout,
                          rng=rng)
    pos_rows, neg_rows, cmd_rows = [], [], []
    for i, (gold, negs) in enumerate(zip(gold_actions, negative_actions)):
        for neg in negs:
            cmd_rows.append(i)
            pos_rows.append(unique[(gold.page, normalize_text(gold.name))])
            neg_rows.append(unique[(neg.page, normalize_text(neg.name))])
    cmd = ad.index_rows(v_c, np.asarray(cmd_rows, dtype=np.int64))
    pos = ad.index_rows(v_ap, np.asarray(pos_rows, dtype=np.int64))
    neg = ad.index_rows(v_ap, np.asarray(neg_rows, dtype=np.int64))
    s_pos = _rescaled_cosine(cmd, pos)
    s_neg = _rescaled_cosine(cmd, neg)
    hinge = ad.relu(ad.add(ad.add(s_neg, ad.mul(s_pos, -1.0)), RANKING_MARGIN))
    return ad.mul(ad.sum_(hinge), 1.0 / len(commands))


def valid_action_accuracy(params: ActionScorerParameters,
                          examples: list[Example],
                          schema: SiteSchema) -> float:
    """Fraction of examples whose page-wise argmax action equals gold."""
    if not examples:
        raise ValueError("empty validation set")
    by_page: dict[str, list[Example]] = {}
    for example in examples:
        by_page.setdefault(example.page_id, []).append(example)
    correct = 0
    with no_grad():
        for page_id, group in by_page.items():
            actions = actions_of(schema, page_id)
            v_ap = encode_actions(params, actions)
            v_c = encode_texts(params, [ex.command for ex in group])
            # (batch, n_actions) cosine grid via broadcasting
            cos = ad.cosine_similarity(
                ad.reshape(v_c, (len(group), 1, 2 * params.dim)),
                ad.reshape(v_ap, (1, len(actions), 2 * params.dim)))
            best = np.argmax(cos.data, axis=1)
            for example, pick in zip(group, best):
                if normalize_text(actions[pick].name) == \
                        normalize_text(example.gold.action):
                    correct += 1
    return correct / len(examples)


def train_action_scorer(params: ActionScorerParameters,
                        train: list[Example], valid: list[Example],
                        schema: SiteSchema, config) -> tuple[
                            ActionScorerParameters, dict]:
    """Train with per-epoch negative resampling; keep the best-valid epoch.

    Returns the parameters (restored to the best epoch) and a history dict
    with per-epoch train loss and validation action accuracy.
    """
    if not train:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.rng_seed)
    items = []
    skipped = 0
    for example in train:
        page_actions = actions_of(schema, example.page_id)
        gold = schema.action(example.page_id, example.gold.action)
        others = [a for a in page_actions
                  if normalize_text(a.name) != normalize_text(gold.name)]
        if not others:
            skipped += 1
            continue
        items.append((example, gold, others))
    if skipped:
        logger.info("action scorer: %d training examples on single-action "
                    "pages contribute no negatives", skipped)
    if not items:
        raise ValueError("no trainable examples: every page has one action")
    optimizer = Adam(params.trainable(), lr=config.learning_rate)
    history = {"component": "action", "epochs": [],
               "skipped_single_action": skipped}
    best_acc = -1.0
    best_state = None
    best_epoch = -1
    for epoch in range(config.epochs_action):
        order = rng.permutation(len(items))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = [items[i] for i in order[start:start + config.batch_size]]
            commands = [item[0].command for item in chunk]
            golds = [item[1] for item in chunk]
            negatives = []
            for _, _, others in chunk:
                take = min(config.n_negatives, len(others))
                picks = rng.choice(len(others), size=take, replace=False)
                negatives.append([others[int(i)] for i in picks])
            loss = _batched_pair_loss(params, commands, golds, negatives,
                                      config.dropout, rng)
            loss = ad.add(loss, ad.l2_penalty(params.weight_matrices(),
                                              config.l2_coefficient))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(chunk)
        train_loss = total_loss / len(items)
        acc = valid_action_accuracy(params, valid, schema)
        history["epochs"].append(
            {"epoch": epoch, "train_loss": train_loss, "valid_a_acc": acc})
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_state = [t.data.copy() for t in params.trainable()]
    if best_state is not None:
        for tensor, data in zip(params.trainable(), best_state):
            tensor.data = data
    history["best_epoch"] = best_epoch
    return params, history


def clone_action_scorer(params: ActionScorerParameters
                        ) -> ActionScorerParameters:
    """Independent deep copy, used to freeze a selected checkpoint in memory."""

    def copy_of(tensor: Tensor) -> Tensor:
        return Tensor(tensor.data.copy(), requires_grad=True)

    def copy_lstm(weights: LSTMWeights) -> LSTMWeights:
        return LSTMWeights(wx=copy_of(weights.wx), wh=copy_of(weights.wh),
                           b=copy_of(weights.b))

    return ActionScorerParameters(
        vocab=params.vocab, dim=params.dim, e_w=copy_of(params.e_w),
        fw=copy_lstm(params.fw), bw=copy_lstm(params.bw),
        w_a=copy_of(params.w_a), b_a=copy_of(params.b_a))


def save_action_scorer(params: ActionScorerParameters,
                       directory: str | Path) -> None:
    save_checkpoint(
        directory,
        metadata={"kind": "action_scorer", "dim": params.dim,
                  "vocab": list(params.vocab.tokens)},
        arrays={
            "e_w": params.e_w.data,
            "fw_wx": params.fw.wx.data, "fw_wh": params.fw.wh.data,
            "fw_b": params.fw.b.data,
            "bw_wx": params.bw.wx.data, "bw_wh": params.bw.wh.data,
            "bw_b": params.bw.b.data,
            "w_a": params.w_a.data, "b_a": params.b_a.data,
        })


def load_action_scorer(directory: str | Path) -> ActionScorerParameters:
    metadata, arrays = load_checkpoint(directory)
    if metadata.get("kind") != "action_scorer":
        raise ValueError(f"{directory} is not an action scorer checkpoint")

    def trainable(name):
        return Tensor(arrays[name], requires_grad=True)

    return ActionScorerParameters(
        vocab=Vocabulary(tokens=tuple(metadata["vocab"])),
        dim=int(metadata["dim"]),
        e_w=trainable("e_w"),
        fw=LSTMWeights(wx=trainable("fw_wx"), wh=trainable("fw_wh"),
                       b=trainable("fw_b")),
        bw=LSTMWeights(wx=trainable("bw_wx"), wh=trainable("bw_wh"),
                       b=trainable("bw_b")),
        w_a=trainable("w_a"),
        b_a=trainable("b_a"),
    )
