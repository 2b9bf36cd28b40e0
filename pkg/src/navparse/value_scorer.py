"""Mention-to-domain-value scoring for closed parameters.

Three signals are averaged into the net score: a word-level BiLSTM
similarity (own recurrent weights, word embeddings shared with the
action scorer), a character-level similarity (per-word char LSTM, then a
BiLSTM over the word vectors), and a lexical pair of normalized edit
similarity plus the fraction of value words present in the mention. The
two lexical components are collapsed by their mean before the three-way
average; a four-way variant treating them as separate addends can be
switched on per scorer.

Training mirrors the action scorer: hinge ranking of the gold value over
values sampled from the same domain.
"""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .action_scorer import RANKING_MARGIN, Vocabulary
from .autodiff import Adam, Tensor, no_grad
from .checkpoints import load_checkpoint, save_checkpoint
from .dataset import Example
from .recurrent import LSTMWeights, bilstm_encode, lstm_final_state
from .schema import SiteSchema
from .textnorm import levenshtein, normalize_text, whitespace_words, word_tokens

logger = logging.getLogger(__name__)

MAX_WORD_CHARS = 32
MAX_TEXT_WORDS = 64

CHAR_PAD = "\x00"
CHAR_OOV = "\x01"


@dataclass(frozen=True)
class CharVocabulary:
    """Printable characters plus padding and out-of-vocabulary slots."""

    chars: tuple[str, ...] = (CHAR_PAD, CHAR_OOV, *sorted(string.printable))

    def __post_init__(self):
        object.__setattr__(self, "_index",
                           {ch: i for i, ch in enumerate(self.chars)})

    def __len__(self) -> int:
        return len(self.chars)

    def encode_word(self, word: str) -> list[int]:
        index = self._index
        oov = index[CHAR_OOV]
        return [index.get(ch, oov) for ch in word[:MAX_WORD_CHARS]]


@dataclass
class ValueScorerParameters:
    vocab: Vocabulary
    dim: int
    e_w: Tensor                  # shared object with the action scorer while training
    word_fw: LSTMWeights         # word-level BiLSTM, not shared
    word_bw: LSTMWeights
    char_vocab: CharVocabulary
    e_c: Tensor                  # (|chars|, dim)
    char_rnn: LSTMWeights        # per-word character LSTM
    cw_fw: LSTMWeights           # BiLSTM over char-derived word vectors
    cw_bw: LSTMWeights
    four_way_lexical: bool = False

    @classmethod
    def create(cls, rng: np.random.Generator, vocab: Vocabulary, dim: int,
               e_w: Tensor | None = None,
               four_way_lexical: bool = False) -> "ValueScorerParameters":
        char_vocab = CharVocabulary()
        return cls(
            vocab=vocab,
            dim=dim,
            e_w=e_w if e_w is not None else ad.glorot(rng, len(vocab), dim),
            word_fw=LSTMWeights.create(rng, dim, dim),
            word_bw=LSTMWeights.create(rng, dim, dim),
            char_vocab=char_vocab,
            e_c=ad.glorot(rng, len(char_vocab), dim),
            char_rnn=LSTMWeights.create(rng, dim, dim),
            cw_fw=LSTMWeights.create(rng, dim, dim),
            cw_bw=LSTMWeights.create(rng, dim, dim),
            four_way_lexical=four_way_lexical,
        )

    def trainable(self) -> list[Tensor]:
        return [self.e_w, *self.word_fw.tensors(), *self.word_bw.tensors(),
                self.e_c, *self.char_rnn.tensors(), *self.cw_fw.tensors(),
                *self.cw_bw.tensors()]

    def weight_matrices(self) -> list[Tensor]:
        return [self.e_w, self.word_fw.wx, self.word_fw.wh,
                self.word_bw.wx, self.word_bw.wh, self.e_c,
                self.char_rnn.wx, self.char_rnn.wh,
                self.cw_fw.wx, self.cw_fw.wh, self.cw_bw.wx, self.cw_bw.wh]


@dataclass(frozen=True)
class ValueScore:
    """Component and net similarities for one (mention, value) pair."""

    word: float
    char: float
    lex: tuple[float, float]     # (fuzzy, value_match)
    net: float


@dataclass(frozen=True)
class ValueRecord:
    """One closed-domain training/validation record."""

    mention: str
    parameter: str
    gold_value: str
    domain: tuple[str, ...]


def _texts_to_words(texts: list[str]) -> list[list[str]]:
    word_lists = []
    for text in texts:
        words = word_tokens(text)
        if not words:
            raise ValueError(f"empty token sequence for text {text!r}")
        if len(words) > MAX_TEXT_WORDS:
            logger.warning("truncating %d-word text to %d words",
                           len(words), MAX_TEXT_WORDS)
            words = words[:MAX_TEXT_WORDS]
        word_lists.append(words)
    return word_lists


def encode_word_level(params: ValueScorerParameters, texts: list[str], *,
                      training: bool = False, dropout: float = 0.0,
                      rng: np.random.Generator | None = None) -> Tensor:
    """Word-level representations via the scorer's own BiLSTM, (N, 2*dim)."""
    word_lists = _texts_to_words(texts)
    longest = max(len(words) for words in word_lists)
    idx = np.zeros((len(texts), longest), dtype=np.int64)
    mask = np.zeros((len(texts), longest))
    for row, words in enumerate(word_lists):
        idx[row, :len(words)] = params.vocab.encode_tokens(words)
        mask[row, :len(words)] = 1.0
    steps = [ad.index_rows(params.e_w, idx[:, t]) for t in range(longest)]
    encoded = bilstm_encode(params.word_fw, params.word_bw, steps, mask)
    return ad.dropout(encoded, dropout, rng, training)


def encode_char_level(params: ValueScorerParameters, texts: list[str], *,
                      training: bool = False, dropout: float = 0.0,
                      rng: np.random.Generator | None = None) -> Tensor:
    """Character-derived representations, (N, 2*dim).

    Every word of every text runs through the shared character LSTM in one
    flattened batch; the resulting word vectors are regrouped per text and
    composed with a BiLSTM.
    """
    word_lists = _texts_to_words(texts)
    flat_words: list[list[int]] = []
    for words in word_lists:
        for word in words:
            flat_words.append(params.char_vocab.encode_word(word))
    max_chars = max(len(chars) for chars in flat_words)
    cidx = np.zeros((len(flat_words), max_chars), dtype=np.int64)
    cmask = np.zeros((len(flat_words), max_chars))
    for row, chars in enumerate(flat_words):
        cidx[row, :len(chars)] = chars
        cmask[row, :len(chars)] = 1.0
    char_steps = [ad.index_rows(params.e_c, cidx[:, t])
                  for t in range(max_chars)]
    word_vectors = lstm_final_state(params.char_rnn, char_steps, cmask)
    zero_row = len(flat_words)
    padded = ad.concat([word_vectors, Tensor(np.zeros((1, params.dim)))],
                       axis=0)
    longest = max(len(words) for words in word_lists)
    widx = np.full((len(texts), longest), zero_row, dtype=np.int64)
    wmask = np.zeros((len(texts), longest))
    cursor = 0
    for row, words in enumerate(word_lists):
        widx[row, :len(words)] = range(cursor, cursor + len(words))
        wmask[row, :len(words)] = 1.0
        cursor += len(words)
    steps = [ad.index_rows(padded, widx[:, t]) for t in range(longest)]
    encoded = bilstm_encode(params.cw_fw, params.cw_bw, steps, wmask)
    return ad.dropout(encoded, dropout, rng, training)


def _rescaled_cosine(a: Tensor, b: Tensor) -> Tensor:
    return ad.mul(ad.add(ad.cosine_similarity(a, b), 1.0), 0.5)


def word_similarity(params: ValueScorerParameters, mention: str,
                    value: str) -> float:
    """Word-level semantic similarity in [0, 1]."""
    with no_grad():
        pair = encode_word_level(params, [mention, value])
        score = _rescaled_cosine(pair[0, :], pair[1, :])
    return score.item()


def char_similarity(params: ValueScorerParameters, mention: str,
                    value: str) -> float:
    """Character-level semantic similarity in [0, 1]."""
    with no_grad():
        pair = encode_char_level(params, [mention, value])
        score = _rescaled_cosine(pair[0, :], pair[1, :])
    return score.item()


def lexical_similarity(mention: str, value: str) -> tuple[float, float]:
    """(fuzzy, value_match) on canonically normalized lowercase text.

    fuzzy is 1 - edit_distance / max(len); value_match is the fraction of
    the value's words that appear among the mention's words (set
    semantics), so it is deliberately directional.
    """
    m = normalize_text(mention)
    v = normalize_text(value)
    if not m or not v:
        raise ValueError("lexical similarity needs non-empty strings")
    fuzzy = 1.0 - levenshtein(m, v) / max(len(m), len(v))
    value_words = set(whitespace_words(value))
    mention_words = set(whitespace_words(mention))
    value_match = len(value_words & mention_words) / len(value_words)
    return fuzzy, value_match


def _collapse_lexical(fuzzy: float, value_match: float,
                      four_way: bool) -> tuple[float, float]:
    """Return (lexical contribution, denominator share) for the net mean."""
    if four_way:
        return fuzzy + value_match, 4.0
    return (fuzzy + value_match) / 2.0, 3.0


def net_value_score(params: ValueScorerParameters, mention: str,
                    value: str) -> ValueScore:
    """Mean of word, character and lexical similarities."""
    word = word_similarity(params, mention, value)
    char = char_similarity(params, mention, value)
    fuzzy, value_match = lexical_similarity(mention, value)
    lex_sum, denom = _collapse_lexical(fuzzy, value_match,
                                       params.four_way_lexical)
    net = (word + char + lex_sum) / denom
    return ValueScore(word=word, char=char, lex=(fuzzy, value_match), net=net)


def _batched_net_scores(params: ValueScorerParameters,
                        pairs: list[tuple[str, str]], *,
                        training: bool = False, dropout: float = 0.0,
                        rng: np.random.Generator | None = None) -> Tensor:
    """Net scores for (mention, value) pairs as one differentiable batch."""
    texts: dict[str, int] = {}
    for mention, value in pairs:
        texts.setdefault(mention, len(texts))
        texts.setdefault(value, len(texts))
    ordered = list(texts)
    w_enc = encode_word_level(params, ordered, training=training,
                              dropout=dropout, rng=rng)
    c_enc = encode_char_level(params, ordered, training=training,
                              dropout=dropout, rng=rng)
    left = np.asarray([texts[m] for m, _ in pairs], dtype=np.int64)
    right = np.asarray([texts[v] for _, v in pairs], dtype=np.int64)
    s_word = _rescaled_cosine(ad.index_rows(w_enc, left),
                              ad.index_rows(w_enc, right))
    s_char = _rescaled_cosine(ad.index_rows(c_enc, left),
                              ad.index_rows(c_enc, right))
    lex = np.zeros(len(pairs))
    denom = 4.0 if params.four_way_lexical else 3.0
    for i, (mention, value) in enumerate(pairs):
        fuzzy, value_match = lexical_similarity(mention, value)
        lex[i], _ = _collapse_lexical(fuzzy, value_match,
                                      params.four_way_lexical)
    return ad.mul(ad.add(ad.add(s_word, s_char), lex), 1.0 / denom)


def value_ranking_loss(params: ValueScorerParameters, mention: str,
                       positive_value: str,
                       negative_values: list[str], *,
                       training: bool = False, dropout: float = 0.0,
                       rng: np.random.Generator | None = None) -> Tensor:
    """Hinge ranking loss of the gold value over sampled alternatives."""
    if not negative_values:
        logger.warning("no negative values for mention %r; loss is 0", mention)
        return Tensor(0.0)
    pairs = [(mention, positive_value)]
    pairs.extend((mention, value) for value in negative_values)
    nets = _batched_net_scores(params, pairs, training=training,
                               dropout=dropout, rng=rng)
    s_pos = nets[0]
    s_neg = nets[1:]
    return ad.sum_(ad.relu(ad.add(ad.add(s_neg, ad.mul(s_pos, -1.0)),
                                  RANKING_MARGIN)))


def derive_value_records(examples: list[Example],
                         schema: SiteSchema) -> list[ValueRecord]:
    """Closed-domain (mention, parameter, gold value, domain) records."""
    records = []
    for example in examples:
        action = schema.action(example.page_id, example.gold.action)
        for assignment in example.gold.assignments:
            spec = action.parameter(assignment.parameter)
            if not spec.is_closed:
                continue
            mention = example.mention_for(assignment.parameter)
            if mention is None:
                continue
            records.append(ValueRecord(
                mention=mention.text, parameter=spec.name,
                gold_value=assignment.value, domain=spec.domain))
    return records


def valid_top1_accuracy(params: ValueScorerParameters,
                        records: list[ValueRecord]) -> float:
    """Fraction of records whose domain argmax equals the gold value."""
    if not records:
        raise ValueError("empty validation set")
    pairs = []
    bounds = []
    for record in records:
        start = len(pairs)
        pairs.extend((record.mention, value) for value in record.domain)
        bounds.append((start, len(pairs)))
    with no_grad():
        nets = np.concatenate([
            _batched_net_scores(params, pairs[i:i + 512]).data
            for i in range(0, len(pairs), 512)])
    correct = 0
    for record, (start, end) in zip(records, bounds):
        pick = record.domain[int(np.argmax(nets[start:end]))]
        if normalize_text(pick) == normalize_text(record.gold_value):
            correct += 1
    return correct / len(records)


def train_value_scorer(params: ValueScorerParameters,
                       train: list[ValueRecord], valid: list[ValueRecord],
                       config) -> tuple[ValueScorerParameters, dict]:
    """Minimize the value ranking loss; keep the best-valid epoch."""
    if not train:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.rng_seed + 1)
    usable = []
    skipped = 0
    for record in train:
        gold_key = normalize_text(record.gold_value)
        others = [v for v in record.domain if normalize_text(v) != gold_key]
        if not others:
            skipped += 1
            continue
        usable.append((record, others))
    if skipped:
        logger.info("value scorer: %d records with singleton domains "
                    "contribute no negatives", skipped)
    if not usable:
        raise ValueError("no trainable records: all domains are singletons")
    optimizer = Adam(params.trainable(), lr=config.learning_rate)
    history = {"component": "value", "epochs": [],
               "skipped_singleton_domain": skipped}
    best_acc = -1.0
    best_state = None
    best_epoch = -1
    for epoch in range(config.epochs_value):
        order = rng.permutation(len(usable))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = [usable[i] for i in order[start:start + config.batch_size]]
            pairs = []
            pos_rows = []
            neg_rows = []
            for record, others in chunk:
                take = min(config.n_negatives, len(others))
                picks = rng.choice(len(others), size=take, replace=False)
                pos_rows.append(len(pairs))
                pairs.append((record.mention, record.gold_value))
                for i in picks:
                    neg_rows.append((pos_rows[-1], len(pairs)))
                    pairs.append((record.mention, others[int(i)]))
            nets = _batched_net_scores(params, pairs, training=True,
                                       dropout=config.dropout, rng=rng)
            pos = ad.index_rows(nets, np.asarray([p for p, _ in neg_rows]))
            neg = ad.index_rows(nets, np.asarray([n for _, n in neg_rows]))
            hinge = ad.relu(ad.add(ad.add(neg, ad.mul(pos, -1.0)),
                                   RANKING_MARGIN))
            loss = ad.mul(ad.sum_(hinge), 1.0 / len(chunk))
            loss = ad.add(loss, ad.l2_penalty(params.weight_matrices(),
                                              config.l2_coefficient))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(chunk)
        train_loss = total_loss / len(usable)
        acc = valid_top1_accuracy(params, valid)
        history["epochs"].append(
            {"epoch": epoch, "train_loss": train_loss, "valid_top1": acc})
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_state = [t.data.copy() for t in params.trainable()]
    if best_state is not None:
        for tensor, data in zip(params.trainable(), best_state):
            tensor.data = data
    history["best_epoch"] = best_epoch
    return params, history


def save_value_scorer(params: ValueScorerParameters,
                      directory: str | Path) -> None:
    save_checkpoint(
        directory,
        metadata={"kind": "value_scorer", "dim": params.dim,
                  "vocab": list(params.vocab.tokens),
                  "four_way_lexical": params.four_way_lexical},
        arrays={
            "e_w": params.e_w.data,
            "word_fw_wx": params.word_fw.wx.data,
            "word_fw_wh": params.word_fw.wh.data,
            "word_fw_b": params.word_fw.b.data,
            "word_bw_wx": params.word_bw.wx.data,
            "word_bw_wh": params.word_bw.wh.data,
            "word_bw_b": params.word_bw.b.data,
            "e_c": params.e_c.data,
            "char_wx": params.char_rnn.wx.data,
            "char_wh": params.char_rnn.wh.data,
            "char_b": params.char_rnn.b.data,
            "cw_fw_wx": params.cw_fw.wx.data, "cw_fw_wh": params.cw_fw.wh.data,
            "cw_fw_b": params.cw_fw.b.data,
            "cw_bw_wx": params.cw_bw.wx.data, "cw_bw_wh": params.cw_bw.wh.data,
            "cw_bw_b": params.cw_bw.b.data,
        })
    (Path(directory) / "char_vocab.json").write_text(
        json.dumps(list(params.char_vocab.chars)) + "\n", encoding="utf-8")


def load_value_scorer(directory: str | Path) -> ValueScorerParameters:
    metadata, arrays = load_checkpoint(directory)
    if metadata.get("kind") != "value_scorer":
        raise ValueError(f"{directory} is not a value scorer checkpoint")
    chars = json.loads(
        (Path(directory) / "char_vocab.json").read_text(encoding="utf-8"))

    def trainable(name):
        return Tensor(arrays[name], requires_grad=True)

    def lstm(prefix):
        return LSTMWeights(wx=trainable(f"{prefix}_wx"),
                           wh=trainable(f"{prefix}_wh"),
                           b=trainable(f"{prefix}_b"))

    return ValueScorerParameters(
        vocab=Vocabulary(tokens=tuple(metadata["vocab"])),
        dim=int(metadata["dim"]),
        e_w=trainable("e_w"),
        word_fw=lstm("word_fw"),
        word_bw=lstm("word_bw"),
        char_vocab=CharVocabulary(chars=tuple(chars)),
        e_c=trainable("e_c"),
        char_rnn=lstm("char"),
        cw_fw=lstm("cw_fw"),
        cw_bw=lstm("cw_bw"),
        four_way_lexical=bool(metadata["four_way_lexical"]),
    )
