"""Parameter mention extraction as span prediction over a packed pair.

The parameter name and the command are packed into one sequence,
"[CLS] parameter [SEP] command [SEP]", and run through a bidirectional
contextual encoder. Two learned vectors score every token as mention
start and mention end; probabilities are softmax-normalized over the
command tokens plus [CLS], and predicting [CLS] as the start means the
parameter is not mentioned at all. Predicted subword spans are mapped
back to character offsets of the original command, so the returned text
is always an exact substring.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor, no_grad
from .checkpoints import load_checkpoint, save_checkpoint
from .dataset import Example, MentionSpan
from .schema import SiteSchema
from .textnorm import normalize_text, token_spans
from .transformer import EncoderConfig, EncoderWeights, encode

logger = logging.getLogger(__name__)

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = (PAD, UNK, CLS, SEP)

DEFAULT_SPAN_MAX_LEN = 20


@dataclass(frozen=True)
class SubwordTokenizer:
    """Greedy longest-match wordpiece tokenizer built from a text corpus.

    Whole words seen at build time stay single pieces; unseen words fall
    back to character pieces with "##" continuations, and words containing
    unseen characters become [UNK].
    """

    pieces: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index",
                           {piece: i for i, piece in enumerate(self.pieces)})

    @classmethod
    def build(cls, texts) -> "SubwordTokenizer":
        words: set[str] = set()
        for text in texts:
            for _, _, token in token_spans(text):
                words.add(normalize_text(token))
        words.discard("")
        chars = {ch for word in words for ch in word}
        vocab = set(words)
        vocab.update(chars)
        vocab.update("##" + ch for ch in chars)
        vocab.difference_update(SPECIALS)
        return cls(pieces=(*SPECIALS, *sorted(vocab)))

    def __len__(self) -> int:
        return len(self.pieces)

    def piece_id(self, piece: str) -> int:
        return self._index[piece]

    def _wordpieces(self, word: str) -> list[str] | None:
        index = self._index
        out = []
        i = 0
        while i < len(word):
            end = len(word)
            found = None
            while end > i:
                piece = word[i:end] if i == 0 else "##" + word[i:end]
                if piece in index:
                    found = piece
                    break
                end -= 1
            if found is None:
                return None
            out.append(found)
            i = end
        return out

    def tokenize(self, text: str) -> list[tuple[int, int, int]]:
        """(piece_id, char_start, char_end) triples over the raw text."""
        out = []
        for start, end, token in token_spans(text):
            norm = normalize_text(token)
            pieces = self._wordpieces(norm) if norm else None
            if pieces is None:
                out.append((self._index[UNK], start, end))
                continue
            if len(norm) != end - start:
                # Normalization changed the length; keep whole-word offsets.
                out.extend((self._index[p], start, end) for p in pieces)
                continue
            cursor = start
            for piece in pieces:
                width = len(piece) - 2 if piece.startswith("##") else len(piece)
                out.append((self._index[piece], cursor, cursor + width))
                cursor += width
        return out


@dataclass
class SpanExtractorParameters:
    tokenizer: SubwordTokenizer
    config: EncoderConfig
    encoder: EncoderWeights
    start_vec: Tensor            # (hidden,)
    end_vec: Tensor              # (hidden,)
    span_max_len: int = DEFAULT_SPAN_MAX_LEN

    @classmethod
    def create(cls, rng: np.random.Generator, tokenizer: SubwordTokenizer,
               config: EncoderConfig,
               span_max_len: int = DEFAULT_SPAN_MAX_LEN
               ) -> "SpanExtractorParameters":
        scale = 0.02
        return cls(
            tokenizer=tokenizer,
            config=config,
            encoder=EncoderWeights.create(rng, config),
            start_vec=Tensor(rng.normal(0.0, scale, size=config.hidden),
                             requires_grad=True),
            end_vec=Tensor(rng.normal(0.0, scale, size=config.hidden),
                           requires_grad=True),
            span_max_len=span_max_len,
        )

    def trainable(self) -> list[Tensor]:
        return [*self.encoder.tensors(), self.start_vec, self.end_vec]

    def weight_matrices(self) -> list[Tensor]:
        return [*self.encoder.weight_matrices(), self.start_vec, self.end_vec]


@dataclass(frozen=True)
class MentionPrediction:
    """Extracted span plus its start/end probabilities (None span = no mention)."""

    span: MentionSpan | None
    start_prob: float
    end_prob: float


@dataclass(frozen=True)
class MentionRecord:
    """One span-training record; span is None when the parameter is absent."""

    parameter: str
    command: str
    span: tuple[int, int] | None


@dataclass(frozen=True)
class _Packed:
    token_ids: np.ndarray        # (seq,)
    segment_ids: np.ndarray      # (seq,)
    cmd_positions: tuple[int, ...]
    cmd_char_spans: tuple[tuple[int, int], ...]


def pack_pair(params: SpanExtractorParameters, parameter_name: str,
              command: str) -> _Packed:
    """Build "[CLS] parameter [SEP] command [SEP]" ids with char alignment.

    Commands too long for the encoder lose trailing tokens, with a warning.
    """
    tok = params.tokenizer
    param_tokens = [pid for pid, _, _ in tok.tokenize(parameter_name)]
    cmd_tokens = tok.tokenize(command)
    budget = params.config.max_seq_len - len(param_tokens) - 3
    if budget <= 0:
        raise ValueError(f"parameter name {parameter_name!r} leaves no room "
                         f"for command tokens")
    if len(cmd_tokens) > budget:
        logger.warning("truncating command from %d to %d tokens",
                       len(cmd_tokens), budget)
        cmd_tokens = cmd_tokens[:budget]
    ids = [tok.piece_id(CLS), *param_tokens, tok.piece_id(SEP)]
    segments = [0] * len(ids)
    cmd_positions = []
    cmd_char_spans = []
    for pid, start, end in cmd_tokens:
        cmd_positions.append(len(ids))
        cmd_char_spans.append((start, end))
        ids.append(pid)
        segments.append(1)
    ids.append(tok.piece_id(SEP))
    segments.append(1)
    return _Packed(
        token_ids=np.asarray(ids, dtype=np.int64),
        segment_ids=np.asarray(segments, dtype=np.int64),
        cmd_positions=tuple(cmd_positions),
        cmd_char_spans=tuple(cmd_char_spans),
    )


def _forward_log_probs(params: SpanExtractorParameters,
                       packed: list[_Packed], *, training: bool = False,
                       rng: np.random.Generator | None = None
                       ) -> tuple[Tensor, Tensor, np.ndarray]:
    """Start/end log-probabilities over candidates for a padded batch.

    Candidates are the command tokens plus [CLS]; everything else is
    masked out of both softmaxes. Returns (start_lp, end_lp, candidate_mask).
    """
    batch = len(packed)
    longest = max(p.token_ids.size for p in packed)
    token_ids = np.zeros((batch, longest), dtype=np.int64)
    segment_ids = np.zeros((batch, longest), dtype=np.int64)
    attention = np.zeros((batch, longest))
    candidates = np.zeros((batch, longest))
    for row, p in enumerate(packed):
        n = p.token_ids.size
        token_ids[row, :n] = p.token_ids
        segment_ids[row, :n] = p.segment_ids
        attention[row, :n] = 1.0
        candidates[row, 0] = 1.0
        for pos in p.cmd_positions:
            candidates[row, pos] = 1.0
    hidden = encode(params.encoder, params.config, token_ids, segment_ids,
                    attention, training=training, rng=rng)
    start_logits = ad.matmul(hidden, ad.reshape(params.start_vec, (-1, 1)))
    end_logits = ad.matmul(hidden, ad.reshape(params.end_vec, (-1, 1)))
    start_lp = ad.log_softmax(ad.reshape(start_logits, (batch, longest)),
                              axis=-1, mask=candidates)
    end_lp = ad.log_softmax(ad.reshape(end_logits, (batch, longest)),
                            axis=-1, mask=candidates)
    return start_lp, end_lp, candidates


def _decode_row(params: SpanExtractorParameters, packed: _Packed,
                start_lp: np.ndarray, end_lp: np.ndarray,
                command: str, parameter_name: str) -> MentionPrediction:
    positions = [0, *packed.cmd_positions]
    start_pick = max(positions, key=lambda pos: start_lp[pos])
    if start_pick == 0:
        return MentionPrediction(span=None,
                                 start_prob=float(np.exp(start_lp[0])),
                                 end_prob=float(np.exp(end_lp[0])))
    where = packed.cmd_positions.index(start_pick)
    window = packed.cmd_positions[where:where + params.span_max_len + 1]
    end_pick = max(window, key=lambda pos: end_lp[pos])
    char_start = packed.cmd_char_spans[where][0]
    char_end = packed.cmd_char_spans[
        packed.cmd_positions.index(end_pick)][1]
    text = command[char_start:char_end]
    return MentionPrediction(
        span=MentionSpan(parameter=parameter_name, start=char_start,
                         end=char_end, text=text),
        start_prob=float(np.exp(start_lp[start_pick])),
        end_prob=float(np.exp(end_lp[end_pick])),
    )


def extract_mention(params: SpanExtractorParameters, parameter_name: str,
                    command: str) -> MentionPrediction:
    """Predict the command span mentioning the parameter, or no mention."""
    if not command.strip():
        raise ValueError("command must be non-empty")
    packed = pack_pair(params, parameter_name, command)
    with no_grad():
        start_lp, end_lp, _ = _forward_log_probs(params, [packed])
    return _decode_row(params, packed, start_lp.data[0], end_lp.data[0],
                       command, parameter_name)


def _gold_token_range(packed: _Packed, span: tuple[int, int] | None
                      ) -> tuple[int, int, bool] | None:
    """Map a gold char span to (start_pos, end_pos, snapped) in the packing.

    No-mention records map to the [CLS] position. Returns None when the
    span fell entirely outside the (possibly truncated) command tokens.
    """
    if span is None:
        return 0, 0, False
    s, e = span
    covering = [i for i, (cs, ce) in enumerate(packed.cmd_char_spans)
                if cs < e and ce > s]
    if not covering:
        return None
    first, last = covering[0], covering[-1]
    snapped = (packed.cmd_char_spans[first][0] != s
               or packed.cmd_char_spans[last][1] != e)
    return packed.cmd_positions[first], packed.cmd_positions[last], snapped


def derive_mention_records(examples: list[Example],
                           schema: SiteSchema) -> list[MentionRecord]:
    """One record per gold mention, plus a no-mention record for every
    parameter of the gold action that the command does not express."""
    records = []
    for example in examples:
        action = schema.action(example.page_id, example.gold.action)
        mentioned = set()
        for span in example.mentions:
            mentioned.add(normalize_text(span.parameter))
            records.append(MentionRecord(
                parameter=span.parameter, command=example.command,
                span=(span.start, span.end)))
        for spec in action.parameters:
            if normalize_text(spec.name) not in mentioned:
                records.append(MentionRecord(
                    parameter=spec.name, command=example.command, span=None))
    return records


def exact_span_accuracy(params: SpanExtractorParameters,
                        records: list[MentionRecord],
                        batch_size: int = 64) -> float:
    """Fraction of records predicted exactly (span equality or both absent)."""
    if not records:
        raise ValueError("empty validation set")
    correct = 0
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        packed = [pack_pair(params, r.parameter, r.command) for r in chunk]
        with no_grad():
            start_lp, end_lp, _ = _forward_log_probs(params, packed)
        for row, (record, p) in enumerate(zip(chunk, packed)):
            pred = _decode_row(params, p, start_lp.data[row],
                               end_lp.data[row], record.command,
                               record.parameter)
            if record.span is None:
                correct += pred.span is None
            else:
                correct += (pred.span is not None
                            and (pred.span.start, pred.span.end) == record.span)
    return correct / len(records)


def train_mention_extractor(params: SpanExtractorParameters,
                            train: list[MentionRecord],
                            valid: list[MentionRecord],
                            config) -> tuple[SpanExtractorParameters, dict]:
    """Fine-tune encoder and start/end vectors on span log-likelihood."""
    if not train:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.rng_seed + 2)
    prepared = []
    snapped = 0
    dropped = 0
    for record in train:
        packed = pack_pair(params, record.parameter, record.command)
        target = _gold_token_range(packed, record.span)
        if target is None:
            dropped += 1
            continue
        start_pos, end_pos, was_snapped = target
        snapped += was_snapped
        prepared.append((packed, start_pos, end_pos))
    if snapped:
        logger.info("mention extractor: %d gold spans snapped to subword "
                    "boundaries", snapped)
    if dropped:
        logger.warning("mention extractor: %d gold spans lost to truncation",
                       dropped)
    if not prepared:
        raise ValueError("no trainable records after packing")
    lr = getattr(config, "mention_learning_rate", None) or config.learning_rate
    optimizer = Adam(params.trainable(), lr=lr)
    history = {"component": "mention", "epochs": [],
               "snapped_spans": snapped, "dropped_records": dropped}
    best_acc = -1.0
    best_state = None
    best_epoch = -1
    for epoch in range(config.epochs_mention):
        order = rng.permutation(len(prepared))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = [prepared[i] for i in order[start:start + config.batch_size]]
            packed = [item[0] for item in chunk]
            gold_start = np.asarray([item[1] for item in chunk])
            gold_end = np.asarray([item[2] for item in chunk])
            start_lp, end_lp, _ = _forward_log_probs(params, packed,
                                                     training=True, rng=rng)
            rows = np.arange(len(chunk))
            picked = ad.add(start_lp[rows, gold_start],
                            end_lp[rows, gold_end])
            loss = ad.mul(ad.sum_(picked), -1.0 / len(chunk))
            loss = ad.add(loss, ad.l2_penalty(params.weight_matrices(),
                                              config.l2_coefficient))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(chunk)
        train_loss = total_loss / len(prepared)
        acc = exact_span_accuracy(params, valid)
        history["epochs"].append(
            {"epoch": epoch, "train_loss": train_loss,
             "valid_exact_span": acc})
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_state = [t.data.copy() for t in params.trainable()]
    if best_state is not None:
        for tensor, data in zip(params.trainable(), best_state):
            tensor.data = data
    history["best_epoch"] = best_epoch
    return params, history


def save_mention_extractor(params: SpanExtractorParameters,
                           directory: str | Path) -> None:
    config = params.config
    arrays = {
        "tok": params.encoder.tok.data,
        "pos": params.encoder.pos.data,
        "seg": params.encoder.seg.data,
        "ln_emb_g": params.encoder.ln_emb_g.data,
        "ln_emb_b": params.encoder.ln_emb_b.data,
        "start_vec": params.start_vec.data,
        "end_vec": params.end_vec.data,
    }
    for i, layer in enumerate(params.encoder.layers):
        for name, tensor in vars(layer).items():
            arrays[f"layer{i}_{name}"] = tensor.data
    save_checkpoint(
        directory,
        metadata={
            "kind": "mention_extractor",
            "max_seq_len": config.max_seq_len,
            "span_max_len": params.span_max_len,
            "encoder": {"hidden": config.hidden, "layers": config.layers,
                        "heads": config.heads, "ffn": config.ffn,
                        "dropout": config.dropout,
                        "vocab_size": config.vocab_size},
        },
        arrays=arrays)
    (Path(directory) / "tokenizer.json").write_text(
        json.dumps(list(params.tokenizer.pieces)) + "\n", encoding="utf-8")


def load_mention_extractor(directory: str | Path) -> SpanExtractorParameters:
    metadata, arrays = load_checkpoint(directory)
    if metadata.get("kind") != "mention_extractor":
        raise ValueError(f"{directory} is not a mention extractor checkpoint")
    pieces = json.loads(
        (Path(directory) / "tokenizer.json").read_text(encoding="utf-8"))
    enc_meta = metadata["encoder"]
    config = EncoderConfig(
        vocab_size=int(enc_meta["vocab_size"]), hidden=int(enc_meta["hidden"]),
        layers=int(enc_meta["layers"]), heads=int(enc_meta["heads"]),
        ffn=int(enc_meta["ffn"]), max_seq_len=int(metadata["max_seq_len"]),
        dropout=float(enc_meta["dropout"]))

    def trainable(name):
        return Tensor(arrays[name], requires_grad=True)

    from .transformer import EncoderLayerWeights
    layers = []
    for i in range(config.layers):
        fields = {name: trainable(f"layer{i}_{name}")
                  for name in ("wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo",
                               "ln1_g", "ln1_b", "w1", "b1", "w2", "b2",
                               "ln2_g", "ln2_b")}
        layers.append(EncoderLayerWeights(**fields))
    encoder = EncoderWeights(
        tok=trainable("tok"), pos=trainable("pos"), seg=trainable("seg"),
        ln_emb_g=trainable("ln_emb_g"), ln_emb_b=trainable("ln_emb_b"),
        layers=layers)
    return SpanExtractorParameters(
        tokenizer=SubwordTokenizer(pieces=tuple(pieces)),
        config=config,
        encoder=encoder,
        start_vec=trainable("start_vec"),
        end_vec=trainable("end_vec"),
        span_max_len=int(metadata["span_max_len"]),
    )
