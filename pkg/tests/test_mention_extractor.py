from __future__ import annotations

import logging

import numpy as np
import pytest

from navparse import mention_extractor as msc
from navparse.dataset import generate, split
from navparse.orchestrator import TrainingConfig
from navparse.toydata import toy_site
from navparse.transformer import EncoderConfig


def make_tokenizer(extra=()):
    texts = ["find a table for me and my friend at 7 pm",
             "show me italian food", "people", "time", "date", *extra]
    return msc.SubwordTokenizer.build(texts)


def fresh_params(rng, tokenizer=None, hidden=16, layers=1, heads=2, ffn=32,
                 max_seq_len=48):
    tokenizer = tokenizer or make_tokenizer()
    config = EncoderConfig(vocab_size=len(tokenizer), hidden=hidden,
                           layers=layers, heads=heads, ffn=ffn,
                           max_seq_len=max_seq_len, dropout=0.1)
    return msc.SpanExtractorParameters.create(rng, tokenizer, config)


# -- tokenizer ---------------------------------------------------------------

def test_known_words_stay_single_pieces():
    tok = make_tokenizer()
    pieces = tok.tokenize("find a table")
    assert [tok.pieces[pid] for pid, _, _ in pieces] == ["find", "a", "table"]
    for pid, start, end in pieces:
        assert "find a table"[start:end] == tok.pieces[pid]


def test_unseen_word_falls_back_to_char_pieces():
    tok = make_tokenizer()
    pieces = tok.tokenize("tale")   # unseen word, all chars seen
    names = [tok.pieces[pid] for pid, _, _ in pieces]
    assert names[0] == "t" or not names[0].startswith("##")
    assert all(name.startswith("##") for name in names[1:])
    joined = "".join(n.removeprefix("##") for n in names)
    assert joined == "tale"
    spans = [(s, e) for _, s, e in pieces]
    assert spans[0][0] == 0 and spans[-1][1] == 4
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        assert e1 == s2


def test_word_with_unseen_character_becomes_unk_with_full_span():
    tok = make_tokenizer()
    pieces = tok.tokenize("naïve")
    assert len(pieces) == 1
    pid, start, end = pieces[0]
    assert tok.pieces[pid] == msc.UNK
    assert (start, end) == (0, 5)


def test_tokenizer_offsets_index_the_raw_string():
    tok = make_tokenizer()
    text = "  Find   a TABLE, for ME "
    for pid, start, end in tok.tokenize(text):
        piece = tok.pieces[pid]
        if piece not in (msc.UNK,) and not piece.startswith("##"):
            assert text[start:end].lower() == piece


# -- packing ----------------------------------------------------------------

def test_pack_pair_layout(rng):
    params = fresh_params(rng)
    packed = msc.pack_pair(params, "people", "find a table")
    tok = params.tokenizer
    assert packed.token_ids[0] == tok.piece_id(msc.CLS)
    sep_positions = [i for i, pid in enumerate(packed.token_ids)
                     if pid == tok.piece_id(msc.SEP)]
    assert len(sep_positions) == 2
    assert packed.segment_ids[0] == 0
    assert all(packed.segment_ids[p] == 1 for p in packed.cmd_positions)
    assert packed.cmd_positions[0] == sep_positions[0] + 1
    assert len(packed.cmd_positions) == 3    # find, a, table


def test_pack_pair_truncates_long_commands(rng, caplog):
    params = fresh_params(rng, max_seq_len=16)
    long_command = " ".join(["table"] * 40)
    with caplog.at_level(logging.WARNING):
        packed = msc.pack_pair(params, "people", long_command)
    assert packed.token_ids.size <= 16
    assert any("truncating" in rec.message for rec in caplog.records)


# -- probabilities and decoding ----------------------------------------------

def test_start_and_end_distributions_sum_to_one(rng):
    params = fresh_params(rng)
    packed = [msc.pack_pair(params, "people", "find a table for me"),
              msc.pack_pair(params, "time", "at 7 pm")]
    start_lp, end_lp, candidates = msc._forward_log_probs(params, packed)
    for row in range(2):
        probs = np.exp(start_lp.data[row])[candidates[row] == 1.0]
        assert probs.sum() == pytest.approx(1.0, abs=1e-5)
        probs = np.exp(end_lp.data[row])[candidates[row] == 1.0]
        assert probs.sum() == pytest.approx(1.0, abs=1e-5)


def test_predictions_round_trip_to_command_substrings(rng):
    params = fresh_params(rng)
    commands = ["find a table for me and my friend at 7 pm",
                "show me italian food", "people time date",
                "a", "me at 7"]
    for trial, command in enumerate(commands * 4):
        trial_params = fresh_params(np.random.default_rng(trial),
                                    tokenizer=params.tokenizer)
        pred = msc.extract_mention(trial_params, "people", command)
        if pred.span is not None:
            assert pred.span.end > pred.span.start
            assert command[pred.span.start:pred.span.end] == pred.span.text
        assert 0.0 <= pred.start_prob <= 1.0
        assert 0.0 <= pred.end_prob <= 1.0


def test_empty_command_rejected(rng):
    params = fresh_params(rng)
    with pytest.raises(ValueError):
        msc.extract_mention(params, "people", "   ")


def test_gold_token_range_no_mention_maps_to_cls(rng):
    params = fresh_params(rng)
    packed = msc.pack_pair(params, "people", "find a table")
    assert msc._gold_token_range(packed, None) == (0, 0, False)


def test_gold_token_range_exact_and_snapped(rng):
    params = fresh_params(rng)
    command = "find a table for me"
    packed = msc.pack_pair(params, "people", command)
    start = command.index("for")
    end = start + len("for me")
    exact = msc._gold_token_range(packed, (start, end))
    assert exact is not None and not exact[2]
    # a span starting mid-word snaps out to the covering token
    snapped = msc._gold_token_range(packed, (start + 1, end))
    assert snapped is not None and snapped[2]
    assert snapped[0] == exact[0] and snapped[1] == exact[1]


def test_derive_mention_records_adds_no_mention_negatives():
    schema, templates, paraphrases = toy_site()
    examples = generate(schema, templates, paraphrases, 40, rng_seed=8)
    records = msc.derive_mention_records(examples, schema)
    with_span = [r for r in records if r.span is not None]
    without = [r for r in records if r.span is None]
    assert len(with_span) == sum(len(e.mentions) for e in examples)
    assert without, "parameters absent from the command yield no-mention rows"
    gold_params = {"people", "time", "cuisine", "price", "rating", "order"}
    assert {r.parameter for r in without} <= gold_params


def _trained_toy_extractor():
    schema, templates, paraphrases = toy_site()
    examples = generate(schema, templates, paraphrases, 1000, rng_seed=21)
    train, valid, _ = split(examples, (0.8, 0.1, 0.1), rng_seed=21)
    train_records = msc.derive_mention_records(train, schema)
    valid_records = msc.derive_mention_records(valid, schema)
    texts = [e.command for e in train]
    for actions in schema.pages.values():
        for action in actions:
            texts.extend([spec.name for spec in action.parameters])
    tokenizer = msc.SubwordTokenizer.build(texts)
    config = EncoderConfig(vocab_size=len(tokenizer), hidden=48, layers=1,
                           heads=4, ffn=96, max_seq_len=48, dropout=0.1)
    params = msc.SpanExtractorParameters.create(
        np.random.default_rng(2), tokenizer, config)
    training = TrainingConfig(dim=8, batch_size=50, learning_rate=1e-4,
                              mention_learning_rate=3e-3, epochs_mention=4,
                              rng_seed=2)
    params, history = msc.train_mention_extractor(params, train_records,
                                                  valid_records, training)
    return params, history, valid_records


@pytest.fixture(scope="module")
def trained_extractor():
    return _trained_toy_extractor()


def test_training_reaches_high_exact_span_accuracy(trained_extractor):
    _, history, _ = trained_extractor
    assert TrainingConfig().epochs_mention == 3
    best = max(row["valid_exact_span"] for row in history["epochs"])
    assert best >= 0.95


def test_trained_model_extracts_the_documented_span(trained_extractor):
    params, _, _ = trained_extractor
    pred = msc.extract_mention(
        params, "people", "find a table for me and my friend at 7 pm")
    assert pred.span is not None
    assert pred.span.text == "me and my friend"


def test_trained_model_signals_no_mention_for_absent_parameters(
        trained_extractor):
    # "time" and "people" never co-occur with sign-in commands in training;
    # the extractor should still report them unexpressed there.
    params, _, _ = trained_extractor
    assert msc.extract_mention(params, "time", "sign in please").span is None
    assert msc.extract_mention(params, "people",
                               "sign in please").span is None


def test_batched_inference_equals_per_item(trained_extractor):
    params, _, valid_records = trained_extractor
    records = valid_records[:20]
    packed = [msc.pack_pair(params, r.parameter, r.command) for r in records]
    start_lp, end_lp, _ = msc._forward_log_probs(params, packed)
    for row, record in enumerate(records):
        batched = msc._decode_row(params, packed[row], start_lp.data[row],
                                  end_lp.data[row], record.command,
                                  record.parameter)
        single = msc.extract_mention(params, record.parameter, record.command)
        assert (batched.span is None) == (single.span is None)
        if batched.span is not None:
            assert (batched.span.start, batched.span.end) == \
                (single.span.start, single.span.end)
        assert batched.start_prob == pytest.approx(single.start_prob,
                                                   abs=1e-12)


def test_checkpoint_round_trips_bit_exactly(tmp_path, trained_extractor):
    import json
    params, _, _ = trained_extractor
    msc.save_mention_extractor(params, tmp_path / "ckpt")
    metadata = json.loads((tmp_path / "ckpt" / "metadata.json").read_text())
    assert metadata["max_seq_len"] == params.config.max_seq_len
    assert metadata["span_max_len"] == params.span_max_len
    assert (tmp_path / "ckpt" / "tokenizer.json").is_file()
    loaded = msc.load_mention_extractor(tmp_path / "ckpt")
    assert loaded.tokenizer.pieces == params.tokenizer.pieces
    assert loaded.config == params.config
    for a, b in zip(params.trainable(), loaded.trainable()):
        assert np.array_equal(a.data, b.data)
    command = "find a table for me and my friend at 7 pm"
    before = msc.extract_mention(params, "people", command)
    after = msc.extract_mention(loaded, "people", command)
    assert before == after


def test_training_requires_records(rng):
    params = fresh_params(rng)
    with pytest.raises(ValueError, match="empty training set"):
        msc.train_mention_extractor(params, [], [], TrainingConfig())
