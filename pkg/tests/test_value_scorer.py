from __future__ import annotations

import logging
import random

import numpy as np
import pytest

from navparse import value_scorer as vsc
from navparse.action_scorer import Vocabulary
from navparse.orchestrator import TrainingConfig
from navparse.textnorm import levenshtein, normalize_text

from test_autodiff import numeric_grad


def tiny_params(rng, texts=("7 pm", "7:00 PM", "12:15 PM", "banana"), dim=6,
                four_way=False):
    vocab = Vocabulary.build(texts)
    return vsc.ValueScorerParameters.create(rng, vocab, dim,
                                            four_way_lexical=four_way)


# -- lexical similarity ----------------------------------------------------

def test_value_match_on_the_documented_pair():
    fuzzy, value_match = vsc.lexical_similarity("at 7 pm", "7:00 PM")
    assert value_match == 0.5            # {"pm"} of {"7:00", "pm"}
    expected_fuzzy = 1.0 - levenshtein("at 7 pm", "7:00 pm") / 7
    assert fuzzy == expected_fuzzy


def test_lexical_identity_pair():
    assert vsc.lexical_similarity("2 people", "2 people") == (1.0, 1.0)


def test_value_match_zero_when_no_shared_words():
    _, value_match = vsc.lexical_similarity("me and my friend", "2 people")
    assert value_match == 0.0


def test_fuzzy_hand_computed_ratio():
    fuzzy, _ = vsc.lexical_similarity("abc", "abd")
    assert fuzzy == 1.0 - 1.0 / 3.0


def test_value_match_is_directional():
    _, forward = vsc.lexical_similarity("a b", "b")
    _, backward = vsc.lexical_similarity("b", "a b")
    assert forward == 1.0
    assert backward == 0.5


def test_fuzzy_identity_and_symmetry_on_random_pairs():
    rnd = random.Random(1)
    alphabet = "abc 12:"
    for _ in range(300):
        a = "".join(rnd.choice(alphabet)
                    for _ in range(rnd.randrange(1, 10))).strip() or "a"
        b = "".join(rnd.choice(alphabet)
                    for _ in range(rnd.randrange(1, 10))).strip() or "b"
        f_ab, _ = vsc.lexical_similarity(a, b)
        f_ba, _ = vsc.lexical_similarity(b, a)
        f_aa, _ = vsc.lexical_similarity(a, a)
        assert f_ab == f_ba
        assert f_aa == 1.0
        assert 0.0 <= f_ab <= 1.0


def test_lexical_similarity_rejects_empty_strings():
    with pytest.raises(ValueError):
        vsc.lexical_similarity("", "x")
    with pytest.raises(ValueError):
        vsc.lexical_similarity("x", "  ")


# -- neural similarities -----------------------------------------------------

def test_identical_strings_have_unit_similarity(rng):
    params = tiny_params(rng)
    assert vsc.word_similarity(params, "7 pm", "7 pm") == \
        pytest.approx(1.0, abs=1e-9)
    assert vsc.char_similarity(params, "7 pm", "7 pm") == \
        pytest.approx(1.0, abs=1e-9)


def test_similarity_scores_are_deterministic(rng):
    params = tiny_params(rng)
    first = vsc.word_similarity(params, "7 pm", "12:15 PM")
    second = vsc.word_similarity(params, "7 pm", "12:15 PM")
    assert first == second


def test_single_character_words_run_the_length_one_char_path(rng):
    params = tiny_params(rng)
    assert vsc.char_similarity(params, "a", "a") == pytest.approx(1.0,
                                                                  abs=1e-9)
    score = vsc.char_similarity(params, "a", "b")
    assert 0.0 <= score <= 1.0


def test_empty_strings_rejected(rng):
    params = tiny_params(rng)
    with pytest.raises(ValueError):
        vsc.word_similarity(params, "", "x")
    with pytest.raises(ValueError):
        vsc.char_similarity(params, "x", "   ")


def test_net_score_is_the_three_way_mean(rng):
    params = tiny_params(rng)
    score = vsc.net_value_score(params, "7 pm", "7:00 PM")
    lex_mean = (score.lex[0] + score.lex[1]) / 2.0
    assert score.net == pytest.approx((score.word + score.char + lex_mean) / 3)
    assert 0.0 <= score.net <= 1.0
    perfect = vsc.net_value_score(params, "7 pm", "7 pm")
    assert perfect.net == pytest.approx(1.0, abs=1e-9)


def test_net_score_four_way_variant(rng):
    params = tiny_params(rng, four_way=True)
    score = vsc.net_value_score(params, "7 pm", "7:00 PM")
    assert score.net == pytest.approx(
        (score.word + score.char + score.lex[0] + score.lex[1]) / 4)


def test_net_scores_stay_in_unit_interval_on_random_draws():
    rnd = random.Random(3)
    words = ["7", "pm", "evening", "banana", "zz", "12:15"]
    for trial in range(20):
        params = tiny_params(np.random.default_rng(trial), dim=5)
        mention = " ".join(rnd.choices(words, k=rnd.randrange(1, 4)))
        value = " ".join(rnd.choices(words, k=rnd.randrange(1, 4)))
        score = vsc.net_value_score(params, mention, value)
        for part in (score.word, score.char, score.lex[0], score.lex[1],
                     score.net):
            assert 0.0 <= part <= 1.0


def test_ranking_loss_matches_hand_computation(rng):
    params = tiny_params(rng)
    loss = vsc.value_ranking_loss(params, "7 pm", "7:00 PM",
                                  ["12:15 PM", "banana"])
    expected = 0.0
    s_pos = vsc.net_value_score(params, "7 pm", "7:00 PM").net
    for neg in ["12:15 PM", "banana"]:
        s_neg = vsc.net_value_score(params, "7 pm", neg).net
        expected += max(s_neg - s_pos + 1.0, 0.0)
    assert loss.item() == pytest.approx(expected, abs=1e-9)


def test_ranking_loss_empty_negatives_warns(rng, caplog):
    params = tiny_params(rng)
    with caplog.at_level(logging.WARNING):
        loss = vsc.value_ranking_loss(params, "7 pm", "7:00 PM", [])
    assert loss.item() == 0.0
    assert any("no negative" in rec.message for rec in caplog.records)


def test_ranking_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    params = tiny_params(rng, dim=4)

    def fn():
        return vsc.value_ranking_loss(params, "7 pm", "7:00 PM",
                                      ["banana"])

    loss = fn()
    for t in params.trainable():
        t.grad = None
    loss.backward()
    for tensor in [params.e_w, params.e_c, params.word_fw.wx,
                   params.char_rnn.wh, params.cw_bw.wx]:
        expected = numeric_grad(fn, tensor, eps=1e-6)
        got = tensor.grad if tensor.grad is not None else np.zeros_like(
            tensor.data)
        denom = np.maximum(np.abs(expected) + np.abs(got), 1e-6)
        assert np.max(np.abs(expected - got) / denom) < 1e-3


def _time_paraphrase_records():
    domain = ("7:00 PM", "12:15 PM", "9:00 AM")
    table = {
        "7:00 PM": ["7 pm", "19:00", "seven in the evening", "7 in the evening",
                    "19:00 hrs", "7:00 PM"],
        "12:15 PM": ["12:15 pm", "quarter past noon", "12:15", "12:15 PM"],
        "9:00 AM": ["9 am", "nine in the morning", "09:00", "9:00 AM"],
    }
    records = []
    for value, mentions in table.items():
        for mention in mentions:
            records.append(vsc.ValueRecord(mention=mention, parameter="time",
                                           gold_value=value, domain=domain))
    return records


def test_training_learns_time_paraphrases():
    records = _time_paraphrase_records()
    rng = np.random.default_rng(5)
    vocab = Vocabulary.build([r.mention for r in records]
                             + [v for r in records for v in r.domain])
    params = vsc.ValueScorerParameters.create(rng, vocab, 12)
    config = TrainingConfig(dim=12, batch_size=8, learning_rate=0.01,
                            epochs_value=22, rng_seed=0)
    params, history = vsc.train_value_scorer(params, records, records, config)
    assert config.epochs_value == 22
    assert history["epochs"][-1]["valid_top1"] >= 0.9 or \
        max(r["valid_top1"] for r in history["epochs"]) >= 0.9
    # semantic orderings the training data implies
    assert vsc.net_value_score(params, "19:00", "7:00 PM").net > \
        vsc.net_value_score(params, "19:00", "banana").net
    assert vsc.net_value_score(params, "7 pm", "7:00 PM").net > \
        vsc.net_value_score(params, "7 pm", "12:15 PM").net
    assert vsc.net_value_score(params, "7 in the evening", "7:00 PM").net > \
        vsc.net_value_score(params, "7 in the evening", "9:00 AM").net


def test_training_rejects_empty_set(rng):
    params = tiny_params(rng)
    with pytest.raises(ValueError, match="empty training set"):
        vsc.train_value_scorer(params, [], _time_paraphrase_records(),
                               TrainingConfig())


def test_singleton_domains_are_skipped_with_count(rng):
    records = [vsc.ValueRecord("just me", "people", "1 person",
                               ("1 person",)),
               vsc.ValueRecord("two", "people", "2 people",
                               ("1 person", "2 people"))]
    params = tiny_params(rng, texts=("just me", "two", "1 person",
                                     "2 people"), dim=4)
    config = TrainingConfig(dim=4, epochs_value=1, batch_size=2, rng_seed=0)
    _, history = vsc.train_value_scorer(params, records, records, config)
    assert history["skipped_singleton_domain"] == 1


def test_derive_value_records_only_covers_closed_assignments():
    from navparse.dataset import generate
    from navparse.toydata import toy_site
    schema, templates, paraphrases = toy_site()
    examples = generate(schema, templates, paraphrases, 80, rng_seed=4)
    records = vsc.derive_value_records(examples, schema)
    assert records, "closed assignments should yield records"
    open_params = {"cuisine"}
    for record in records:
        assert record.parameter not in open_params
        assert normalize_text(record.gold_value) in {
            normalize_text(v) for v in record.domain}


def test_checkpoint_round_trips_bit_exactly(tmp_path, rng):
    params = tiny_params(rng)
    vsc.save_value_scorer(params, tmp_path / "ckpt")
    assert (tmp_path / "ckpt" / "char_vocab.json").is_file()
    loaded = vsc.load_value_scorer(tmp_path / "ckpt")
    for a, b in zip(params.trainable(), loaded.trainable()):
        assert np.array_equal(a.data, b.data)
    assert loaded.char_vocab.chars == params.char_vocab.chars
    assert vsc.net_value_score(loaded, "7 pm", "7:00 PM") == \
        vsc.net_value_score(params, "7 pm", "7:00 PM")


def test_char_vocabulary_covers_printable_plus_oov():
    import string
    vocab = vsc.CharVocabulary()
    for ch in string.printable:
        assert ch in vocab.chars
    ids = vocab.encode_word("naïve")   # ï is not printable ascii
    assert 1 in ids                    # the oov slot
