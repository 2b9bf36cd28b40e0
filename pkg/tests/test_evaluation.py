from __future__ import annotations

import random

import pytest

from navparse.dataset import NavigationInstruction, ValueAssignment
from navparse.evaluation import (classify_errors, format_metrics_table,
                                 per_example_pr, report, report_to_dict)
from navparse.schema import site_schema_from_dict


def nav(action, **assignments):
    return NavigationInstruction(
        action=action,
        assignments=tuple(ValueAssignment(k, v)
                          for k, v in assignments.items()))


def eval_schema():
    return site_schema_from_dict({
        "site_id": "s", "domain_tag": "other",
        "pages": {"p": [
            {"name": "a", "parameters": [
                {"name": "p1", "kind": "closed", "domain": ["x", "y", "z"]},
                {"name": "p2", "kind": "closed", "domain": ["y", "w"]},
                {"name": "q", "kind": "open", "domain": []},
            ]},
            {"name": "b", "parameters": []},
        ]},
    })


# -- per-example precision and recall ------------------------------------------

def test_partial_prediction_is_precise_but_incomplete():
    gold = nav("a", p1="x", p2="y")
    pred = nav("a", p1="x")
    assert per_example_pr(gold, pred) == (1.0, 0.5)


def test_wrong_action_zeroes_both():
    assert per_example_pr(nav("a", p1="x"), nav("b", p1="x")) == (0.0, 0.0)


def test_absent_prediction_zeroes_both():
    assert per_example_pr(nav("a", p1="x"), None) == (0.0, 0.0)


def test_half_right_assignments():
    gold = nav("a", p1="x", p2="y")
    pred = nav("a", p1="x", p2="z")
    assert per_example_pr(gold, pred) == (0.5, 0.5)


def test_gold_against_itself_is_perfect():
    for gold in [nav("a"), nav("a", p1="x"), nav("b", q="anything at all")]:
        assert per_example_pr(gold, gold) == (1.0, 1.0)


def test_empty_prediction_conventions():
    assert per_example_pr(nav("b"), nav("b")) == (1.0, 1.0)
    assert per_example_pr(nav("a", p1="x"), nav("a")) == (1.0, 0.0)


def test_comparison_uses_normalization():
    gold = nav("Find  Table", p1="7:00 PM")
    pred = nav("find table", p1="7:00  pm")
    assert per_example_pr(gold, pred) == (1.0, 1.0)


# -- aggregate report -------------------------------------------------------------

def test_all_correct_scores_ones():
    pairs = [(nav("a", p1="x"), nav("a", p1="x")),
             (nav("b"), nav("b"))]
    rep = report(pairs)
    assert (rep.a_acc, rep.p_f1, rep.ema, rep.pa100) == (1.0, 1.0, 1.0, 1.0)


def test_documented_two_example_arithmetic():
    # per-example (P, R) of (1.0, 0.5) and (0.5, 0.5)
    pairs = [
        (nav("a", p1="x", p2="y"), nav("a", p1="x")),
        (nav("a", p1="x", p2="y"), nav("a", p1="x", p2="z")),
    ]
    rep = report(pairs)
    assert rep.mean_precision == 0.75
    assert rep.mean_recall == 0.5
    assert rep.p_f1 == 0.6         # exact: 2 * .75 * .5 / 1.25


def test_report_is_permutation_invariant():
    pairs = [
        (nav("a", p1="x"), nav("a", p1="x")),
        (nav("a", p1="x"), nav("b")),
        (nav("b"), None),
        (nav("a", p1="x", p2="y"), nav("a", p1="x", p2="w")),
    ]
    rnd = random.Random(0)
    baseline = report(pairs)
    for _ in range(5):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        assert report(shuffled) == baseline


def test_metric_ordering_invariant_on_random_pairs():
    rnd = random.Random(1)
    actions = ["a", "b"]
    params = ["p1", "p2", "q"]
    values = ["x", "y", "z"]
    for _ in range(100):
        pairs = []
        for _ in range(rnd.randint(1, 12)):
            gold = NavigationInstruction(
                action=rnd.choice(actions),
                assignments=tuple(
                    ValueAssignment(p, rnd.choice(values))
                    for p in rnd.sample(params, rnd.randint(0, 3))))
            if rnd.random() < 0.15:
                pred = None
            else:
                pred = NavigationInstruction(
                    action=rnd.choice(actions),
                    assignments=tuple(
                        ValueAssignment(p, rnd.choice(values))
                        for p in rnd.sample(params, rnd.randint(0, 3))))
            pairs.append((gold, pred))
        rep = report(pairs)
        for metric in (rep.a_acc, rep.p_f1, rep.ema, rep.pa100):
            assert 0.0 <= metric <= 1.0
        assert rep.ema <= rep.pa100 <= rep.a_acc


def test_report_rejects_empty_input():
    with pytest.raises(ValueError):
        report([])


# -- error classification -----------------------------------------------------------

def test_no_prediction_class():
    assert classify_errors(nav("a", p1="x"), None, eval_schema()) == \
        {"action_not_predicted"}


def test_exact_match_has_no_errors():
    gold = nav("a", p1="x", q="free text")
    assert classify_errors(gold, gold, eval_schema()) == set()


def test_wrong_action_class():
    assert classify_errors(nav("a", p1="x"), nav("b"), eval_schema()) == \
        {"action_mispredicted"}


def test_closed_value_mispredicted():
    gold = nav("a", p1="x")
    pred = nav("a", p1="y")
    assert classify_errors(gold, pred, eval_schema()) == \
        {"closed_value_mispredicted"}


def test_closed_param_missed_and_open_value_classes_co_occur():
    gold = nav("a", p1="x", p2="y", q="italian")
    pred = nav("a", p1="x")
    assert classify_errors(gold, pred, eval_schema()) == \
        {"closed_param_missed", "open_value_mispredicted"}


def test_open_value_wrong():
    gold = nav("a", q="hyatt regency grand cypress")
    pred = nav("a", q="hyatt")
    assert classify_errors(gold, pred, eval_schema()) == \
        {"open_value_mispredicted"}


def test_report_collects_error_counts():
    schema = eval_schema()
    pairs = [
        (nav("a", p1="x"), None),
        (nav("a", p1="x"), nav("b")),
        (nav("a", p1="x"), nav("a", p1="y")),
        (nav("a", p1="x"), nav("a", p1="x")),
    ]
    rep = report(pairs, schema)
    assert rep.error_counts["action_not_predicted"] == 1
    assert rep.error_counts["action_mispredicted"] == 1
    assert rep.error_counts["closed_value_mispredicted"] == 1
    assert rep.error_counts["open_value_mispredicted"] == 0


def test_table_formatting_and_json():
    pairs = [(nav("a", p1="x"), nav("a", p1="x"))]
    rep = report(pairs)
    table = format_metrics_table([("somesite", rep)])
    lines = table.splitlines()
    assert "A-acc" in lines[0] and "PA-100" in lines[0]
    assert "somesite" in lines[1]
    payload = report_to_dict(rep)
    assert payload["a_acc"] == 1.0 and payload["n"] == 1
