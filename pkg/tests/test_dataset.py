from __future__ import annotations

import json

import pytest

from navparse.dataset import (CommandTemplate, DatasetError, Example,
                              MentionSpan, NavigationInstruction,
                              ParaphraseTable, ValueAssignment, generate,
                              load_examples, load_paraphrases, load_templates,
                              save_examples, save_paraphrases, save_templates,
                              split, validate_example)
from navparse.schema import site_schema_from_dict
from navparse.toydata import toy_site


def people_schema():
    return site_schema_from_dict({
        "site_id": "s",
        "domain_tag": "restaurants",
        "pages": {"home": [
            {"name": "find a table", "parameters": [
                {"name": "people", "kind": "closed",
                 "domain": ["1 person", "2 people"]},
            ]},
            {"name": "sign in", "parameters": []},
        ]},
    })


def people_paraphrases():
    return ParaphraseTable(closed={"people": {
        "1 person": ["just me"],
        "2 people": ["me and my friend"],
    }})


def test_generate_instantiates_template_and_records_span():
    schema = people_schema()
    templates = [CommandTemplate("home", "find a table",
                                 "find a table for [people]")]
    examples = generate(schema, templates, people_paraphrases(), 20,
                        rng_seed=1)
    assert len(examples) == 20
    two = [e for e in examples
           if e.gold.assignments[0].value == "2 people"]
    assert two, "expected the 2-people value to be sampled"
    example = two[0]
    assert example.command == "find a table for me and my friend"
    assert example.gold.action == "find a table"
    span = example.mentions[0]
    assert (span.start, span.end) == (17, 33)
    assert example.command[span.start:span.end] == "me and my friend"


def test_generate_zero_placeholder_template():
    schema = people_schema()
    templates = [CommandTemplate("home", "sign in", "sign in please")]
    examples = generate(schema, templates, ParaphraseTable(), 3, rng_seed=0)
    for example in examples:
        assert example.command == "sign in please"
        assert example.gold.assignments == ()
        assert example.mentions == ()


def test_generate_is_deterministic_per_seed(tmp_path):
    schema, templates, paraphrases = toy_site()
    a = generate(schema, templates, paraphrases, 60, rng_seed=9)
    b = generate(schema, templates, paraphrases, 60, rng_seed=9)
    assert a == b
    path_a, path_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_examples(a, path_a)
    save_examples(b, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()
    c = generate(schema, templates, paraphrases, 60, rng_seed=10)
    assert c != a


def test_generate_missing_paraphrase_coverage():
    schema = people_schema()
    templates = [CommandTemplate("home", "find a table",
                                 "find a table for [people]")]
    gappy = ParaphraseTable(closed={"people": {"1 person": ["just me"]}})
    with pytest.raises(DatasetError, match="no paraphrases"):
        generate(schema, templates, gappy, 5, rng_seed=0)


def test_generate_unknown_placeholder():
    schema = people_schema()
    templates = [CommandTemplate("home", "find a table",
                                 "find a table at [time]")]
    with pytest.raises(DatasetError):
        generate(schema, templates, people_paraphrases(), 5, rng_seed=0)


def test_generate_repeated_placeholder_rejected():
    schema = people_schema()
    templates = [CommandTemplate("home", "find a table",
                                 "[people] table for [people]")]
    with pytest.raises(DatasetError, match="repeats"):
        generate(schema, templates, people_paraphrases(), 5, rng_seed=0)


def test_generate_invariants_hold_in_bulk():
    schema, templates, paraphrases = toy_site()
    examples = generate(schema, templates, paraphrases, 500, rng_seed=3)
    for example in examples:
        validate_example(example, schema)  # raises on any violation
        for span in example.mentions:
            assert example.command[span.start:span.end] == span.text


def test_generate_rejects_bad_count():
    schema, templates, paraphrases = toy_site()
    with pytest.raises(DatasetError):
        generate(schema, templates, paraphrases, 0, rng_seed=0)


def _dummy_examples(n):
    return [Example(command=f"cmd {i}", site_id="s", page_id="home",
                    gold=NavigationInstruction(action="sign in"))
            for i in range(n)]


def test_split_exact_ratios():
    train, valid, test = split(_dummy_examples(100), (0.8, 0.1, 0.1),
                               rng_seed=0)
    assert (len(train), len(valid), len(test)) == (80, 10, 10)


def test_split_matches_published_corpus_sizes():
    n = 19108
    ratios = (14332 / n, 2865 / n, 1911 / n)
    train, valid, test = split(_dummy_examples(n), ratios, rng_seed=0)
    assert (len(train), len(valid), len(test)) == (14332, 2865, 1911)


def test_split_single_example_prefers_train():
    train, valid, test = split(_dummy_examples(1), (0.8, 0.1, 0.1),
                               rng_seed=0)
    assert (len(train), len(valid), len(test)) == (1, 0, 0)


def test_split_two_examples_prefers_train_then_valid():
    train, valid, test = split(_dummy_examples(2), (1 / 3, 1 / 3, 1 / 3),
                               rng_seed=0)
    assert (len(train), len(valid), len(test)) == (1, 1, 0)


def test_split_is_a_disjoint_cover():
    examples = _dummy_examples(53)
    train, valid, test = split(examples, (0.6, 0.2, 0.2), rng_seed=5)
    combined = [*train, *valid, *test]
    assert len(combined) == 53
    assert sorted(e.command for e in combined) == \
        sorted(e.command for e in examples)
    again = split(examples, (0.6, 0.2, 0.2), rng_seed=5)
    assert again == (train, valid, test)


def test_split_rejects_bad_inputs():
    with pytest.raises(DatasetError):
        split([], (0.8, 0.1, 0.1), rng_seed=0)
    with pytest.raises(DatasetError):
        split(_dummy_examples(10), (0.8, 0.1, 0.2), rng_seed=0)
    with pytest.raises(DatasetError):
        split(_dummy_examples(10), (1.0, 0.0, 0.0), rng_seed=0)


def test_examples_round_trip(tmp_path):
    schema, templates, paraphrases = toy_site()
    examples = generate(schema, templates, paraphrases, 40, rng_seed=2)
    path = tmp_path / "examples.jsonl"
    save_examples(examples, path)
    assert load_examples(path, schema) == examples


def test_load_examples_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = {"command": "sign in please", "site_id": "s", "page_id": "home",
            "gold": {"action": "sign in", "assignments": []}, "mentions": []}
    bad = {k: v for k, v in good.items() if k != "gold"}
    path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n",
                    encoding="utf-8")
    with pytest.raises(DatasetError, match=":2:"):
        load_examples(path)


def test_load_examples_validates_span_text(tmp_path):
    path = tmp_path / "bad_span.jsonl"
    row = {"command": "sign in please", "site_id": "s", "page_id": "home",
           "gold": {"action": "sign in",
                    "assignments": [{"parameter": "p", "value": "v"}]},
           "mentions": [{"parameter": "p", "start": 0, "end": 4,
                         "text": "WRONG"}]}
    path.write_text(json.dumps(row) + "\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="does not equal"):
        load_examples(path)


def test_validate_example_checks_closed_domain():
    schema = people_schema()
    example = Example(
        command="find a table for me", site_id="s", page_id="home",
        gold=NavigationInstruction(
            action="find a table",
            assignments=(ValueAssignment("people", "7 people"),)),
        mentions=(MentionSpan("people", 17, 19, "me"),))
    with pytest.raises(DatasetError, match="not in the domain"):
        validate_example(example, schema)


def test_templates_and_paraphrases_round_trip(tmp_path):
    schema, templates, paraphrases = toy_site()
    tpath = tmp_path / "templates.jsonl"
    ppath = tmp_path / "paraphrases.json"
    save_templates(templates, tpath)
    save_paraphrases(paraphrases, ppath)
    assert load_templates(tpath) == templates
    loaded = load_paraphrases(ppath)
    assert loaded.closed == paraphrases.closed
    assert loaded.open == paraphrases.open
