from __future__ import annotations

import json

import numpy as np
import pytest

from navparse.schema import site_schema_from_dict


def opentable_like_dict() -> dict:
    return {
        "site_id": "opentable-like",
        "domain_tag": "restaurants",
        "pages": {
            "home": [
                {
                    "name": "let's go",
                    "parameters": [
                        {"name": "time", "kind": "closed",
                         "domain": ["12:00 pm", "12:15 pm", "7:00 PM"]},
                        {"name": "date", "kind": "closed",
                         "domain": ["today", "tomorrow"]},
                        {"name": "people", "kind": "closed",
                         "domain": ["1 person", "2 people", "3 people"]},
                        {"name": "location, restaurant, or cuisine",
                         "kind": "open", "domain": []},
                    ],
                },
            ],
        },
    }


@pytest.fixture
def opentable_schema():
    return site_schema_from_dict(opentable_like_dict())


@pytest.fixture
def opentable_schema_file(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(opentable_like_dict()), encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
