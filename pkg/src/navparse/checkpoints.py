"""Checkpoint directories: a metadata JSON plus one weight archive.

Weights round-trip bit-exactly through numpy's npz container, which is
what makes retrained-vs-reloaded predictions comparable at equality
rather than tolerance.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

METADATA_FILE = "metadata.json"
WEIGHTS_FILE = "weights.npz"


def save_checkpoint(directory: str | Path, metadata: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / METADATA_FILE).write_text(
        json.dumps(metadata, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")
    with (directory / WEIGHTS_FILE).open("wb") as handle:
        np.savez(handle, **arrays)


def load_checkpoint(directory: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    directory = Path(directory)
    metadata = json.loads((directory / METADATA_FILE).read_text(encoding="utf-8"))
    with np.load(directory / WEIGHTS_FILE) as archive:
        arrays = {name: archive[name] for name in archive.files}
    return metadata, arrays


def checkpoint_exists(directory: str | Path) -> bool:
    directory = Path(directory)
    return (directory / METADATA_FILE).is_file() and (directory / WEIGHTS_FILE).is_file()
