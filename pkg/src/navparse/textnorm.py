"""Text normalization and tokenization shared across the package.

Display strings (action names, domain values, command text) are kept
verbatim everywhere; the helpers here produce the canonical forms used
for comparisons and for building model vocabularies.
"""

from __future__ import annotations

import re
import unicodedata

# A token is a run of word characters or a single punctuation character.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def normalize_text(text: str) -> str:
    """Canonical comparison form: Unicode NFC, lowercase, collapsed whitespace."""
    text = unicodedata.normalize("NFC", text)
    return " ".join(text.lower().split())


def word_tokens(text: str) -> list[str]:
    """Tokens of the normalized text, splitting on whitespace and punctuation.

    Used to build model vocabularies and to feed the word-level encoders,
    so "7:00 PM" becomes ["7", ":", "00", "pm"].
    """
    return _TOKEN_RE.findall(normalize_text(text))


def whitespace_words(text: str) -> list[str]:
    """Whitespace-delimited words of the normalized text.

    Punctuation stays attached ("7:00 PM" -> ["7:00", "pm"]); this is the
    word notion used by the lexical value-match score.
    """
    return normalize_text(text).split()


def token_spans(text: str) -> list[tuple[int, int, str]]:
    """(start, end, token_text) triples over the *original* string.

    Offsets index the raw input so extracted spans can be mapped back to
    exact substrings; only the token text is meant to be normalized by
    callers that need it.
    """
    return [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]


def levenshtein(a: str, b: str) -> int:
    """Edit distance (insert/delete/substitute, unit costs) between two strings."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]
