"""Token-set fuzzy string matching used for name resolution against map data."""

from __future__ import annotations

import re
from difflib import SequenceMatcher

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _tokens(text: str) -> set[str]:
    return set(m.group(0).lower() for m in _TOKEN_RE.finditer(text))


def _ratio(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return SequenceMatcher(None, a, b).ratio()


def token_set_ratio(a: str, b: str) -> float:
    """Order-insensitive similarity on a 0..100 scale.

    Both strings are reduced to lowercase token sets; the score is the best
    pairwise similarity between the sorted intersection and each side's
    intersection-plus-remainder string, so reorderings like "Bund, The" vs
    "The Bund" score 100.
    """
    ta, tb = _tokens(a), _tokens(b)
    if not ta and not tb:
        return 100.0
    if not ta or not tb:
        return 0.0
    inter = " ".join(sorted(ta & tb))
    rest_a = " ".join(sorted(ta - tb))
    rest_b = " ".join(sorted(tb - ta))
    combined_a = (inter + " " + rest_a).strip()
    combined_b = (inter + " " + rest_b).strip()
    best = max(
        _ratio(inter, combined_a),
        _ratio(inter, combined_b),
        _ratio(combined_a, combined_b),
    )
    return 100.0 * best
