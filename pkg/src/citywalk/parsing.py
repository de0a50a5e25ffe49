"""Tolerant extraction of JSON payloads from LLM replies."""

from __future__ import annotations

import json
import re
from typing import Any

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


class PayloadError(ValueError):
    pass


def strip_code_fences(text: str) -> str:
    """Return the content of the first fenced block, or the text unchanged."""
    m = _FENCE_RE.search(text)
    if m:
        return m.group(1).strip()
    return text.strip()


def _bracket_slice(text: str, open_ch: str, close_ch: str) -> str | None:
    start = text.find(open_ch)
    end = text.rfind(close_ch)
    if start == -1 or end == -1 or end <= start:
        return None
    return text[start : end + 1]


def extract_json_array(text: str) -> list[Any]:
    """Parse a JSON array out of an LLM reply, tolerating fences and chatter."""
    stripped = strip_code_fences(text)
    for candidate in (stripped, _bracket_slice(stripped, "[", "]")):
        if candidate is None:
            continue
        try:
            value = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    raise PayloadError("no JSON array found in reply")


def extract_json_object(text: str) -> dict[str, Any]:
    """Parse a JSON object out of an LLM reply, tolerating fences and chatter."""
    stripped = strip_code_fences(text)
    for candidate in (stripped, _bracket_slice(stripped, "{", "}")):
        if candidate is None:
            continue
        try:
            value = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            return value
    raise PayloadError("no JSON object found in reply")
