"""Decompose a free-form travel request into structured subrequests."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .gateway import ChatRequest, LLMGateway
from .parsing import PayloadError, extract_json_array
from .prompts import render_prompt

SUBREQUEST_TYPES = ("start", "end", "POI", "itinerary")


class DecompositionError(Exception):
    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


@dataclass(frozen=True)
class SubRequest:
    """One decomposed preference: liked/disliked text, specificity, granularity."""

    pos: str = ""
    neg: str = ""
    mustsee: bool = False
    type: str = "POI"

    def __post_init__(self) -> None:
        if self.type not in SUBREQUEST_TYPES:
            raise DecompositionError(f"unknown subrequest type {self.type!r}")
        if not self.pos and not self.neg:
            raise DecompositionError("subrequest needs pos or neg text")
        if self.mustsee and (self.type == "itinerary" or not self.pos):
            raise DecompositionError("mustsee requires pos text and a POI-level type")


@dataclass(frozen=True)
class Decomposition:
    subrequests: tuple[SubRequest, ...]
    raw_request: str = ""

    def __post_init__(self) -> None:
        if not self.subrequests:
            raise DecompositionError("decomposition has no subrequests")
        for t in ("start", "end"):
            if sum(1 for s in self.subrequests if s.type == t) > 1:
                raise DecompositionError(f"more than one {t!r} subrequest")

    def mustsee_names(self) -> list[str]:
        return [s.pos for s in self.subrequests if s.mustsee]

    def start_subrequest(self) -> SubRequest | None:
        for s in self.subrequests:
            if s.type == "start":
                return s
        return None


def _coerce_type(value: Any, report: list[str], index: int) -> str:
    if value is None:
        return "POI"
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("start", "end", "itinerary"):
            return lowered
        if lowered == "poi":
            return "POI"
    report.append(f"subrequest {index}: unknown type {value!r} repaired to 'POI'")
    return "POI"


def _coerce_bool(value: Any, report: list[str], index: int) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return value.strip().lower() == "true"
    if value is not None:
        report.append(f"subrequest {index}: mustsee {value!r} repaired to false")
    return False


def _coerce_text(value: Any) -> str:
    return value.strip() if isinstance(value, str) else ""


def validate_subrequests(
    raw: list[Any], raw_request: str = ""
) -> tuple[Decomposition, list[str]]:
    """Repair a parsed JSON array into a valid Decomposition.

    Pure and deterministic; mechanical violations (unknown type, duplicate
    start/end, impossible mustsee) are repaired and reported, elements with
    neither pos nor neg are dropped. Idempotent: validating the output of a
    prior validation reports nothing.
    """
    if not isinstance(raw, list):
        raise DecompositionError("decomposition payload is not a JSON array")
    report: list[str] = []
    subs: list[SubRequest] = []
    seen_types: set[str] = set()
    for index, item in enumerate(raw):
        if not isinstance(item, dict):
            report.append(f"subrequest {index}: not an object, dropped")
            continue
        pos = _coerce_text(item.get("pos"))
        neg = _coerce_text(item.get("neg"))
        if not pos and not neg:
            report.append(f"subrequest {index}: empty pos and neg, dropped")
            continue
        sub_type = _coerce_type(item.get("type"), report, index)
        mustsee = _coerce_bool(item.get("mustsee"), report, index)
        if sub_type in ("start", "end") and sub_type in seen_types:
            report.append(f"subrequest {index}: duplicate {sub_type!r} demoted to 'POI'")
            sub_type = "POI"
        if mustsee and (sub_type == "itinerary" or not pos):
            report.append(f"subrequest {index}: mustsee cleared (needs pos and POI-level type)")
            mustsee = False
        seen_types.add(sub_type)
        subs.append(SubRequest(pos=pos, neg=neg, mustsee=mustsee, type=sub_type))
    if not subs:
        raise DecompositionError("no usable subrequests after validation")
    return Decomposition(tuple(subs), raw_request), report


def decompose(
    request: str,
    gateway: LLMGateway,
    model_tag: str = "fast-model",
    prompt_dir: str | None = None,
    warnings: list[str] | None = None,
) -> Decomposition:
    """Run the decomposition prompt and return a validated Decomposition.

    One reprompt is attempted when the reply is not a JSON array; after that
    the raw text is surfaced in the error.
    """
    if not request:
        raise DecompositionError("empty request")
    prompt = render_prompt("request_decomposition", prompt_dir=prompt_dir, request=request)
    raw = gateway.chat(ChatRequest(prompt=prompt, model_tag=model_tag, temperature=0.0))
    for attempt in range(2):
        try:
            items = extract_json_array(raw)
        except PayloadError as exc:
            if attempt == 1:
                raise DecompositionError("decomposition failed", raw_text=raw) from exc
            retry_prompt = (
                prompt
                + "\n\nYour previous reply could not be parsed as a JSON array"
                + f" ({exc}). Reply with only the corrected JSON array."
                + f"\nPrevious reply:\n{raw}"
            )
            raw = gateway.chat(
                ChatRequest(prompt=retry_prompt, model_tag=model_tag, temperature=0.0)
            )
            continue
        decomposition, report = validate_subrequests(items, raw_request=request)
        if warnings is not None:
            warnings.extend(report)
        return decomposition
    raise DecompositionError("decomposition failed", raw_text=raw)
