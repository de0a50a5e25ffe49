"""Final itinerary assembly: time budgeting, prompt build, selection repair.

The language model only ever *selects* from the spatially ordered candidates;
ordering authority stays with the spatial optimizer. Whatever the model
replies, repair is total: unknown ids are dropped, order is coerced back to
the candidate precedence, and an empty selection falls back to a prefix of
the candidates, so the returned itinerary always satisfies its invariants.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .decomposition import Decomposition
from .gateway import ChatRequest, LLMGateway
from .parsing import PayloadError, extract_json_object
from .prompts import render_prompt
from .store import POI

DEFAULT_HOURS = 6.0
HOURS_RANGE = (1.0, 14.0)
FALLBACK_LENGTH = 6

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class Itinerary:
    poi_ids: tuple[int, ...]
    narrative: str
    est_duration_hours: float
    request: str

    def __post_init__(self) -> None:
        if not self.poi_ids:
            raise GenerationError("itinerary has no POIs")
        if not self.est_duration_hours > 0:
            raise GenerationError("itinerary duration must be positive")


def estimate_time_budget(
    request: str,
    gateway: LLMGateway,
    model_tag: str = "fast-model",
    prompt_dir: str | None = None,
    warnings: list[str] | None = None,
) -> float:
    """Hours the outing should take, clamped to [1, 14]; defaults to 6 on noise."""
    if not request:
        raise GenerationError("empty request")
    prompt = render_prompt("time_budget", prompt_dir=prompt_dir, request=request)
    raw = gateway.chat(ChatRequest(prompt=prompt, model_tag=model_tag, temperature=0.0))
    hours = _parse_hours(raw)
    if hours is None:
        if warnings is not None:
            warnings.append(f"unparseable time budget {raw!r}; defaulting to {DEFAULT_HOURS}")
        return DEFAULT_HOURS
    lo, hi = HOURS_RANGE
    return min(hi, max(lo, hours))


def _parse_hours(raw: str) -> float | None:
    try:
        payload = extract_json_object(raw)
        value = float(payload["hours"])
        return value if value > 0 else None
    except (PayloadError, KeyError, TypeError, ValueError):
        pass
    m = _NUMBER_RE.search(raw)
    if m:
        value = float(m.group(0))
        return value if value > 0 else None
    return None


def _describe_subrequests(decomposition: Decomposition | None) -> str:
    if decomposition is None:
        return "(none)"
    lines = []
    for sub in decomposition.subrequests:
        bits = []
        if sub.pos:
            bits.append(f"wants: {sub.pos}")
        if sub.neg:
            bits.append(f"avoid: {sub.neg}")
        if sub.mustsee:
            bits.append("must-see")
        lines.append(f"- [{sub.type}] " + "; ".join(bits))
    return "\n".join(lines)


def build_ig_prompt(
    request: str,
    decomposition: Decomposition | None,
    ordered_pois: list[POI],
    hours: float,
    extra: str = "",
    prompt_dir: str | None = None,
) -> str:
    """Deterministic prompt over the ordered candidates; same inputs, same text."""
    if not ordered_pois:
        raise GenerationError("no candidate POIs")
    poi_lines = []
    for poi in ordered_pois:
        desc = poi.description.splitlines()[0] if poi.description else ""
        poi_lines.append(
            f"{poi.id}. {poi.name} [{poi.category}, rated {poi.rating:g}] {desc}".rstrip()
        )
    return render_prompt(
        "itinerary_generation",
        prompt_dir=prompt_dir,
        request=request,
        subrequests=_describe_subrequests(decomposition),
        pois="\n".join(poi_lines),
        hours=f"{hours:g}",
        extra=extra,
    )


def _fallback_itinerary(
    ordered_pois: list[POI], request: str, hours: float, fallback_len: int
) -> Itinerary:
    chosen = ordered_pois[: max(1, min(fallback_len, len(ordered_pois)))]
    names = ", ".join(p.name for p in chosen)
    return Itinerary(
        poi_ids=tuple(p.id for p in chosen),
        narrative=f"A day through {names}, visited in walking order.",
        est_duration_hours=hours,
        request=request,
    )


def repair_selection(payload: dict, ordered_ids: list[int], coerce_order: bool = True
                     ) -> tuple[list[int], list[str]]:
    """Clamp a selected_ids payload onto the candidate list.

    Non-integers and unknown ids are dropped, duplicates collapse to their
    first occurrence, and (unless ``coerce_order`` is off, as in ablations
    that grant the model ordering authority) the survivors are re-sorted to
    candidate precedence.
    """
    notes: list[str] = []
    raw_ids = payload.get("selected_ids")
    if not isinstance(raw_ids, list):
        return [], ["selection payload lacks a selected_ids list"]
    known = set(ordered_ids)
    seen: set[int] = set()
    kept: list[int] = []
    for item in raw_ids:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            notes.append(f"dropped non-integer id {item!r}")
            continue
        poi_id = int(item)
        if poi_id != item:
            notes.append(f"dropped non-integer id {item!r}")
            continue
        if poi_id not in known:
            notes.append(f"dropped unknown id {poi_id}")
            continue
        if poi_id in seen:
            notes.append(f"dropped duplicate id {poi_id}")
            continue
        seen.add(poi_id)
        kept.append(poi_id)
    if coerce_order:
        precedence = {poi_id: i for i, poi_id in enumerate(ordered_ids)}
        reordered = sorted(kept, key=lambda i: precedence[i])
        if reordered != kept:
            notes.append("selection reordered to candidate precedence")
        kept = reordered
    return kept, notes


def generate(
    request: str,
    decomposition: Decomposition | None,
    ordered_pois: list[POI],
    gateway: LLMGateway,
    hours: float | None = None,
    extra: str = "",
    model_tag: str = "strong-model",
    coerce_order: bool = True,
    fallback_len: int = FALLBACK_LENGTH,
    prompt_dir: str | None = None,
    warnings: list[str] | None = None,
) -> Itinerary:
    """Ask the model for a subset and narrative; repair into a valid Itinerary."""
    if not ordered_pois:
        raise GenerationError("no candidate POIs")
    if hours is None:
        hours = estimate_time_budget(
            request, gateway, prompt_dir=prompt_dir, warnings=warnings
        )
    prompt = build_ig_prompt(request, decomposition, ordered_pois, hours, extra, prompt_dir)
    ordered_ids = [p.id for p in ordered_pois]
    raw = gateway.chat(ChatRequest(prompt=prompt, model_tag=model_tag, temperature=0.7))
    payload: dict | None = None
    for attempt in range(2):
        try:
            payload = extract_json_object(raw)
            break
        except PayloadError as exc:
            if attempt == 1:
                break
            retry_prompt = (
                prompt
                + "\n\nYour previous reply could not be parsed as a JSON object"
                + f" ({exc}). Reply with only the corrected JSON object."
                + f"\nPrevious reply:\n{raw}"
            )
            raw = gateway.chat(
                ChatRequest(prompt=retry_prompt, model_tag=model_tag, temperature=0.7)
            )
    if payload is None:
        if warnings is not None:
            warnings.append("itinerary reply unparseable after reprompt; using fallback")
        return _fallback_itinerary(ordered_pois, request, hours, fallback_len)
    kept, notes = repair_selection(payload, ordered_ids, coerce_order=coerce_order)
    if warnings is not None:
        warnings.extend(notes)
    if not kept:
        if warnings is not None:
            warnings.append("empty selection after repair; using fallback")
        return _fallback_itinerary(ordered_pois, request, hours, fallback_len)
    narrative = payload.get("narrative")
    if not isinstance(narrative, str) or not narrative.strip():
        by_id = {p.id: p for p in ordered_pois}
        narrative = "Stops in order: " + ", ".join(by_id[i].name for i in kept) + "."
        if warnings is not None:
            warnings.append("missing narrative; substituted a templated one")
    return Itinerary(
        poi_ids=tuple(kept),
        narrative=narrative,
        est_duration_hours=hours,
        request=request,
    )
