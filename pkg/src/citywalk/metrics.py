"""Rule-based itinerary metrics and the pairwise LLM judge.

Recall rate scores personalization against ground truth; average margin and
overlap count score spatial quality of the visit order; fail rate scores
whether generated place names exist at all. The judge compares two
itineraries per criterion with randomized presentation order to cancel
position bias.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fuzzy import token_set_ratio
from .gateway import ChatRequest, LLMGateway
from .geo import DistanceMatrix, build_distance_matrix, count_self_intersections
from .parsing import PayloadError, extract_json_object
from .prompts import render_prompt
from .spatial import SAParams, solve_tsp_sa
from .store import Geocoder, POIStore

EXACT_PATH_MAX_N = 15
FUZZY_THRESHOLD = 80.0
JUDGE_CRITERIA = ("PQ", "IQ", "Match")

_CRITERION_QUESTIONS = {
    "PQ": "PQ: which itinerary has the more interesting and diverse places?",
    "IQ": "IQ: which itinerary is the more coherent, higher-quality day overall?",
    "Match": "Match: which itinerary better satisfies the stated request?",
}


class MetricError(Exception):
    pass


@dataclass
class MetricReport:
    recall_rate: float
    avg_margin_m: float
    overlaps: float
    fail_rate: float | None
    notes: str = ""


def recall_rate(generated_ids: Iterable[int], truth_ids: Iterable[int]) -> float:
    """|generated ∩ truth| / |truth| over id sets; order plays no part."""
    truth = set(truth_ids)
    if not truth:
        raise MetricError("empty ground truth")
    return len(set(generated_ids) & truth) / len(truth)


def path_length(order: Sequence[int], matrix: DistanceMatrix) -> float:
    return sum(matrix[order[i], order[i + 1]] for i in range(len(order) - 1))


def optimal_open_path_cost(matrix: DistanceMatrix) -> tuple[float, bool]:
    """Shortest free-endpoint Hamiltonian path cost; (cost, solved_exactly).

    Exact subset DP up to 15 nodes. Beyond that, the open path is reduced to
    a closed tour through a zero-distance dummy node and annealed with 10
    seeds, keeping the best; the flag reports the approximation.
    """
    n = matrix.n
    if n < 2:
        return 0.0, True
    if n <= EXACT_PATH_MAX_N:
        d = matrix.entries.tolist()
        full = (1 << n) - 1
        inf = math.inf
        cost = [[inf] * n for _ in range(1 << n)]
        for i in range(n):
            cost[1 << i][i] = 0.0
        for mask in range(1, full + 1):
            row = cost[mask]
            for last in range(n):
                c = row[last]
                if c == inf or not mask & (1 << last):
                    continue
                dl = d[last]
                for nxt in range(n):
                    if mask & (1 << nxt):
                        continue
                    new_cost = c + dl[nxt]
                    nm = mask | (1 << nxt)
                    if new_cost < cost[nm][nxt]:
                        cost[nm][nxt] = new_cost
        return min(cost[full]), True
    padded = np.zeros((n + 1, n + 1))
    padded[:n, :n] = matrix.entries
    dummy = DistanceMatrix(padded)
    best = math.inf
    for seed in range(10):
        best = min(best, solve_tsp_sa(dummy, SAParams(seed=seed)).cost)
    return best, False


def average_margin(
    itinerary_ids: Sequence[int], store: POIStore
) -> tuple[float, bool]:
    """Excess meters per POI of the visit order over the optimal reordering.

    The reference is the shortest open Hamiltonian path over the itinerary's
    own POI set with free endpoints. Returns (margin, solved_exactly).
    """
    if len(itinerary_ids) < 2:
        raise MetricError("average margin needs at least 2 POIs")
    points = [store.get(i).location for i in itinerary_ids]
    matrix = build_distance_matrix(points)
    generated = path_length(list(range(len(points))), matrix)
    optimal, exact = optimal_open_path_cost(matrix)
    return (generated - optimal) / len(itinerary_ids), exact


def overlaps(itinerary_ids: Sequence[int], store: POIStore) -> int:
    """Self-intersection count of the itinerary polyline."""
    if len(itinerary_ids) < 2:
        raise MetricError("overlap count needs at least 2 POIs")
    return count_self_intersections([store.get(i).location for i in itinerary_ids])


def fail_rate(
    poi_names: Sequence[str],
    resolver: Geocoder,
    threshold: float = FUZZY_THRESHOLD,
) -> float:
    """Fraction of names no map entry fuzzily matches at the threshold."""
    if not poi_names:
        raise MetricError("fail rate needs at least one name")
    failed = 0
    for name in poi_names:
        hit = resolver.lookup(name, "")
        if hit is None or token_set_ratio(name, hit.name) < threshold:
            failed += 1
    return failed / len(poi_names)


def _render_itinerary(label_pois: Sequence[str], narrative: str) -> str:
    stops = "\n".join(f"{i + 1}. {name}" for i, name in enumerate(label_pois))
    return f"{stops}\nNarrative: {narrative}"


def llm_judge(
    itinerary_a: tuple[Sequence[str], str],
    itinerary_b: tuple[Sequence[str], str],
    request: str,
    gateway: LLMGateway,
    criteria: Sequence[str] = JUDGE_CRITERIA,
    trials: int = 10,
    seed: int = 0,
    model_tag: str = "strong-model",
    prompt_dir: str | None = None,
) -> dict:
    """Win rate of itinerary A per criterion over randomized-order trials.

    Each itinerary is (poi names, narrative). Presentation order is drawn
    from a recorded seed each trial; ties score half a win. Trials whose
    verdict cannot be parsed are redrawn, up to twice the requested count.
    """
    if trials < 10:
        raise MetricError("judging requires at least 10 trials")
    unknown = [c for c in criteria if c not in _CRITERION_QUESTIONS]
    if unknown:
        raise MetricError(f"unknown judge criteria {unknown}")
    rng = random.Random(seed)
    wins = {c: 0.0 for c in criteria}
    completed = 0
    attempts = 0
    criteria_lines = "\n".join(_CRITERION_QUESTIONS[c] for c in criteria)
    while completed < trials and attempts < 2 * trials:
        attempts += 1
        a_first = rng.random() < 0.5
        first, second = (itinerary_a, itinerary_b) if a_first else (itinerary_b, itinerary_a)
        prompt = render_prompt(
            "judge",
            prompt_dir=prompt_dir,
            request=request,
            itinerary_a=_render_itinerary(*first),
            itinerary_b=_render_itinerary(*second),
            criteria_lines=criteria_lines,
        )
        raw = gateway.chat(ChatRequest(prompt=prompt, model_tag=model_tag, temperature=0.0))
        try:
            payload = extract_json_object(raw)
            verdicts = {}
            for criterion in criteria:
                v = str(payload[criterion]).strip().lower()
                if v not in ("a", "b", "tie"):
                    raise PayloadError(f"bad verdict {v!r}")
                verdicts[criterion] = v
        except (PayloadError, KeyError, TypeError) as exc:
            _ = exc
            continue
        for criterion, v in verdicts.items():
            if v == "tie":
                wins[criterion] += 0.5
            elif (v == "a") == a_first:
                wins[criterion] += 1.0
        completed += 1
    if completed < trials:
        raise MetricError(
            f"only {completed}/{trials} judge trials parseable within {attempts} attempts"
        )
    return {
        "win_rates": {c: wins[c] / completed for c in criteria},
        "trials": completed,
        "seed": seed,
    }
