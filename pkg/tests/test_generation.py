from __future__ import annotations

import json
import random

import pytest

from citywalk.decomposition import Decomposition, SubRequest
from citywalk.gateway import CallableTransport, CassetteMissError, LLMGateway
from citywalk.generation import (
    GenerationError,
    Itinerary,
    build_ig_prompt,
    estimate_time_budget,
    generate,
    repair_selection,
)


def _gateway(*replies: str) -> LLMGateway:
    queue = list(replies)
    return LLMGateway(
        mode="live", transport=CallableTransport(chat_fn=lambda req: queue.pop(0))
    )


@pytest.fixture()
def pois(city_store):
    return [city_store.get(i) for i in range(1, 9)]


DECOMP = Decomposition((SubRequest(pos="an artsy day"),), "an artsy day")


class TestTimeBudget:
    def test_quick_stroll(self):
        hours = estimate_time_budget("a quick 2-hour stroll", _gateway('{"hours": 2}'))
        assert hours == 2.0

    def test_unparseable_defaults_to_six_with_warning(self):
        warnings: list[str] = []
        hours = estimate_time_budget(
            "whatever", _gateway("no idea, sorry"), warnings=warnings
        )
        assert hours == 6.0
        assert any("unparseable" in w.lower() for w in warnings)

    def test_full_day_range(self):
        hours = estimate_time_budget("full day exploring", _gateway('{"hours": 10}'))
        assert 8.0 <= hours <= 14.0

    def test_clamped_to_bounds(self):
        assert estimate_time_budget("r", _gateway('{"hours": 72}')) == 14.0
        assert estimate_time_budget("r", _gateway('{"hours": 0.2}')) == 1.0

    def test_bare_number_accepted(self):
        assert estimate_time_budget("r", _gateway("about 3 hours")) == 3.0


class TestPromptBuild:
    def test_one_line_per_poi(self, pois):
        prompt = build_ig_prompt("r", DECOMP, pois[:3], hours=6.0)
        numbered = [
            line for line in prompt.splitlines() if line.split(".")[0].isdigit()
        ]
        assert len(numbered) == 3
        for poi in pois[:3]:
            assert poi.name in prompt

    def test_deterministic(self, pois):
        a = build_ig_prompt("r", DECOMP, pois, hours=6.0, extra="be playful")
        b = build_ig_prompt("r", DECOMP, pois, hours=6.0, extra="be playful")
        assert a == b

    def test_extra_lands_in_style_section(self, pois):
        prompt = build_ig_prompt("r", DECOMP, pois, hours=6.0, extra="write playfully")
        style_section = prompt.split("[Style]")[1].split("[Output format]")[0]
        assert "write playfully" in style_section

    def test_constraints_present(self, pois):
        prompt = build_ig_prompt("r", DECOMP, pois, hours=7.5)
        assert "7.5 hours" in prompt
        assert "restaurants of the same kind back to back" in prompt
        assert "time of day" in prompt


class TestRepairSelection:
    def test_valid_subsequence_unchanged(self):
        kept, notes = repair_selection({"selected_ids": [2, 4, 7]}, [1, 2, 3, 4, 7])
        assert kept == [2, 4, 7] and notes == []

    def test_shuffled_ids_reordered(self):
        kept, notes = repair_selection({"selected_ids": [7, 2, 4]}, [1, 2, 3, 4, 7])
        assert kept == [2, 4, 7]
        assert any("reordered" in n for n in notes)

    def test_hallucinated_id_dropped(self):
        kept, notes = repair_selection({"selected_ids": [2, 999]}, [1, 2, 3])
        assert kept == [2]
        assert any("unknown id 999" in n for n in notes)

    def test_duplicates_and_junk_dropped(self):
        kept, _ = repair_selection(
            {"selected_ids": [2, 2, "x", None, 3.5, True, 3.0]}, [1, 2, 3]
        )
        assert kept == [2, 3]

    def test_order_preserved_when_not_coercing(self):
        kept, _ = repair_selection(
            {"selected_ids": [7, 2, 4]}, [1, 2, 3, 4, 7], coerce_order=False
        )
        assert kept == [7, 2, 4]


class TestGenerate:
    def test_valid_selection_passes_through(self, pois):
        reply = json.dumps({"selected_ids": [1, 3, 5], "narrative": "A lovely day."})
        itinerary = generate("r", DECOMP, pois, _gateway(reply), hours=6.0)
        assert itinerary.poi_ids == (1, 3, 5)
        assert itinerary.narrative == "A lovely day."
        assert itinerary.est_duration_hours == 6.0

    def test_shuffled_selection_coerced(self, pois):
        reply = json.dumps({"selected_ids": [5, 1, 3], "narrative": "n"})
        itinerary = generate("r", DECOMP, pois, _gateway(reply), hours=6.0)
        assert itinerary.poi_ids == (1, 3, 5)

    def test_hallucinated_id_dropped_with_warning(self, pois):
        reply = json.dumps({"selected_ids": [1, 999], "narrative": "n"})
        warnings: list[str] = []
        itinerary = generate("r", DECOMP, pois, _gateway(reply), hours=6.0, warnings=warnings)
        assert itinerary.poi_ids == (1,)
        assert any("999" in w for w in warnings)

    def test_empty_selection_falls_back(self, pois):
        reply = json.dumps({"selected_ids": [], "narrative": "n"})
        warnings: list[str] = []
        itinerary = generate("r", DECOMP, pois, _gateway(reply), hours=6.0, warnings=warnings)
        assert itinerary.poi_ids == tuple(p.id for p in pois[:6])
        assert any("fallback" in w for w in warnings)

    def test_unparseable_twice_falls_back(self, pois):
        warnings: list[str] = []
        itinerary = generate(
            "r", DECOMP, pois, _gateway("junk", "more junk"), hours=6.0, warnings=warnings
        )
        assert len(itinerary.poi_ids) == 6
        assert any("unparseable" in w for w in warnings)

    def test_missing_narrative_substituted(self, pois):
        reply = json.dumps({"selected_ids": [1, 2]})
        itinerary = generate("r", DECOMP, pois, _gateway(reply), hours=6.0)
        assert "Harbor Gallery" in itinerary.narrative

    def test_gateway_failure_is_an_error(self, pois):
        gateway = LLMGateway(mode="replay")  # empty cassette
        with pytest.raises(CassetteMissError):
            generate("r", DECOMP, pois, gateway, hours=6.0)

    def test_time_budget_fetched_when_missing(self, pois):
        replies = [
            json.dumps({"hours": 3}),
            json.dumps({"selected_ids": [1], "narrative": "n"}),
        ]
        itinerary = generate("r", DECOMP, pois, _gateway(*replies))
        assert itinerary.est_duration_hours == 3.0

    def test_repair_is_fixpoint(self, pois):
        reply = json.dumps({"selected_ids": [5, 1, 999, 3, 1], "narrative": "n"})
        itinerary = generate("r", DECOMP, pois, _gateway(reply), hours=6.0)
        again, notes = repair_selection(
            {"selected_ids": list(itinerary.poi_ids)}, [p.id for p in pois]
        )
        assert tuple(again) == itinerary.poi_ids
        assert notes == []

    def test_fuzz_repair_totality_small(self, pois):
        rng = random.Random(0)
        ordered_ids = [p.id for p in pois]
        for _ in range(200):
            choice = rng.randrange(5)
            if choice == 0:
                reply = "".join(rng.choices('{}[]",:x123 ', k=rng.randrange(40)))
            elif choice == 1:
                reply = json.dumps({"selected_ids": rng.sample(range(-5, 40), k=rng.randrange(10))})
            elif choice == 2:
                reply = json.dumps({"narrative": 42})
            elif choice == 3:
                reply = json.dumps(
                    {"selected_ids": [rng.choice([None, "a", 1.5, True, 2])], "narrative": ""}
                )
            else:
                reply = json.dumps(rng.sample(range(10), k=3))
            itinerary = generate(
                "r", DECOMP, pois, _gateway(reply, reply), hours=6.0
            )
            assert itinerary.poi_ids
            assert set(itinerary.poi_ids) <= set(ordered_ids)
            precedence = {pid: i for i, pid in enumerate(ordered_ids)}
            ranks = [precedence[i] for i in itinerary.poi_ids]
            assert ranks == sorted(ranks)
            assert isinstance(itinerary.narrative, str) and itinerary.narrative
            assert itinerary.est_duration_hours > 0


class TestItineraryInvariants:
    def test_empty_ids_rejected(self):
        with pytest.raises(GenerationError):
            Itinerary((), "n", 6.0, "r")

    def test_nonpositive_hours_rejected(self):
        with pytest.raises(GenerationError):
            Itinerary((1,), "n", 0.0, "r")
