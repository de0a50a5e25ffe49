#!/usr/bin/env python3
"""Regenerate the committed replay fixtures under tests/fixtures/.

Everything is derived from the deterministic Rivertown city and scripted
LLM, so reruns only change bytes when the city, the prompts, or the
pipeline change. Run from the repository root:

    python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from citywalk.compare import (  # noqa: E402
    FullPipelineGenerator,
    LLMBaselineGenerator,
    NoCSOGenerator,
    NoPPRGenerator,
    NoRDGenerator,
    RatingGreedyGenerator,
    run_comparison,
)
from citywalk.gateway import CallableTransport, Cassette, LLMGateway  # noqa: E402
from citywalk.pipeline import PlanRequest, plan  # noqa: E402
from citywalk.store import (  # noqa: E402
    GroundTruthItinerary,
    StaticGeocoder,
    save_ground_truth,
)

from rivertown import CITY, REQUESTS, ScriptedLLM, build_store  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

POST_TEXT = (
    "Spent the whole morning at Harbor Gallery before wandering over to\n"
    "[[Grand Pavilion]] for the light show. Both worth a stop!\n"
)


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    store = build_store()
    store.save(FIXTURES / "rivertown.pois")

    llm = ScriptedLLM(store)
    cassette = Cassette(path=FIXTURES / "rivertown.cassette.json")
    recorder = LLMGateway(
        mode="record",
        transport=CallableTransport(chat_fn=llm.chat, embed_fn=llm.embed),
        cassette=cassette,
    )

    # plan every fixture request once; ground truth = the plan's own POIs
    truth = []
    for request in REQUESTS:
        response = plan(PlanRequest(request=request, city=CITY), store, recorder)
        truth.append(GroundTruthItinerary(request, tuple(response.itinerary.poi_ids)))
    save_ground_truth(truth, FIXTURES / "rivertown.truth")

    # record every generator the eval surfaces can replay
    generators = [
        FullPipelineGenerator(store, recorder),
        NoRDGenerator(store, recorder),
        NoPPRGenerator(store, recorder),
        NoCSOGenerator(store, recorder),
        RatingGreedyGenerator(store, recorder),
        LLMBaselineGenerator(recorder, CITY),
    ]
    run_comparison(generators, truth, store, StaticGeocoder.from_store(store))

    # record the ingestion flow against a scratch copy of the store
    (FIXTURES / "post.txt").write_text(POST_TEXT, encoding="utf-8")
    scratch = store.snapshot()
    scratch.ingest_post(POST_TEXT, CITY, recorder, StaticGeocoder.from_store(store))

    # freeze the canonical plan payload for the determinism check
    replayer = LLMGateway(mode="replay", cassette=Cassette.load(cassette.path))
    first_request = next(iter(REQUESTS))
    snapshot = plan(PlanRequest(request=first_request, city=CITY), store, replayer)
    (FIXTURES / "plan_snapshot.json").write_text(
        snapshot.to_json(include_timings=False) + "\n", encoding="utf-8"
    )

    print(f"fixtures written to {FIXTURES}")
    print(f"cassette entries: {len(cassette.entries)}")


if __name__ == "__main__":
    main()
