"""End-to-end planning: compose the stages and shape the response.

Besides the final itinerary, the response carries every intermediate
artifact the UI renders (subrequests, ordered candidates, route GeoJSON)
plus diagnostics. Stage failures surface with the stage name attached so
callers can tell *where* a plan died.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .config import AppConfig
from .decomposition import Decomposition, decompose
from .gateway import LLMGateway
from .generation import Itinerary, estimate_time_budget, generate
from .retrieval import retrieve
from .spatial import cluster_and_select, order_pois
from .store import POI, POIStore


class PlanError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.stage_message = message


@dataclass(frozen=True)
class PlanRequest:
    request: str
    city: str = ""
    style: str = ""

    def __post_init__(self) -> None:
        if not self.request.strip():
            raise PlanError("validate", "empty request")


@dataclass
class PlanResponse:
    itinerary: Itinerary
    ordered_pois: list[dict]
    subrequests: Decomposition
    route_geojson: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        diagnostics = dict(self.diagnostics)
        if not include_timings:
            diagnostics.pop("timings", None)
        return {
            "itinerary": {
                "poi_ids": list(self.itinerary.poi_ids),
                "narrative": self.itinerary.narrative,
                "est_duration_hours": self.itinerary.est_duration_hours,
                "request": self.itinerary.request,
            },
            "ordered_pois": self.ordered_pois,
            "subrequests": [
                {"pos": s.pos, "neg": s.neg, "mustsee": s.mustsee, "type": s.type}
                for s in self.subrequests.subrequests
            ],
            "route_geojson": self.route_geojson,
            "diagnostics": diagnostics,
        }

    def to_json(self, include_timings: bool = False) -> str:
        """Canonical JSON; timings are excluded by default so that identical
        plans serialize byte-identically across runs."""
        return json.dumps(
            self.to_dict(include_timings=include_timings),
            sort_keys=True,
            ensure_ascii=False,
            separators=(",", ":"),
        )


def poi_summary(poi: POI, order: int) -> dict:
    return {
        "poi_id": poi.id,
        "name": poi.name,
        "category": poi.category,
        "rating": poi.rating,
        "longitude": poi.location.longitude,
        "latitude": poi.location.latitude,
        "order": order,
    }


def route_geojson(itinerary: Itinerary, store: POIStore) -> dict:
    """FeatureCollection: one Point per stop (with visit order) + the route line."""
    features = []
    coords = []
    for order, poi_id in enumerate(itinerary.poi_ids):
        poi = store.get(poi_id)
        coord = [poi.location.longitude, poi.location.latitude]
        coords.append(coord)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": coord},
                "properties": {
                    "poi_id": poi.id,
                    "name": poi.name,
                    "category": poi.category,
                    "rating": poi.rating,
                    "order": order,
                },
            }
        )
    features.append(
        {
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": {"role": "route"},
        }
    )
    return {"type": "FeatureCollection", "features": features}


def plan(
    request: PlanRequest,
    store: POIStore,
    gateway: LLMGateway,
    config: AppConfig | None = None,
) -> PlanResponse:
    """Run the full pipeline for one request against a store snapshot."""
    config = config or AppConfig()
    snapshot = store.snapshot()
    if len(snapshot) == 0:
        raise PlanError("validate", f"no POIs loaded for city {request.city!r}")
    warnings: list[str] = []
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    def timed(stage: str, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except PlanError:
            raise
        except Exception as exc:  # noqa: BLE001 - annotate with stage name
            raise PlanError(stage, str(exc)) from exc
        timings[stage] = time.perf_counter() - t0
        return result

    decomposition = timed(
        "decompose",
        lambda: decompose(
            request.request,
            gateway,
            model_tag=config.models.fast,
            prompt_dir=config.prompt_dir or None,
            warnings=warnings,
        ),
    )
    retrieval_result = timed(
        "retrieve",
        lambda: retrieve(
            decomposition,
            snapshot,
            gateway,
            k_per_subrequest=config.retrieval.k_per_subrequest,
            k_final=config.retrieval.k_final,
            model_tag=config.models.embedder,
            mustsee_score=config.retrieval.mustsee_score,
            warnings=warnings,
        ),
    )

    def _cluster():
        scored = [(snapshot.get(c.poi_id), c.score) for c in retrieval_result.candidates]
        return cluster_and_select(
            scored, config.spatial.tau_meters, config.spatial.n_candidates
        )

    clusters, candidates = timed("cluster", _cluster)
    selected = [c for c in clusters if c.member_ids <= set(candidates)]
    ordered_ids = timed(
        "order",
        lambda: order_pois(
            selected,
            candidates,
            snapshot,
            decomposition,
            gateway,
            sa_params=config.spatial.sa_params(),
            tau=config.spatial.tau_meters,
            max_exact_n=config.spatial.exact_solver_max_n,
            model_tag=config.models.fast,
            prompt_dir=config.prompt_dir or None,
            warnings=warnings,
        ),
    )

    def _generate():
        hours = estimate_time_budget(
            request.request,
            gateway,
            model_tag=config.models.fast,
            prompt_dir=config.prompt_dir or None,
            warnings=warnings,
        )
        return generate(
            request.request,
            decomposition,
            [snapshot.get(i) for i in ordered_ids],
            gateway,
            hours=hours,
            extra=request.style,
            model_tag=config.models.strong,
            fallback_len=config.fallback_itinerary_len,
            prompt_dir=config.prompt_dir or None,
            warnings=warnings,
        )

    itinerary = timed("generate", _generate)
    timings["total"] = time.perf_counter() - t_total
    summaries = [
        poi_summary(snapshot.get(poi_id), order)
        for order, poi_id in enumerate(ordered_ids)
    ]
    return PlanResponse(
        itinerary=itinerary,
        ordered_pois=summaries,
        subrequests=decomposition,
        route_geojson=route_geojson(itinerary, snapshot),
        diagnostics={
            "warnings": warnings,
            "timings": timings,
            "seeds": {"sa_seed": config.spatial.sa_seed},
            "candidate_count": len(candidates),
            "cluster_count": len(selected),
        },
    )
