"""HTTP front door: plan, POI listing, ingestion, and evaluation endpoints."""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .compare import (
    FullPipelineGenerator,
    LLMBaselineGenerator,
    NoCSOGenerator,
    NoPPRGenerator,
    NoRDGenerator,
    PipelineSettings,
    RatingGreedyGenerator,
    run_comparison,
)
from .config import AppConfig
from .gateway import CassetteMissError, GatewayError, LLMGateway
from .pipeline import PlanError, PlanRequest, PlanResponse, plan
from .store import Geocoder, GroundTruthItinerary, POIStore, StoreError


class PlanBody(BaseModel):
    request: str
    city: str = ""
    style: str = ""


class IngestBody(BaseModel):
    post_text: str
    city: str


class CompareBody(BaseModel):
    generators: list[str]
    dataset: list[dict[str, Any]]


def _error(status: int, code: str, stage: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "stage": stage, "message": message},
    )


def create_app(
    store: POIStore,
    gateway: LLMGateway,
    config: AppConfig | None = None,
    geocoder: Geocoder | None = None,
) -> FastAPI:
    config = config or AppConfig()
    app = FastAPI(title="citywalk", version="1")

    @app.middleware("http")
    async def limit_body_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and int(length) > config.service.max_body_bytes:
            return _error(413, "payload_too_large", "validate", "request body too large")
        return await call_next(request)

    @app.get("/healthz")
    def healthz() -> str:
        return "ok"

    @app.post("/v1/plan")
    def plan_endpoint(body: PlanBody):
        if not body.request.strip():
            return _error(400, "bad_request", "validate", "empty request")
        try:
            response: PlanResponse = plan(
                PlanRequest(request=body.request, city=body.city, style=body.style),
                store,
                gateway,
                config,
            )
        except PlanError as exc:
            return _error(502, "stage_failed", exc.stage, exc.stage_message)
        except (CassetteMissError, GatewayError) as exc:
            return _error(502, "gateway_failed", "gateway", str(exc))
        return response.to_dict(include_timings=True)

    @app.get("/v1/pois")
    def list_pois(
        city: str = Query(default=""),
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=0, ge=0),
    ):
        size = page_size or config.service.page_size
        pois = [p for p in store.all_pois() if not city or p.city == city]
        start = (page - 1) * size
        chunk = pois[start : start + size]
        return {
            "total": len(pois),
            "page": page,
            "page_size": size,
            "pois": [
                {
                    "poi_id": p.id,
                    "name": p.name,
                    "city": p.city,
                    "category": p.category,
                    "rating": p.rating,
                    "longitude": p.location.longitude,
                    "latitude": p.location.latitude,
                    "description": p.description,
                }
                for p in chunk
            ],
        }

    @app.post("/v1/pois/ingest")
    def ingest(body: IngestBody):
        if geocoder is None:
            return _error(503, "no_geocoder", "ingest", "no geocoder configured")
        if not body.post_text.strip():
            return _error(400, "bad_request", "ingest", "empty post text")
        try:
            report = store.ingest_post(body.post_text, body.city, gateway, geocoder)
        except StoreError as exc:
            return _error(502, "ingest_failed", "ingest", str(exc))
        return {
            "stored_ids": report.stored_ids,
            "skipped": report.skipped,
            "warnings": report.warnings,
        }

    @app.post("/v1/eval/compare")
    def compare(body: CompareBody, x_admin_token: str = Header(default="")):
        if not config.service.admin_token or x_admin_token != config.service.admin_token:
            return _error(403, "forbidden", "eval", "admin token required")
        settings = PipelineSettings(
            k_per_subrequest=config.retrieval.k_per_subrequest,
            k_final=config.retrieval.k_final,
            tau_m=config.spatial.tau_meters,
            n_candidates=config.spatial.n_candidates,
            max_exact_n=config.spatial.exact_solver_max_n,
            sa_params=config.spatial.sa_params(),
            embed_model_tag=config.models.embedder,
            fast_model_tag=config.models.fast,
            strong_model_tag=config.models.strong,
            prompt_dir=config.prompt_dir or None,
        )
        baseline_city = store.all_pois()[0].city if len(store) else ""
        available = {
            "full": lambda: FullPipelineGenerator(store, gateway, settings),
            "no-rd": lambda: NoRDGenerator(store, gateway, settings),
            "no-ppr": lambda: NoPPRGenerator(store, gateway, settings),
            "no-cso": lambda: NoCSOGenerator(store, gateway, settings),
            "rating-greedy": lambda: RatingGreedyGenerator(store, gateway, settings),
            "llm-baseline": lambda: LLMBaselineGenerator(
                gateway, city=baseline_city, settings=settings
            ),
        }
        unknown = [g for g in body.generators if g not in available]
        if unknown:
            return _error(400, "bad_request", "eval", f"unknown generators {unknown}")
        dataset = []
        for item in body.dataset:
            try:
                dataset.append(
                    GroundTruthItinerary(
                        str(item["request"]), tuple(int(i) for i in item["truth_ids"])
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                return _error(400, "bad_request", "eval", f"bad dataset row: {exc}")
        if not dataset:
            return _error(400, "bad_request", "eval", "empty dataset")
        resolver = geocoder
        report = run_comparison(
            [available[g]() for g in body.generators],
            dataset,
            store,
            resolver=resolver,
            fuzzy_threshold=config.eval.fuzzy_threshold,
        )
        return {"summary": report.summary, "rows": [vars(r) for r in report.rows]}

    return app
