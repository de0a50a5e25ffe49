"""Generator adapters and the metric comparison harness.

Adapters wrap the full pipeline, its ablations (no decomposition, no
retrieval, no spatial ordering), a rating-greedy baseline, and a pure-LLM
baseline that plans from model knowledge alone. The harness runs every
generator over a request dataset, scores each itinerary, and aggregates
means per generator into machine- and human-readable tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .decomposition import Decomposition, SubRequest, decompose
from .gateway import ChatRequest, LLMGateway
from .generation import estimate_time_budget, generate
from .metrics import average_margin, fail_rate, overlaps, recall_rate
from .parsing import PayloadError, extract_json_object
from .prompts import render_prompt
from .retrieval import ScoredPOI, fuse, retrieve
from .spatial import SAParams, cluster_and_select, order_pois
from .store import Geocoder, GroundTruthItinerary, POIStore
from .fuzzy import token_set_ratio


class ComparisonError(Exception):
    pass


@dataclass
class GeneratedPlan:
    poi_ids: list[int] = field(default_factory=list)
    poi_names: list[str] = field(default_factory=list)


class Generator(Protocol):
    name: str
    db_constrained: bool

    def generate(self, request: str) -> GeneratedPlan: ...


@dataclass
class PipelineSettings:
    k_per_subrequest: int = 30
    k_final: int = 30
    tau_m: float = 1000.0
    n_candidates: int = 15
    max_exact_n: int = 18
    sa_params: SAParams = field(default_factory=SAParams)
    embed_model_tag: str = "embedder"
    fast_model_tag: str = "fast-model"
    strong_model_tag: str = "strong-model"
    prompt_dir: str | None = None


class FullPipelineGenerator:
    """Decompose, retrieve, cluster, order, generate."""

    name = "full"
    db_constrained = True

    def __init__(self, store: POIStore, gateway: LLMGateway,
                 settings: PipelineSettings | None = None):
        self.store = store
        self.gateway = gateway
        self.settings = settings or PipelineSettings()

    def _decompose(self, request: str) -> Decomposition:
        return decompose(
            request, self.gateway,
            model_tag=self.settings.fast_model_tag,
            prompt_dir=self.settings.prompt_dir,
        )

    def _retrieve(self, decomposition: Decomposition):
        return retrieve(
            decomposition, self.store, self.gateway,
            k_per_subrequest=self.settings.k_per_subrequest,
            k_final=self.settings.k_final,
            model_tag=self.settings.embed_model_tag,
        )

    def generate(self, request: str) -> GeneratedPlan:
        s = self.settings
        decomposition = self._decompose(request)
        result = self._retrieve(decomposition)
        scored = [(self.store.get(c.poi_id), c.score) for c in result.candidates]
        clusters, candidates = cluster_and_select(scored, s.tau_m, s.n_candidates)
        selected = [c for c in clusters if c.member_ids <= set(candidates)]
        ordered_ids = order_pois(
            selected, candidates, self.store, decomposition, self.gateway,
            sa_params=s.sa_params, tau=s.tau_m, max_exact_n=s.max_exact_n,
            model_tag=s.fast_model_tag, prompt_dir=s.prompt_dir,
        )
        itinerary = generate(
            request, decomposition, [self.store.get(i) for i in ordered_ids],
            self.gateway, model_tag=s.strong_model_tag, prompt_dir=s.prompt_dir,
        )
        return GeneratedPlan(poi_ids=list(itinerary.poi_ids))


class NoRDGenerator(FullPipelineGenerator):
    """Ablation: the whole request string is embedded as a single preference."""

    name = "no-rd"

    def _decompose(self, request: str) -> Decomposition:
        return Decomposition((SubRequest(pos=request),), raw_request=request)


class NoPPRGenerator(FullPipelineGenerator):
    """Ablation: retrieval is skipped; every stored POI is a candidate."""

    name = "no-ppr"

    def _retrieve(self, decomposition: Decomposition):
        slate = tuple(ScoredPOI(p.id, 1.0) for p in self.store.all_pois())
        return fuse({0: slate}, [], k=max(len(slate), 1))


class NoCSOGenerator(FullPipelineGenerator):
    """Ablation: no spatial ordering; the model owns the visit order."""

    name = "no-cso"

    def generate(self, request: str) -> GeneratedPlan:
        s = self.settings
        decomposition = self._decompose(request)
        result = self._retrieve(decomposition)
        ordered = [self.store.get(c.poi_id) for c in result.candidates]
        itinerary = generate(
            request, decomposition, ordered, self.gateway,
            model_tag=s.strong_model_tag, coerce_order=False, prompt_dir=s.prompt_dir,
        )
        return GeneratedPlan(poi_ids=list(itinerary.poi_ids))


class RatingGreedyGenerator:
    """Utility-style baseline: LLM time budget, then top-rated POIs."""

    name = "rating-greedy"
    db_constrained = True

    def __init__(self, store: POIStore, gateway: LLMGateway,
                 settings: PipelineSettings | None = None):
        self.store = store
        self.gateway = gateway
        self.settings = settings or PipelineSettings()

    def generate(self, request: str) -> GeneratedPlan:
        hours = estimate_time_budget(
            request, self.gateway,
            model_tag=self.settings.fast_model_tag,
            prompt_dir=self.settings.prompt_dir,
        )
        count = max(2, min(10, round(hours / 1.5)))
        ranked = sorted(self.store.all_pois(), key=lambda p: (-p.rating, p.id))
        return GeneratedPlan(poi_ids=[p.id for p in ranked[:count]])


class LLMBaselineGenerator:
    """Pure-LLM baseline planning from model knowledge; emits names."""

    name = "llm-baseline"
    db_constrained = False

    def __init__(self, gateway: LLMGateway, city: str,
                 settings: PipelineSettings | None = None):
        self.gateway = gateway
        self.city = city
        self.settings = settings or PipelineSettings()

    def generate(self, request: str) -> GeneratedPlan:
        s = self.settings
        hours = estimate_time_budget(
            request, self.gateway, model_tag=s.fast_model_tag, prompt_dir=s.prompt_dir
        )
        prompt = render_prompt(
            "llm_baseline", prompt_dir=s.prompt_dir,
            city=self.city, request=request, hours=f"{hours:g}",
        )
        raw = self.gateway.chat(
            ChatRequest(prompt=prompt, model_tag=s.strong_model_tag, temperature=0.7)
        )
        try:
            payload = extract_json_object(raw)
            names = [n for n in payload.get("poi_names", []) if isinstance(n, str) and n]
        except PayloadError:
            names = []
        if not names:
            raise ComparisonError("baseline produced no POI names")
        return GeneratedPlan(poi_names=names)


def resolve_names_to_ids(
    names: Sequence[str], store: POIStore, threshold: float = 80.0
) -> list[int]:
    """Fuzzy-match generated names onto stored POIs; misses are dropped."""
    ids: list[int] = []
    for name in names:
        best_id, best_ratio = None, -1.0
        for poi in store.all_pois():
            r = token_set_ratio(name, poi.name)
            if r > best_ratio:
                best_id, best_ratio = poi.id, r
        if best_id is not None and best_ratio >= threshold and best_id not in ids:
            ids.append(best_id)
    return ids


@dataclass
class ComparisonRow:
    generator: str
    request_index: int
    recall: float | None = None
    margin_m: float | None = None
    overlap_count: int | None = None
    failure_rate: float | None = None
    error: str | None = None
    notes: str = ""


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    summary: dict[str, dict[str, float | None]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "rows": [vars(r) for r in self.rows],
                "summary": self.summary,
            },
            indent=2,
            sort_keys=True,
        )

    def to_table(self, sep: str = "\t") -> str:
        header = sep.join(["generator", "RR", "AM_m", "OL", "FR", "failures"])
        lines = [header]
        for name in sorted(self.summary):
            s = self.summary[name]

            def cell(key: str) -> str:
                v = s.get(key)
                return "n/a" if v is None else f"{v:.4f}"

            lines.append(
                sep.join(
                    [
                        name,
                        cell("recall"),
                        cell("margin_m"),
                        cell("overlaps"),
                        cell("fail_rate"),
                        str(int(s.get("failures") or 0)),
                    ]
                )
            )
        return "\n".join(lines)


def run_comparison(
    generators: Sequence[Generator],
    dataset: Sequence[GroundTruthItinerary],
    store: POIStore,
    resolver: Geocoder | None = None,
    fuzzy_threshold: float = 80.0,
) -> ComparisonReport:
    """Score every generator over the dataset; failures are rows, not aborts."""
    if not dataset:
        raise ComparisonError("empty dataset")
    rows: list[ComparisonRow] = []
    for generator in generators:
        for index, case in enumerate(dataset):
            row = ComparisonRow(generator=generator.name, request_index=index)
            try:
                plan = generator.generate(case.user_request)
                notes: list[str] = []
                if plan.poi_names and not plan.poi_ids:
                    if resolver is not None:
                        row.failure_rate = fail_rate(
                            plan.poi_names, resolver, fuzzy_threshold
                        )
                    plan.poi_ids = resolve_names_to_ids(
                        plan.poi_names, store, fuzzy_threshold
                    )
                elif not generator.db_constrained and resolver is not None:
                    names = [store.get(i).name for i in plan.poi_ids]
                    row.failure_rate = fail_rate(names, resolver, fuzzy_threshold)
                row.recall = recall_rate(plan.poi_ids, case.poi_ids)
                if len(plan.poi_ids) >= 2:
                    margin, exact = average_margin(plan.poi_ids, store)
                    row.margin_m = margin
                    if not exact:
                        notes.append("margin approximate (annealed reference)")
                    row.overlap_count = overlaps(plan.poi_ids, store)
                else:
                    notes.append("too few resolved POIs for spatial metrics")
                row.notes = "; ".join(notes)
            except Exception as exc:  # noqa: BLE001 - failures become rows
                row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    rows.sort(key=lambda r: (r.generator, r.request_index))
    summary: dict[str, dict[str, float | None]] = {}
    for generator in generators:
        g_rows = [r for r in rows if r.generator == generator.name and r.error is None]
        failures = sum(
            1 for r in rows if r.generator == generator.name and r.error is not None
        )

        def mean(values: list[float]) -> float | None:
            return sum(values) / len(values) if values else None

        summary[generator.name] = {
            "recall": mean([r.recall for r in g_rows if r.recall is not None]),
            "margin_m": mean([r.margin_m for r in g_rows if r.margin_m is not None]),
            "overlaps": mean(
                [float(r.overlap_count) for r in g_rows if r.overlap_count is not None]
            ),
            "fail_rate": (
                mean([r.failure_rate for r in g_rows if r.failure_rate is not None])
                if not generator.db_constrained
                else None
            ),
            "failures": float(failures),
        }
    return ComparisonReport(rows=rows, summary=summary)
