"""Command-line front door: plan, ingest, eval, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

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
from .config import AppConfig, load_config
from .gateway import Cassette, HttpTransport, LLMGateway, RetryPolicy
from .pipeline import PlanRequest, plan
from .store import POIStore, StaticGeocoder, load_ground_truth


def _build_gateway(config: AppConfig, mode: str | None, cassette_path: str | None) -> LLMGateway:
    mode = mode or config.gateway.mode
    cassette_file = cassette_path or config.gateway.cassette
    cassette = Cassette.load(cassette_file) if cassette_file else Cassette()
    transport = None
    if mode in ("live", "record"):
        transport = HttpTransport()
    return LLMGateway(
        mode=mode,
        transport=transport,
        cassette=cassette,
        embed_dim=config.models.dim,
        retry=RetryPolicy(config.models.retries, config.models.backoff_s),
    )


def _load_store(config: AppConfig, store_path: str | None) -> POIStore:
    path = store_path or config.store_path
    if not path:
        raise click.UsageError("no POI store configured (use --store or config store_path)")
    return POIStore.load(path, dim=config.models.dim)


def _settings(config: AppConfig) -> PipelineSettings:
    return PipelineSettings(
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


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="INI config file.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Plan personalized single-day city itineraries from natural language."""
    ctx.obj = load_config(config_path)


@main.command("plan")
@click.option("--city", default="", help="City whose POI store to plan over.")
@click.option("--request", "request_text", required=True, help="Natural-language request.")
@click.option("--style", default="", help="Extra style guidance for the narrative.")
@click.option("--out", "out_format", type=click.Choice(["json", "geojson", "text"]), default="text")
@click.option("--store", "store_path", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["live", "record", "replay", "stub"]), default=None)
@click.option("--cassette", type=click.Path(), default=None)
@click.pass_obj
def plan_cmd(
    config: AppConfig,
    city: str,
    request_text: str,
    style: str,
    out_format: str,
    store_path: str | None,
    mode: str | None,
    cassette: str | None,
) -> None:
    """Generate an itinerary and print it to stdout."""
    store = _load_store(config, store_path)
    gateway = _build_gateway(config, mode, cassette)
    response = plan(PlanRequest(request=request_text, city=city, style=style), store, gateway, config)
    if out_format == "json":
        click.echo(response.to_json(include_timings=False))
    elif out_format == "geojson":
        click.echo(json.dumps(response.route_geojson, sort_keys=True))
    else:
        itinerary = response.itinerary
        names = {p["poi_id"]: p["name"] for p in response.ordered_pois}
        for order, poi_id in enumerate(itinerary.poi_ids, start=1):
            click.echo(f"{order}. {names.get(poi_id, poi_id)}")
        click.echo("")
        click.echo(itinerary.narrative)
        for warning in response.diagnostics.get("warnings", []):
            click.echo(f"warning: {warning}", err=True)


@main.command("ingest")
@click.option("--city", required=True)
@click.option("--file", "post_file", type=click.Path(exists=True), required=True)
@click.option("--store", "store_path", type=click.Path(), default=None)
@click.option("--geocoder", "geocoder_path", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["live", "record", "replay", "stub"]), default=None)
@click.option("--cassette", type=click.Path(), default=None)
@click.pass_obj
def ingest_cmd(
    config: AppConfig,
    city: str,
    post_file: str,
    store_path: str | None,
    geocoder_path: str | None,
    mode: str | None,
    cassette: str | None,
) -> None:
    """Extract POIs from a travel post file and add them to the store."""
    store = _load_store(config, store_path)
    gateway = _build_gateway(config, mode, cassette)
    geo_path = geocoder_path or config.geocoder_path
    if not geo_path:
        raise click.UsageError("no geocoder file configured")
    geocoder = StaticGeocoder.from_store(POIStore.load(geo_path))
    post_text = Path(post_file).read_text(encoding="utf-8")
    report = store.ingest_post(post_text, city, gateway, geocoder)
    target = store_path or config.store_path
    store.save(target)
    click.echo(json.dumps({"stored_ids": report.stored_ids, "skipped": report.skipped}))


@main.command("eval")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True)
@click.option("--generators", default="full", help="Comma-separated generator names.")
@click.option("--store", "store_path", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["live", "record", "replay", "stub"]), default=None)
@click.option("--cassette", type=click.Path(), default=None)
@click.option("--out", "out_format", type=click.Choice(["table", "json"]), default="table")
@click.option("--city", default="", help="City label for the pure-LLM baseline.")
@click.pass_obj
def eval_cmd(
    config: AppConfig,
    dataset_path: str,
    generators: str,
    store_path: str | None,
    mode: str | None,
    cassette: str | None,
    out_format: str,
    city: str,
) -> None:
    """Run the metric comparison over a ground-truth dataset."""
    store = _load_store(config, store_path)
    gateway = _build_gateway(config, mode, cassette)
    settings = _settings(config)
    if not city and len(store):
        city = store.all_pois()[0].city
    available = {
        "full": lambda: FullPipelineGenerator(store, gateway, settings),
        "no-rd": lambda: NoRDGenerator(store, gateway, settings),
        "no-ppr": lambda: NoPPRGenerator(store, gateway, settings),
        "no-cso": lambda: NoCSOGenerator(store, gateway, settings),
        "rating-greedy": lambda: RatingGreedyGenerator(store, gateway, settings),
        "llm-baseline": lambda: LLMBaselineGenerator(gateway, city=city, settings=settings),
    }
    names = [g.strip() for g in generators.split(",") if g.strip()]
    unknown = [g for g in names if g not in available]
    if unknown:
        raise click.UsageError(f"unknown generators {unknown}; choose from {sorted(available)}")
    dataset = load_ground_truth(dataset_path, store)
    resolver = StaticGeocoder.from_store(store)
    report = run_comparison(
        [available[g]() for g in names],
        dataset,
        store,
        resolver=resolver,
        fuzzy_threshold=config.eval.fuzzy_threshold,
    )
    if out_format == "json":
        click.echo(report.to_json())
    else:
        click.echo(report.to_table())


@main.command("serve")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--store", "store_path", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["live", "record", "replay", "stub"]), default=None)
@click.option("--cassette", type=click.Path(), default=None)
@click.pass_obj
def serve_cmd(
    config: AppConfig,
    host: str | None,
    port: int | None,
    store_path: str | None,
    mode: str | None,
    cassette: str | None,
) -> None:
    """Serve the HTTP API."""
    import uvicorn

    from .service import create_app

    store = _load_store(config, store_path)
    gateway = _build_gateway(config, mode, cassette)
    geocoder = None
    if config.geocoder_path:
        geocoder = StaticGeocoder.from_store(POIStore.load(config.geocoder_path))
    app = create_app(store, gateway, config, geocoder)
    uvicorn.run(app, host=host or config.service.host, port=port or config.service.port)


if __name__ == "__main__":
    main(sys.argv[1:])
