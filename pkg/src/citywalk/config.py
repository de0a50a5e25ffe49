"""Dataclass configuration with INI-file loading and environment overrides."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .spatial import SAParams

CONFIG_PATH_ENV = "CITYWALK_CONFIG"
ENV_PREFIX = "CITYWALK"


class ConfigError(Exception):
    pass


@dataclass
class ModelsConfig:
    fast: str = "fast-model"
    strong: str = "strong-model"
    embedder: str = "embedder"
    dim: int = 256
    retries: int = 3
    backoff_s: float = 0.5


@dataclass
class RetrievalConfig:
    k_per_subrequest: int = 30
    k_final: int = 30
    mustsee_score: float = 1e6


@dataclass
class SpatialConfig:
    tau_meters: float = 1000.0
    n_candidates: int = 15
    exact_solver_max_n: int = 18
    sa_t_init: float = 5000.0
    sa_t_min: float = 1e-3
    sa_alpha: float = 0.99
    sa_max_iters: int = 200_000
    sa_seed: int = 0

    def sa_params(self) -> SAParams:
        return SAParams(
            t_init=self.sa_t_init,
            t_min=self.sa_t_min,
            alpha=self.sa_alpha,
            max_iters=self.sa_max_iters,
            seed=self.sa_seed,
        )


@dataclass
class EvalConfig:
    fuzzy_threshold: float = 80.0
    judge_trials: int = 10
    judge_seed: int = 0


@dataclass
class GatewayConfig:
    mode: str = "replay"
    cassette: str = ""


@dataclass
class ServiceConfig:
    admin_token: str = ""
    max_body_bytes: int = 1_000_000
    page_size: int = 50
    host: str = "127.0.0.1"
    port: int = 8000


@dataclass
class AppConfig:
    models: ModelsConfig = field(default_factory=ModelsConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    store_path: str = ""
    geocoder_path: str = ""
    prompt_dir: str = ""
    fallback_itinerary_len: int = 6

    _SECTIONS = ("models", "retrieval", "spatial", "eval", "gateway", "service")
    _TOP_LEVEL = ("store_path", "geocoder_path", "prompt_dir", "fallback_itinerary_len")


def _convert(value: str, target_type: type):
    if target_type is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    return value


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    """Build AppConfig from defaults, then an INI file, then env overrides.

    The file uses one section per config group; the sa.* keys live in the
    [spatial] section as ``sa.t_init`` etc. Environment variables override
    file values and are named CITYWALK_<SECTION>_<KEY> (dots become
    underscores), e.g. CITYWALK_SPATIAL_SA_T_INIT.
    """
    env = dict(os.environ if env is None else env)
    config = AppConfig()
    chosen = path or env.get(CONFIG_PATH_ENV)
    parser = configparser.ConfigParser()
    if chosen:
        p = Path(chosen)
        if not p.exists():
            raise ConfigError(f"no config file at {p}")
        parser.read(p, encoding="utf-8")

    def apply(section_name: str, target) -> None:
        for f in fields(target):
            key = f.name
            ini_key = f"sa.{key[3:]}" if key.startswith("sa_") else key
            value: str | None = None
            if parser.has_option(section_name, ini_key):
                value = parser.get(section_name, ini_key)
            env_key = f"{ENV_PREFIX}_{section_name}_{key}".upper()
            if env_key in env:
                value = env[env_key]
            if value is not None:
                try:
                    setattr(target, key, _convert(value, f.type if isinstance(f.type, type) else type(getattr(target, key))))
                except ValueError as exc:
                    raise ConfigError(f"[{section_name}] {ini_key}: {exc}") from exc

    for section in AppConfig._SECTIONS:
        apply(section, getattr(config, section))
    for key in AppConfig._TOP_LEVEL:
        value = None
        if parser.has_option("main", key):
            value = parser.get("main", key)
        env_key = f"{ENV_PREFIX}_MAIN_{key}".upper()
        if env_key in env:
            value = env[env_key]
        if value is not None:
            current = getattr(config, key)
            setattr(config, key, _convert(value, type(current)))
    return config
