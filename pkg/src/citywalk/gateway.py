"""Provider-agnostic chat and embedding access with record/replay cassettes.

Live calls speak the common JSON-over-HTTP completion/embedding shape; record
mode persists responses keyed by a stable request fingerprint; replay mode
serves only from the cassette and never touches the network, which is what
makes the whole pipeline deterministic in tests and CI.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

DEFAULT_EMBED_DIM = 256

API_KEY_ENV = "CITYWALK_API_KEY"
BASE_URL_ENV = "CITYWALK_BASE_URL"


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    """Network-level failure; retried with backoff before surfacing."""


class CassetteMissError(GatewayError):
    def __init__(self, fingerprint: str):
        super().__init__(f"cassette miss for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    model_tag: str = "fast-model"
    temperature: float = 0.0
    max_tokens: int = 2048

    def __post_init__(self) -> None:
        if not self.prompt:
            raise GatewayError("empty prompt")
        if not (math.isfinite(self.temperature) and self.temperature >= 0):
            raise GatewayError("temperature must be a finite non-negative real")


def normalize_prompt(text: str) -> str:
    """Collapse line-ending and trailing-whitespace differences."""
    unified = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in unified.split("\n")).rstrip("\n")


def fingerprint_chat(req: ChatRequest) -> str:
    payload = json.dumps(
        ["chat", req.model_tag, repr(req.temperature), normalize_prompt(req.prompt)],
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def fingerprint_embed(text: str, model_tag: str) -> str:
    payload = json.dumps(["embed", model_tag, normalize_prompt(text)], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Cassette:
    """JSON-backed map of request fingerprint to recorded response text."""

    def __init__(self, entries: dict[str, dict] | None = None, path: str | Path | None = None):
        self.entries = dict(entries or {})
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> "Cassette":
        p = Path(path)
        if p.exists():
            entries = json.loads(p.read_text(encoding="utf-8"))
        else:
            entries = {}
        return cls(entries, path=p)

    def get(self, fingerprint: str) -> str:
        try:
            return self.entries[fingerprint]["response"]
        except KeyError:
            raise CassetteMissError(fingerprint) from None

    def put(self, fingerprint: str, response: str, model_tag: str) -> None:
        with self._lock:
            self.entries[fingerprint] = {
                "response": response,
                "model_tag": model_tag,
                "recorded_at": datetime.now(timezone.utc).isoformat(),
            }
            if self.path is not None:
                self._flush()

    def _flush(self) -> None:
        body = json.dumps(self.entries, ensure_ascii=False, indent=2, sort_keys=True)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(body + "\n", encoding="utf-8")

    def save(self, path: str | Path | None = None) -> None:
        if path is not None:
            self.path = Path(path)
        if self.path is None:
            raise GatewayError("cassette has no path to save to")
        with self._lock:
            self._flush()


class Transport(Protocol):
    def chat(self, req: ChatRequest) -> str: ...

    def embed(self, texts: list[str], model_tag: str) -> list[list[float]]: ...


class HttpTransport:
    """OpenAI-compatible JSON-over-HTTP provider client."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 60.0,
    ):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV, "")).rstrip("/")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self.timeout_s = timeout_s
        if not self.base_url:
            raise GatewayError(f"no provider base URL (set {BASE_URL_ENV})")

    def _post(self, route: str, body: dict) -> dict:
        import httpx

        try:
            resp = httpx.post(
                f"{self.base_url}{route}",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            return resp.json()
        except Exception as exc:  # noqa: BLE001 - network errors become retriable
            raise TransportError(f"provider call failed: {exc}") from exc

    def chat(self, req: ChatRequest) -> str:
        data = self._post(
            "/chat/completions",
            {
                "model": req.model_tag,
                "messages": [{"role": "user", "content": req.prompt}],
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
            },
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed provider response: {exc}") from exc

    def embed(self, texts: list[str], model_tag: str) -> list[list[float]]:
        data = self._post("/embeddings", {"model": model_tag, "input": texts})
        try:
            rows = sorted(data["data"], key=lambda r: r["index"])
            return [list(map(float, r["embedding"])) for r in rows]
        except (KeyError, TypeError) as exc:
            raise TransportError(f"malformed provider response: {exc}") from exc


class CallableTransport:
    """Test/recording transport backed by plain callables."""

    def __init__(
        self,
        chat_fn: Callable[[ChatRequest], str] | None = None,
        embed_fn: Callable[[list[str], str], list[list[float]]] | None = None,
    ):
        self._chat_fn = chat_fn
        self._embed_fn = embed_fn

    def chat(self, req: ChatRequest) -> str:
        if self._chat_fn is None:
            raise TransportError("no chat function configured")
        return self._chat_fn(req)

    def embed(self, texts: list[str], model_tag: str) -> list[list[float]]:
        if self._embed_fn is None:
            raise TransportError("no embed function configured")
        return self._embed_fn(texts, model_tag)


class FailingTransport:
    """Raises on any contact; proves replay mode performs no I/O."""

    def chat(self, req: ChatRequest) -> str:
        raise AssertionError("network contact attempted in replay mode")

    def embed(self, texts: list[str], model_tag: str) -> list[list[float]]:
        raise AssertionError("network contact attempted in replay mode")


def stub_embed(text: str, dim: int = DEFAULT_EMBED_DIM) -> list[float]:
    """Deterministic offline embedding.

    Each whitespace token is hashed to 8 coordinate indices with +/-1
    contributions and the sum is L2-normalized. Token overlap therefore
    raises cosine similarity, which is all retrieval tests need. Tokenless
    input returns a fixed basis vector rather than failing.
    """
    vec = np.zeros(dim)
    tokens = text.split()
    if not tokens:
        vec[0] = 1.0
        return vec.tolist()
    for token in tokens:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        for k in range(8):
            idx = int.from_bytes(digest[2 * k : 2 * k + 2], "big") % dim
            sign = 1.0 if digest[16 + k] & 1 else -1.0
            vec[idx] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec.tolist()
    return (vec / norm).tolist()


class _TokenBucket:
    def __init__(self, rate_per_s: float, sleeper: Callable[[float], None]):
        self.rate = rate_per_s
        self.capacity = max(1.0, rate_per_s)
        self.tokens = self.capacity
        self.updated = time.monotonic()
        self._sleep = sleeper
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self._sleep(wait)


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    backoff_s: float = 0.5


class LLMGateway:
    """Mode-switched front door for chat and embeddings.

    Modes: ``live`` calls the transport; ``record`` calls and persists to the
    cassette; ``replay`` serves the cassette only (a miss is a hard error);
    ``stub`` serves deterministic offline embeddings and refuses chat.
    """

    MODES = ("live", "record", "replay", "stub")

    def __init__(
        self,
        mode: str = "replay",
        transport: Transport | None = None,
        cassette: Cassette | None = None,
        embed_dim: int = DEFAULT_EMBED_DIM,
        retry: RetryPolicy | None = None,
        rate_limit_per_s: float | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if mode not in self.MODES:
            raise GatewayError(f"unknown gateway mode {mode!r}")
        self.mode = mode
        self.transport = transport
        self.cassette = cassette if cassette is not None else Cassette()
        self.embed_dim = embed_dim
        self.retry = retry or RetryPolicy()
        self._sleep = sleeper
        self._bucket = _TokenBucket(rate_limit_per_s, sleeper) if rate_limit_per_s else None

    def _call_with_retries(self, fn: Callable[[], object]) -> object:
        if self._bucket is not None:
            self._bucket.acquire()
        delay = self.retry.backoff_s
        last: Exception | None = None
        for attempt in range(self.retry.max_attempts):
            try:
                return fn()
            except TransportError as exc:
                last = exc
                if attempt + 1 < self.retry.max_attempts:
                    self._sleep(delay)
                    delay *= 2
        raise last  # type: ignore[misc]

    def _require_transport(self) -> Transport:
        if self.transport is None:
            raise GatewayError(f"mode {self.mode!r} requires a transport")
        return self.transport

    def chat(self, req: ChatRequest) -> str:
        fp = fingerprint_chat(req)
        if self.mode == "replay":
            return self.cassette.get(fp)
        if self.mode == "stub":
            raise GatewayError("chat is unavailable in stub mode")
        transport = self._require_transport()
        text = self._call_with_retries(lambda: transport.chat(req))
        if self.mode == "record":
            self.cassette.put(fp, text, req.model_tag)
        return text

    def embed(self, texts: list[str], model_tag: str = "embedder") -> list[list[float]]:
        if not texts:
            raise GatewayError("embed requires at least one text")
        if self.mode == "stub":
            return [stub_embed(t, self.embed_dim) for t in texts]
        if self.mode == "replay":
            out = []
            for t in texts:
                raw = self.cassette.get(fingerprint_embed(t, model_tag))
                out.append([float(x) for x in json.loads(raw)])
            return out
        transport = self._require_transport()
        vectors = self._call_with_retries(lambda: transport.embed(texts, model_tag))
        dims = {len(v) for v in vectors}
        if len(vectors) != len(texts) or len(dims) != 1:
            raise GatewayError("provider returned a malformed embedding batch")
        if self.mode == "record":
            for t, v in zip(texts, vectors):
                self.cassette.put(fingerprint_embed(t, model_tag), json.dumps(v), model_tag)
        return vectors
