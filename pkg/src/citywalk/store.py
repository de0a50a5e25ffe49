"""User-owned POI database: typed records, embeddings, persistence, ingestion.

Storage is deliberately plain: one POI per line as tab-separated key=value
pairs, embeddings in a sidecar keyed by id and model tag. Files are written
canonically (sorted ids, fixed key order, repr floats) so identical content
is byte-identical on disk.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .fuzzy import token_set_ratio
from .gateway import ChatRequest, GatewayError, LLMGateway, TransportError
from .geo import GeoPoint
from .parsing import PayloadError, extract_json_array
from .prompts import render_prompt

CATEGORIES = ("site", "restaurant", "entertainment", "shop", "nature", "other")

_POI_KEYS = (
    "id",
    "name",
    "address",
    "city",
    "description",
    "longitude",
    "latitude",
    "rating",
    "category",
)


class StoreError(Exception):
    pass


class DuplicatePOIError(StoreError):
    pass


class MissingEmbeddingError(StoreError):
    def __init__(self, missing_ids: list[int]):
        super().__init__(f"POIs missing embeddings: {missing_ids}")
        self.missing_ids = missing_ids


class MalformedRecordError(StoreError):
    pass


class IngestError(StoreError):
    """Raised when ingestion dies mid-way; carries what was stored so far."""

    def __init__(self, message: str, stored_ids: list[int], skipped: list[str]):
        super().__init__(message)
        self.stored_ids = stored_ids
        self.skipped = skipped


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class POI:
    name: str
    address: str
    city: str
    description: str
    location: GeoPoint
    rating: float
    category: str
    id: int | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise StoreError("POI requires a name")
        if not (math.isfinite(self.rating) and 0.0 <= self.rating <= 5.0):
            raise StoreError(f"rating {self.rating} outside [0, 5]")
        if self.category not in CATEGORIES:
            raise StoreError(f"unknown category {self.category!r}")

    @property
    def context(self) -> str:
        """Canonical concatenation of the descriptive fields; never stored."""
        return "; ".join(
            [
                self.name,
                self.address,
                self.city,
                self.description,
                f"rating: {_fmt(self.rating)}",
                f"category: {self.category}",
            ]
        )


@dataclass(frozen=True)
class EmbeddingRecord:
    poi_id: int
    vector: tuple[float, ...]
    model_tag: str

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.vector):
            raise StoreError(f"embedding for POI {self.poi_id} has non-finite entries")


@dataclass(frozen=True)
class GroundTruthItinerary:
    user_request: str
    poi_ids: tuple[int, ...]


@dataclass(frozen=True)
class GeocodeResult:
    name: str
    address: str
    location: GeoPoint
    rating: float
    category: str


class Geocoder(Protocol):
    def lookup(self, name: str, city: str) -> GeocodeResult | None: ...


class StaticGeocoder:
    """Offline geocoder over a fixed record list with fuzzy name matching."""

    def __init__(self, records: Iterable[GeocodeResult], min_ratio: float = 80.0):
        self.records = list(records)
        self.min_ratio = min_ratio

    @classmethod
    def from_store(cls, store: "POIStore", min_ratio: float = 80.0) -> "StaticGeocoder":
        records = [
            GeocodeResult(p.name, p.address, p.location, p.rating, p.category)
            for p in store.all_pois()
        ]
        return cls(records, min_ratio)

    def lookup(self, name: str, city: str = "") -> GeocodeResult | None:
        best: GeocodeResult | None = None
        best_ratio = -1.0
        for rec in self.records:
            r = token_set_ratio(name, rec.name)
            if r > best_ratio:
                best, best_ratio = rec, r
        if best is None or best_ratio < self.min_ratio:
            return None
        return best


@dataclass
class IngestReport:
    stored_ids: list[int]
    skipped: list[str]
    warnings: list[str]


def _escape(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


class POIStore:
    """Single-writer, multi-reader store of POIs and their embeddings."""

    def __init__(self, dim: int = 256):
        self.dim = dim
        self._pois: dict[int, POI] = {}
        self._embeddings: dict[tuple[int, str], EmbeddingRecord] = {}
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._pois)

    def get(self, poi_id: int) -> POI:
        try:
            return self._pois[poi_id]
        except KeyError:
            raise StoreError(f"unknown POI id {poi_id}") from None

    def all_pois(self) -> list[POI]:
        with self._lock:
            return [self._pois[i] for i in sorted(self._pois)]

    def find_by_name(self, name: str, city: str | None = None) -> POI | None:
        needle = name.strip().lower()
        with self._lock:
            for i in sorted(self._pois):
                p = self._pois[i]
                if p.name.strip().lower() == needle and (city is None or p.city == city):
                    return p
        return None

    def _find_duplicate(self, poi: POI) -> POI | None:
        for other in self._pois.values():
            if (
                other.id != poi.id
                and other.name == poi.name
                and other.address == poi.address
                and other.city == poi.city
            ):
                return other
        return None

    def upsert_poi(self, poi: POI, force: bool = False) -> int:
        """Insert or replace a POI; stale embeddings for its id are dropped.

        A different POI with the same name+address+city is rejected unless
        ``force`` is set, in which case the existing record's id is adopted.
        """
        with self._lock:
            dup = self._find_duplicate(poi)
            if dup is not None:
                if not force:
                    raise DuplicatePOIError(
                        f"duplicate POI {poi.name!r} at {poi.address!r} in {poi.city}"
                    )
                poi = replace(poi, id=dup.id)
            if poi.id is None:
                poi = replace(poi, id=max(self._pois, default=0) + 1)
            changed = self._pois.get(poi.id) != poi
            self._pois[poi.id] = poi
            if changed:
                for key in [k for k in self._embeddings if k[0] == poi.id]:
                    del self._embeddings[key]
            return poi.id

    def set_embedding(self, poi_id: int, vector: Iterable[float], model_tag: str) -> None:
        vec = tuple(float(v) for v in vector)
        if len(vec) != self.dim:
            raise StoreError(f"embedding dimension {len(vec)} != store dimension {self.dim}")
        with self._lock:
            if poi_id not in self._pois:
                raise StoreError(f"unknown POI id {poi_id}")
            self._embeddings[(poi_id, model_tag)] = EmbeddingRecord(poi_id, vec, model_tag)

    def has_embedding(self, poi_id: int, model_tag: str) -> bool:
        return (poi_id, model_tag) in self._embeddings

    def embed_missing(self, gateway: LLMGateway, model_tag: str = "embedder") -> list[int]:
        """Compute embeddings from context for every POI lacking one."""
        with self._lock:
            missing = [i for i in sorted(self._pois) if (i, model_tag) not in self._embeddings]
            contexts = [self._pois[i].context for i in missing]
        if not missing:
            return []
        vectors = gateway.embed(contexts, model_tag)
        for poi_id, vec in zip(missing, vectors):
            self.set_embedding(poi_id, vec, model_tag)
        return missing

    def embeddings_matrix(self, model_tag: str = "embedder") -> tuple[list[int], np.ndarray]:
        """Embedding rows in ascending-id order; errors list any missing ids."""
        with self._lock:
            ids = sorted(self._pois)
            missing = [i for i in ids if (i, model_tag) not in self._embeddings]
            if missing:
                raise MissingEmbeddingError(missing)
            if not ids:
                return [], np.zeros((0, self.dim))
            rows = [self._embeddings[(i, model_tag)].vector for i in ids]
        return ids, np.array(rows, dtype=float)

    def snapshot(self) -> "POIStore":
        """Cheap consistent copy for request-scoped reads."""
        with self._lock:
            out = POIStore(self.dim)
            out._pois = dict(self._pois)
            out._embeddings = dict(self._embeddings)
            return out

    # -- ingestion ---------------------------------------------------------

    def ingest_post(
        self,
        post_text: str,
        city: str,
        gateway: LLMGateway,
        geocoder: Geocoder,
        model_tag: str = "fast-model",
        embed_model_tag: str = "embedder",
    ) -> IngestReport:
        """Extract POIs from travel-post text and integrate them.

        Each extracted name is geocoded, described via the gateway, upserted
        (refreshing an existing record of the same name+address+city), and
        embedded from its regenerated context. Names the geocoder cannot
        resolve are skipped and reported, not fatal.
        """
        if not post_text:
            raise StoreError("empty post text")
        names = self._extract_poi_names(post_text, city, gateway, model_tag)
        report = IngestReport(stored_ids=[], skipped=[], warnings=[])
        for name in names:
            try:
                hit = geocoder.lookup(name, city)
            except Exception as exc:  # noqa: BLE001 - carry partial results
                raise IngestError(
                    f"geocoder unreachable: {exc}", report.stored_ids, report.skipped
                ) from exc
            if hit is None:
                report.skipped.append(name)
                continue
            try:
                description = self._describe_poi(hit.name, post_text, gateway, model_tag)
            except (TransportError, GatewayError) as exc:
                raise IngestError(
                    f"gateway unreachable: {exc}", report.stored_ids, report.skipped
                ) from exc
            poi = POI(
                name=hit.name,
                address=hit.address,
                city=city,
                description=description,
                location=hit.location,
                rating=hit.rating,
                category=hit.category,
            )
            poi_id = self.upsert_poi(poi, force=True)
            vec = gateway.embed([self.get(poi_id).context], embed_model_tag)[0]
            self.set_embedding(poi_id, vec, embed_model_tag)
            report.stored_ids.append(poi_id)
        return report

    def refresh_batch(
        self,
        posts: Iterable[tuple[str, str]],
        gateway: LLMGateway,
        geocoder: Geocoder,
    ) -> IngestReport:
        """Manually triggered batch over (post_text, city) pairs."""
        total = IngestReport(stored_ids=[], skipped=[], warnings=[])
        for post_text, city in posts:
            rep = self.ingest_post(post_text, city, gateway, geocoder)
            total.stored_ids.extend(rep.stored_ids)
            total.skipped.extend(rep.skipped)
            total.warnings.extend(rep.warnings)
        return total

    def _extract_poi_names(
        self, post_text: str, city: str, gateway: LLMGateway, model_tag: str
    ) -> list[str]:
        prompt = render_prompt("poi_extraction", post_text=post_text, city=city)
        raw = gateway.chat(ChatRequest(prompt=prompt, model_tag=model_tag, temperature=0.0))
        for attempt in range(2):
            try:
                items = extract_json_array(raw)
                names = []
                for item in items:
                    if isinstance(item, str) and item.strip():
                        names.append(item.strip())
                    elif isinstance(item, dict) and isinstance(item.get("name"), str):
                        names.append(item["name"].strip())
                return names
            except PayloadError as exc:
                if attempt == 1:
                    raise StoreError(f"unparseable extraction: {raw!r}") from exc
                retry_prompt = (
                    prompt
                    + "\n\nYour previous reply could not be parsed as a JSON array"
                    + f" ({exc}). Reply with only the corrected JSON array."
                    + f"\nPrevious reply:\n{raw}"
                )
                raw = gateway.chat(
                    ChatRequest(prompt=retry_prompt, model_tag=model_tag, temperature=0.0)
                )
        raise StoreError("unparseable extraction")

    def _describe_poi(
        self, name: str, post_text: str, gateway: LLMGateway, model_tag: str
    ) -> str:
        prompt = render_prompt("poi_description", poi_name=name, post_text=post_text)
        return gateway.chat(
            ChatRequest(prompt=prompt, model_tag=model_tag, temperature=0.0)
        ).strip()

    # -- persistence -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write POIs at ``path`` and embeddings at ``path + '.embeddings'``."""
        p = Path(path)
        lines = []
        with self._lock:
            for poi_id in sorted(self._pois):
                poi = self._pois[poi_id]
                values = {
                    "id": str(poi_id),
                    "name": poi.name,
                    "address": poi.address,
                    "city": poi.city,
                    "description": poi.description,
                    "longitude": _fmt(poi.location.longitude),
                    "latitude": _fmt(poi.location.latitude),
                    "rating": _fmt(poi.rating),
                    "category": poi.category,
                }
                lines.append("\t".join(f"{k}={_escape(values[k])}" for k in _POI_KEYS))
            emb_lines = []
            for poi_id, model_tag in sorted(self._embeddings):
                rec = self._embeddings[(poi_id, model_tag)]
                vals = " ".join(_fmt(v) for v in rec.vector)
                emb_lines.append(f"{poi_id}\t{_escape(model_tag)}\t{len(rec.vector)}\t{vals}")
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        Path(str(p) + ".embeddings").write_text(
            "\n".join(emb_lines) + ("\n" if emb_lines else ""), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path, dim: int = 256) -> "POIStore":
        p = Path(path)
        if not p.exists():
            raise StoreError(f"no POI file at {p}")
        store = cls(dim)
        for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            fields: dict[str, str] = {}
            for part in line.split("\t"):
                if "=" not in part:
                    raise MalformedRecordError(f"{p}:{lineno}: field {part!r} lacks '='")
                key, _, value = part.partition("=")
                fields[key] = _unescape(value)
            missing = [k for k in _POI_KEYS if k not in fields]
            if missing:
                raise MalformedRecordError(f"{p}:{lineno}: missing keys {missing}")
            try:
                poi = POI(
                    id=int(fields["id"]),
                    name=fields["name"],
                    address=fields["address"],
                    city=fields["city"],
                    description=fields["description"],
                    location=GeoPoint(float(fields["longitude"]), float(fields["latitude"])),
                    rating=float(fields["rating"]),
                    category=fields["category"],
                )
            except (ValueError, StoreError) as exc:
                raise MalformedRecordError(f"{p}:{lineno}: {exc}") from exc
            if poi.id in store._pois:
                raise MalformedRecordError(f"{p}:{lineno}: duplicate id {poi.id}")
            store._pois[poi.id] = poi
        emb_path = Path(str(p) + ".embeddings")
        if emb_path.exists():
            first_dim: int | None = None
            for lineno, line in enumerate(emb_path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    id_s, tag_s, dim_s, vals = line.split("\t", 3)
                    vector = tuple(float(v) for v in vals.split())
                    if len(vector) != int(dim_s):
                        raise ValueError(f"dimension header {dim_s} != {len(vector)} values")
                except ValueError as exc:
                    raise MalformedRecordError(f"{emb_path}:{lineno}: {exc}") from exc
                if first_dim is None:
                    first_dim = len(vector)
                    store.dim = first_dim
                store.set_embedding(int(id_s), vector, _unescape(tag_s))
        return store


def save_ground_truth(items: Iterable[GroundTruthItinerary], path: str | Path) -> None:
    lines = [
        f"{_escape(item.user_request)}\t{','.join(str(i) for i in item.poi_ids)}"
        for item in items
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_ground_truth(path: str | Path, store: POIStore | None = None) -> list[GroundTruthItinerary]:
    """Per line: request text, a tab, then a comma-separated id list."""
    p = Path(path)
    out = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise MalformedRecordError(f"{p}:{lineno}: expected TAB between request and ids")
        request, _, ids_part = line.partition("\t")
        try:
            ids = tuple(int(tok) for tok in ids_part.split(",") if tok.strip())
        except ValueError as exc:
            raise MalformedRecordError(f"{p}:{lineno}: bad id list: {exc}") from exc
        if store is not None:
            unknown = [i for i in ids if i not in store._pois]
            if unknown:
                raise MalformedRecordError(f"{p}:{lineno}: unknown POI ids {unknown}")
        out.append(GroundTruthItinerary(_unescape(request), ids))
    return out
