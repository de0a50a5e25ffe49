"""Preference-aware embedding retrieval: per-subrequest ranking and fusion.

For each subrequest the positive text retrieves a top-k slate by cosine
similarity, the negative text is scored against that slate, and the slate is
reranked by the positive-minus-negative gap. Slates are fused by summing
scores per POI, dislike-only subrequests subtract globally, and must-see
POIs are pinned with a sentinel score large enough to outrank any sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .decomposition import Decomposition, SubRequest
from .gateway import LLMGateway
from .store import POIStore

DEFAULT_K = 30
MUSTSEE_SCORE = 1e6


class RetrievalError(Exception):
    pass


@dataclass(frozen=True)
class ScoredPOI:
    poi_id: int
    score: float


@dataclass(frozen=True)
class RetrievalResult:
    candidates: tuple[ScoredPOI, ...]
    per_subrequest: dict[int, tuple[ScoredPOI, ...]] = field(default_factory=dict)

    def candidate_ids(self) -> list[int]:
        return [c.poi_id for c in self.candidates]


def cosine_score(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Cosine similarity of ``query`` against each matrix row; zero rows score 0."""
    q = np.asarray(query, dtype=float)
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or q.ndim != 1 or m.shape[1] != q.shape[0]:
        raise RetrievalError(
            f"dimension mismatch: query {q.shape} vs matrix {m.shape}"
        )
    q_norm = np.linalg.norm(q)
    row_norms = np.linalg.norm(m, axis=1)
    denom = q_norm * row_norms
    out = np.zeros(m.shape[0])
    nonzero = denom > 0
    out[nonzero] = (m[nonzero] @ q) / denom[nonzero]
    return out


# ranking quantum: scores are rounded to 9 decimals for ordering only, so
# mathematically tied POIs break on ascending id instead of float noise
_RANK_DECIMALS = 9


def _rank_key(poi_id: int, score: float) -> tuple[float, int]:
    return (-round(score, _RANK_DECIMALS), poi_id)


def _rank(ids: Sequence[int], scores: Sequence[float]) -> list[ScoredPOI]:
    order = sorted(range(len(ids)), key=lambda i: _rank_key(ids[i], scores[i]))
    return [ScoredPOI(ids[i], float(scores[i])) for i in order]


def retrieve_for_subrequest(
    sub: SubRequest,
    store: POIStore,
    gateway: LLMGateway,
    k: int = DEFAULT_K,
    model_tag: str = "embedder",
) -> list[ScoredPOI]:
    """Top-k slate for one subrequest, reranked by the pos-neg similarity gap.

    Dislike-only subrequests return an empty slate; their global effect is
    applied during fusion.
    """
    if k < 1:
        raise RetrievalError("k must be at least 1")
    if len(store) == 0:
        raise RetrievalError("empty store")
    if not sub.pos:
        return []
    ids, matrix = store.embeddings_matrix(model_tag)
    e_pos = np.array(gateway.embed([sub.pos], model_tag)[0])
    pos_scores = cosine_score(e_pos, matrix)
    slate = _rank(ids, pos_scores)[:k]
    if not sub.neg:
        return slate
    id_to_row = {poi_id: i for i, poi_id in enumerate(ids)}
    slate_rows = matrix[[id_to_row[s.poi_id] for s in slate]]
    e_neg = np.array(gateway.embed([sub.neg], model_tag)[0])
    neg_scores = cosine_score(e_neg, slate_rows)
    gaps = [s.score - float(n) for s, n in zip(slate, neg_scores)]
    return _rank([s.poi_id for s in slate], gaps)


def fuse(
    per_subrequest: Mapping[int, Sequence[ScoredPOI]],
    mustsee_ids: Sequence[int],
    k: int = DEFAULT_K,
    neg_penalty: Mapping[int, float] | None = None,
    mustsee_score: float = MUSTSEE_SCORE,
) -> RetrievalResult:
    """Union the slates, summing scores per POI, then keep the top k.

    ``neg_penalty`` carries the global subtraction from dislike-only
    subrequests. Must-see POIs are always present with the sentinel score,
    whether or not they made the top k on merit.
    """
    if k < 1:
        raise RetrievalError("k must be at least 1")
    fused: dict[int, float] = {}
    for slate in per_subrequest.values():
        for scored in slate:
            fused[scored.poi_id] = fused.get(scored.poi_id, 0.0) + scored.score
    if neg_penalty:
        for poi_id in fused:
            fused[poi_id] -= neg_penalty.get(poi_id, 0.0)
    ranked = _rank(list(fused), [fused[i] for i in fused])[:k]
    mustsee_unique = list(dict.fromkeys(mustsee_ids))
    pinned = set(mustsee_unique)
    candidates = [ScoredPOI(s.poi_id, mustsee_score if s.poi_id in pinned else s.score)
                  for s in ranked]
    present = {c.poi_id for c in candidates}
    for poi_id in mustsee_unique:
        if poi_id not in present:
            candidates.append(ScoredPOI(poi_id, mustsee_score))
    candidates.sort(key=lambda c: _rank_key(c.poi_id, c.score))
    return RetrievalResult(
        candidates=tuple(candidates),
        per_subrequest={i: tuple(slate) for i, slate in per_subrequest.items()},
    )


def retrieve(
    decomposition: Decomposition,
    store: POIStore,
    gateway: LLMGateway,
    k_per_subrequest: int = DEFAULT_K,
    k_final: int = DEFAULT_K,
    model_tag: str = "embedder",
    mustsee_score: float = MUSTSEE_SCORE,
    warnings: list[str] | None = None,
) -> RetrievalResult:
    """Full preference-aware retrieval for a decomposed request."""
    per_subrequest: dict[int, list[ScoredPOI]] = {}
    neg_penalty: dict[int, float] = {}
    for index, sub in enumerate(decomposition.subrequests):
        slate = retrieve_for_subrequest(sub, store, gateway, k_per_subrequest, model_tag)
        per_subrequest[index] = slate
        if not sub.pos and sub.neg:
            ids, matrix = store.embeddings_matrix(model_tag)
            e_neg = np.array(gateway.embed([sub.neg], model_tag)[0])
            scores = cosine_score(e_neg, matrix)
            for poi_id, s in zip(ids, scores):
                neg_penalty[poi_id] = neg_penalty.get(poi_id, 0.0) + float(s)
    mustsee_ids: list[int] = []
    for name in decomposition.mustsee_names():
        poi = store.find_by_name(name)
        if poi is None:
            if warnings is not None:
                warnings.append(f"must-see {name!r} not found in POI store")
            continue
        mustsee_ids.append(poi.id)
    return fuse(
        per_subrequest,
        mustsee_ids,
        k=k_final,
        neg_penalty=neg_penalty,
        mustsee_score=mustsee_score,
    )
