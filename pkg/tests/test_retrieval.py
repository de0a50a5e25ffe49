from __future__ import annotations

import random

import numpy as np
import pytest

from citywalk.decomposition import Decomposition, SubRequest
from citywalk.gateway import CallableTransport, LLMGateway, stub_embed
from citywalk.geo import GeoPoint
from citywalk.retrieval import (
    MUSTSEE_SCORE,
    RetrievalError,
    ScoredPOI,
    cosine_score,
    fuse,
    retrieve,
    retrieve_for_subrequest,
)
from citywalk.store import POI, POIStore

from oracles import score_all_rerank
from rivertown import EMBED_TAG


def _vector_gateway(mapping: dict[str, list[float]]) -> LLMGateway:
    return LLMGateway(
        mode="live",
        transport=CallableTransport(embed_fn=lambda ts, m: [mapping[t] for t in ts]),
    )


def _tiny_store(vectors: dict[int, list[float]]) -> POIStore:
    dim = len(next(iter(vectors.values())))
    store = POIStore(dim=dim)
    for poi_id in sorted(vectors):
        store.upsert_poi(
            POI(
                id=poi_id,
                name=f"P{poi_id}",
                address="a",
                city="c",
                description="d",
                location=GeoPoint(10.0, 50.0),
                rating=4.0,
                category="site",
            )
        )
        store.set_embedding(poi_id, vectors[poi_id], EMBED_TAG)
    return store


class TestCosineScore:
    def test_hand_values(self):
        scores = cosine_score(
            np.array([1.0, 0.0]),
            np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]]),
        )
        assert scores.tolist() == pytest.approx([1.0, 0.0, 0.6])

    def test_query_equal_to_row(self):
        q = np.array([0.3, 0.4])
        assert cosine_score(q, q[None, :])[0] == pytest.approx(1.0)

    def test_antipodal(self):
        assert cosine_score(np.array([1.0, 0.0]), np.array([[-1.0, 0.0]]))[0] == -1.0

    def test_zero_row_scores_zero(self):
        assert cosine_score(np.array([1.0, 0.0]), np.array([[0.0, 0.0]]))[0] == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(RetrievalError):
            cosine_score(np.array([1.0, 0.0, 0.0]), np.array([[1.0, 0.0]]))


class TestRetrieveForSubrequest:
    def test_hand_vectors_gap_rerank(self):
        store = _tiny_store({1: [1.0, 0.0], 2: [0.6, 0.8], 3: [0.0, 1.0]})
        gateway = _vector_gateway({"liked": [1.0, 0.0], "disliked": [0.0, 1.0]})
        slate = retrieve_for_subrequest(
            SubRequest(pos="liked", neg="disliked"), store, gateway, k=3, model_tag=EMBED_TAG
        )
        assert [s.poi_id for s in slate] == [1, 2, 3]
        assert [s.score for s in slate] == pytest.approx([1.0, -0.2, -1.0])

    def test_no_neg_keeps_pos_order(self):
        store = _tiny_store({1: [1.0, 0.0], 2: [0.6, 0.8], 3: [0.0, 1.0]})
        gateway = _vector_gateway({"liked": [1.0, 0.0]})
        slate = retrieve_for_subrequest(
            SubRequest(pos="liked"), store, gateway, k=3, model_tag=EMBED_TAG
        )
        assert [s.poi_id for s in slate] == [1, 2, 3]
        assert [s.score for s in slate] == pytest.approx([1.0, 0.6, 0.0])

    def test_dislike_only_returns_empty(self):
        store = _tiny_store({1: [1.0, 0.0]})
        gateway = _vector_gateway({})
        assert retrieve_for_subrequest(
            SubRequest(neg="noise"), store, gateway, k=3, model_tag=EMBED_TAG
        ) == []

    def test_k_truncates_before_rerank(self):
        # the neg gap reranks only within the pos top-k slate
        store = _tiny_store({1: [1.0, 0.0], 2: [0.9, 0.1], 3: [0.5, 0.5]})
        gateway = _vector_gateway({"liked": [1.0, 0.0], "disliked": [0.9, 0.1]})
        slate = retrieve_for_subrequest(
            SubRequest(pos="liked", neg="disliked"), store, gateway, k=2, model_tag=EMBED_TAG
        )
        assert {s.poi_id for s in slate} == {1, 2}

    def test_matches_brute_force_oracle_on_stub_embeddings(self, city_store):
        gateway = LLMGateway(mode="stub")
        ids, matrix = city_store.embeddings_matrix(EMBED_TAG)
        rng = random.Random(5)
        phrases = [
            "street art murals gallery",
            "tea gardens quiet",
            "evening music concert",
            "ferry river dock lighthouse",
        ]
        for pos in phrases:
            for neg in ["", "crowded market stalls"]:
                k = rng.choice([3, 10, len(ids)])
                sub = SubRequest(pos=pos, neg=neg or "")
                got = retrieve_for_subrequest(sub, city_store, gateway, k, EMBED_TAG)
                pos_scores = dict(
                    zip(ids, cosine_score(np.array(stub_embed(pos)), matrix))
                )
                if neg:
                    neg_scores = dict(
                        zip(ids, cosine_score(np.array(stub_embed(neg)), matrix))
                    )
                else:
                    neg_scores = {}
                expected = score_all_rerank(ids, pos_scores, neg_scores, k)
                assert [s.poi_id for s in got] == expected


class TestFuse:
    def test_scores_sum_across_subrequests(self):
        result = fuse(
            {0: [ScoredPOI(7, 0.8)], 1: [ScoredPOI(7, 0.5), ScoredPOI(9, 0.4)]},
            mustsee_ids=[],
            k=5,
        )
        by_id = {c.poi_id: c.score for c in result.candidates}
        assert by_id[7] == pytest.approx(1.3)
        assert by_id[9] == pytest.approx(0.4)

    def test_missing_mustsee_appended_with_sentinel(self):
        result = fuse({0: [ScoredPOI(1, 0.9)]}, mustsee_ids=[42], k=1)
        by_id = {c.poi_id: c.score for c in result.candidates}
        assert by_id[42] == MUSTSEE_SCORE

    def test_mustsee_already_ranked_keeps_sentinel(self):
        result = fuse({0: [ScoredPOI(1, 0.9)]}, mustsee_ids=[1], k=3)
        assert result.candidates[0] == ScoredPOI(1, MUSTSEE_SCORE)
        assert len(result.candidates) == 1

    def test_top_k_cutoff(self):
        result = fuse(
            {0: [ScoredPOI(1, 1.3), ScoredPOI(2, 0.9), ScoredPOI(3, 0.2)]},
            mustsee_ids=[],
            k=2,
        )
        assert [c.poi_id for c in result.candidates] == [1, 2]

    def test_global_neg_penalty_subtracted_before_ranking(self):
        result = fuse(
            {0: [ScoredPOI(1, 0.9), ScoredPOI(2, 0.8)]},
            mustsee_ids=[],
            k=2,
            neg_penalty={1: 0.5},
        )
        assert [c.poi_id for c in result.candidates] == [2, 1]
        assert result.candidates[1].score == pytest.approx(0.4)

    def test_candidate_count_bounded(self):
        slates = {
            i: [ScoredPOI(j, 0.1 * j) for j in range(1, 20)] for i in range(3)
        }
        result = fuse(slates, mustsee_ids=[100, 101], k=5)
        assert len(result.candidates) <= 5 + 2

    def test_permutation_invariance_over_subrequest_order(self):
        slates = {
            0: [ScoredPOI(1, 0.5), ScoredPOI(2, 0.1)],
            1: [ScoredPOI(2, 0.7)],
            2: [ScoredPOI(3, 0.2), ScoredPOI(1, 0.05)],
        }
        shuffled = {0: slates[2], 1: slates[0], 2: slates[1]}
        assert fuse(slates, [3], k=2).candidates == fuse(shuffled, [3], k=2).candidates

    def test_ties_break_on_ascending_id(self):
        result = fuse({0: [ScoredPOI(9, 0.5), ScoredPOI(2, 0.5)]}, [], k=2)
        assert [c.poi_id for c in result.candidates] == [2, 9]


class TestRetrieveEndToEnd:
    def test_single_subrequest_equals_truncated_slate(self, city_store):
        gateway = LLMGateway(mode="stub")
        sub = SubRequest(pos="tea gardens")
        decomposition = Decomposition((sub,), "tea gardens")
        direct = retrieve_for_subrequest(sub, city_store, gateway, k=30, model_tag=EMBED_TAG)
        fused = retrieve(
            decomposition, city_store, gateway,
            k_per_subrequest=30, k_final=7, model_tag=EMBED_TAG,
        )
        assert [c.poi_id for c in fused.candidates] == [s.poi_id for s in direct[:7]]
        assert [c.score for c in fused.candidates] == pytest.approx(
            [s.score for s in direct[:7]]
        )

    def test_mustsee_resolution_and_warning(self, city_store):
        gateway = LLMGateway(mode="stub")
        decomposition = Decomposition(
            (
                SubRequest(pos="Old Ferry Dock", mustsee=True, type="start"),
                SubRequest(pos="Atlantis Aquarium", mustsee=True, type="POI"),
            ),
            "start at the old ferry dock",
        )
        warnings: list[str] = []
        result = retrieve(
            decomposition, city_store, gateway, model_tag=EMBED_TAG, warnings=warnings
        )
        dock = city_store.find_by_name("Old Ferry Dock").id
        scores = {c.poi_id: c.score for c in result.candidates}
        assert scores[dock] == MUSTSEE_SCORE
        assert any("Atlantis Aquarium" in w for w in warnings)

    def test_dislike_only_subrequest_penalizes_globally(self, city_store):
        gateway = LLMGateway(mode="stub")
        base = Decomposition((SubRequest(pos="tea gardens"),), "r")
        with_neg = Decomposition(
            (
                SubRequest(pos="tea gardens"),
                SubRequest(neg="market stalls spice", type="itinerary"),
            ),
            "r",
        )
        ids, matrix = city_store.embeddings_matrix(EMBED_TAG)
        neg_cos = dict(
            zip(ids, cosine_score(np.array(stub_embed("market stalls spice")), matrix))
        )
        plain = retrieve(base, city_store, gateway, k_final=30, model_tag=EMBED_TAG)
        penalized = retrieve(with_neg, city_store, gateway, k_final=30, model_tag=EMBED_TAG)
        plain_scores = {c.poi_id: c.score for c in plain.candidates}
        for c in penalized.candidates:
            assert c.score == pytest.approx(plain_scores[c.poi_id] - neg_cos[c.poi_id])
