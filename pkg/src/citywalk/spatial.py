"""Cluster-aware spatial optimization.

Pipeline: build a proximity graph over retrieved POIs, peel off largest
cliques as clusters, admit whole clusters by summed score until the candidate
budget is met, order clusters with a simulated-annealing tour over their
centroids, then solve each cluster internally as an exact fixed-endpoint
shortest Hamiltonian path, with entry/exit points chosen by proximity to the
neighboring clusters.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .decomposition import Decomposition
from .gateway import ChatRequest, GatewayError, LLMGateway
from .geo import DistanceMatrix, GeoPoint, build_distance_matrix, haversine_distance
from .parsing import PayloadError, extract_json_object
from .prompts import render_prompt
from .store import POIStore

DEFAULT_TAU_M = 1000.0
DEFAULT_N_CANDIDATES = 15
EXACT_SOLVER_MAX_N = 18


class SpatialError(Exception):
    pass


@dataclass(frozen=True)
class SAParams:
    t_init: float = 5000.0
    t_min: float = 1e-3
    alpha: float = 0.99
    max_iters: int = 200_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.t_init > self.t_min >= 0):
            raise SpatialError("need t_init > t_min >= 0")
        if not (0.0 < self.alpha < 1.0):
            raise SpatialError("alpha must be in (0, 1)")


@dataclass(frozen=True)
class TourSolution:
    order: tuple[int, ...]
    cost: float


@dataclass(frozen=True)
class Cluster:
    member_ids: frozenset[int]
    summed_score: float

    def __post_init__(self) -> None:
        if not self.member_ids:
            raise SpatialError("empty cluster")


@dataclass(frozen=True)
class ProximityGraph:
    nodes: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    threshold: float

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def build_proximity_graph(
    ids: Sequence[int], dist: Callable[[int, int], float], tau: float
) -> ProximityGraph:
    """Edges connect distinct ids strictly closer than ``tau`` meters."""
    if tau <= 0:
        raise SpatialError("tau must be positive")
    edges = set()
    ordered = sorted(ids)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if dist(a, b) < tau:
                edges.add((a, b))
    return ProximityGraph(tuple(ordered), frozenset(edges), tau)


def _bron_kerbosch(
    r: set[int], p: set[int], x: set[int], adj: Mapping[int, set[int]],
    out: list[frozenset[int]],
) -> None:
    if not p and not x:
        out.append(frozenset(r))
        return
    pivot = max(p | x, key=lambda v: (len(adj[v] & p), -v))
    for v in sorted(p - adj[pivot]):
        _bron_kerbosch(r | {v}, p & adj[v], x & adj[v], adj, out)
        p = p - {v}
        x = x | {v}


def maximal_cliques(adj: Mapping[int, set[int]]) -> list[frozenset[int]]:
    """All maximal cliques via Bron-Kerbosch with pivoting."""
    out: list[frozenset[int]] = []
    _bron_kerbosch(set(), set(adj), set(), adj, out)
    return out


def _largest_clique(
    adj: Mapping[int, set[int]], scores: Mapping[int, float]
) -> frozenset[int]:
    cliques = maximal_cliques(adj)
    return max(
        cliques,
        key=lambda c: (len(c), sum(scores[v] for v in c), -min(c)),
    )


def cluster_and_select(
    pois: Sequence[tuple[object, float]],
    tau: float = DEFAULT_TAU_M,
    n_candidates: int = DEFAULT_N_CANDIDATES,
) -> tuple[list[Cluster], list[int]]:
    """Peel largest cliques off the proximity graph, then pick candidates.

    ``pois`` pairs objects carrying ``id`` and ``location`` with retrieval
    scores. Whole clusters are admitted in descending summed score until the
    candidate count reaches ``n_candidates``; the tail cluster may overshoot.
    """
    if not pois:
        raise SpatialError("no POIs to cluster")
    if n_candidates < 1:
        raise SpatialError("candidate budget must be at least 1")
    locations: dict[int, GeoPoint] = {}
    scores: dict[int, float] = {}
    for poi, score in pois:
        locations[poi.id] = poi.location
        scores[poi.id] = float(score)
    graph = build_proximity_graph(
        list(locations), lambda a, b: haversine_distance(locations[a], locations[b]), tau
    )
    adj = graph.adjacency()
    clusters: list[Cluster] = []
    while adj:
        clique = _largest_clique(adj, scores)
        clusters.append(Cluster(clique, sum(scores[v] for v in clique)))
        for v in clique:
            del adj[v]
        for neighbors in adj.values():
            neighbors -= clique
    by_score = sorted(clusters, key=lambda c: (-c.summed_score, min(c.member_ids)))
    candidates: list[int] = []
    for cluster in by_score:
        if len(candidates) >= n_candidates:
            break
        candidates.extend(sorted(cluster.member_ids))
    return clusters, candidates


# -- simulated annealing over closed tours ----------------------------------


def tour_cost(order: Sequence[int], d: Sequence[Sequence[float]]) -> float:
    """Length of the closed tour visiting ``order`` and returning to its head."""
    total = 0.0
    for i in range(len(order)):
        total += d[order[i]][order[(i + 1) % len(order)]]
    return total


def initial_tour(n: int, rng: random.Random) -> list[int]:
    order = list(range(n))
    rng.shuffle(order)
    return order


def _neighbor(order: list[int], rng: random.Random) -> list[int]:
    n = len(order)
    move = rng.randrange(4)
    i, j = sorted(rng.sample(range(n), 2))
    if move == 0:  # swap two cities
        out = order[:]
        out[i], out[j] = out[j], out[i]
        return out
    if move == 1:  # invert a subroute
        return order[:i] + order[i : j + 1][::-1] + order[j + 1 :]
    if move == 2:  # relocate one city
        out = order[:]
        city = out.pop(i)
        out.insert(rng.randrange(len(out) + 1), city)
        return out
    # relocate a subroute
    out = order[:i] + order[j + 1 :]
    segment = order[i : j + 1]
    pos = rng.randrange(len(out) + 1)
    return out[:pos] + segment + out[pos:]


def solve_tsp_sa(matrix: DistanceMatrix, params: SAParams = SAParams()) -> TourSolution:
    """Closed-tour simulated annealing with geometric cooling.

    Neighbors are drawn uniformly from four moves (swap, subroute inversion,
    single relocation, subroute relocation); worse moves are accepted with
    probability exp(-delta/T). Runs until T <= t_min or max_iters, whichever
    comes first, and returns the best tour seen, not the last accepted one.
    Fully deterministic for a given seed.
    """
    n = matrix.n
    if n == 1:
        return TourSolution((0,), 0.0)
    d = matrix.entries.tolist()
    rng = random.Random(params.seed)
    current = initial_tour(n, rng)
    current_cost = tour_cost(current, d)
    best, best_cost = current[:], current_cost
    temperature = params.t_init
    iters = 0
    while temperature > params.t_min and iters < params.max_iters:
        candidate = _neighbor(current, rng)
        candidate_cost = tour_cost(candidate, d)
        delta = candidate_cost - current_cost
        if delta < 0 or math.exp(-delta / temperature) > rng.random():
            current, current_cost = candidate, candidate_cost
            if current_cost < best_cost:
                best, best_cost = current[:], current_cost
        temperature *= params.alpha
        iters += 1
    return TourSolution(tuple(best), best_cost)


# -- exact fixed-endpoint shortest Hamiltonian path --------------------------


def solve_path_fixed_endpoints(matrix: DistanceMatrix, start: int, end: int) -> TourSolution:
    """Minimum-cost Hamiltonian path from ``start`` to ``end``, exactly.

    Dynamic programming over vertex subsets; equal-cost optima resolve to the
    lexicographically smallest order. Bounded at 18 nodes, past which the
    caller is expected to split the cluster.
    """
    n = matrix.n
    if n == 1:
        if start == 0 and end == 0:
            return TourSolution((0,), 0.0)
        raise SpatialError("endpoint index out of range")
    if not (0 <= start < n and 0 <= end < n):
        raise SpatialError("endpoint index out of range")
    if start == end:
        raise SpatialError("start and end must differ")
    if n > EXACT_SOLVER_MAX_N:
        raise SpatialError("cluster too large for exact solve")
    d = matrix.entries.tolist()
    if n == 2:
        return TourSolution((start, end), d[start][end])

    middles = [v for v in range(n) if v not in (start, end)]
    m = len(middles)
    full = (1 << m) - 1
    inf = math.inf
    cost = [[inf] * m for _ in range(1 << m)]
    parent: list[list[int]] = [[-1] * m for _ in range(1 << m)]
    for i in range(m):
        cost[1 << i][i] = d[start][middles[i]]

    def path_to(mask: int, i: int) -> list[int]:
        out = []
        while i != -1:
            out.append(middles[i])
            mask, i = mask ^ (1 << i), parent[mask][i]
        out.reverse()
        return out

    for mask in range(1, full + 1):
        row = cost[mask]
        for i in range(m):
            c = row[i]
            if c is inf or not mask & (1 << i):
                continue
            di = d[middles[i]]
            for j in range(m):
                if mask & (1 << j):
                    continue
                new_mask = mask | (1 << j)
                new_cost = c + di[middles[j]]
                if new_cost < cost[new_mask][j]:
                    cost[new_mask][j] = new_cost
                    parent[new_mask][j] = i
                elif new_cost == cost[new_mask][j] and parent[new_mask][j] != i:
                    incumbent = path_to(new_mask, j)
                    challenger = path_to(mask, i) + [middles[j]]
                    if challenger < incumbent:
                        parent[new_mask][j] = i

    best_cost = inf
    best_path: list[int] | None = None
    for i in range(m):
        total = cost[full][i] + d[middles[i]][end]
        if total < best_cost:
            best_cost = total
            best_path = path_to(full, i)
        elif total == best_cost and best_path is not None:
            challenger = path_to(full, i)
            if challenger < best_path:
                best_path = challenger
    assert best_path is not None
    return TourSolution(tuple([start] + best_path + [end]), best_cost)


# -- hierarchical ordering ----------------------------------------------------


def cluster_centroid(cluster: Cluster, positions: Mapping[int, GeoPoint]) -> GeoPoint:
    """Arithmetic mean of member coordinates; adequate at city scale."""
    members = sorted(cluster.member_ids)
    lon = sum(positions[i].longitude for i in members) / len(members)
    lat = sum(positions[i].latitude for i in members) / len(members)
    return GeoPoint(lon, lat)


def get_cluster_endpoints(
    cluster: Cluster,
    prev_anchor: GeoPoint | None,
    next_centroid: GeoPoint | None,
    positions: Mapping[int, GeoPoint],
) -> tuple[int, int]:
    """Entry and exit POI for a cluster, chosen against its neighbors.

    Start is the member nearest the previous cluster's exit; the first
    cluster instead starts at the member farthest from the next centroid so
    the walk sweeps toward it. End is the member nearest the next centroid;
    the last cluster ends at the member farthest from its own start. Ties
    break on the smaller id.
    """
    members = sorted(cluster.member_ids)
    if len(members) == 1:
        return members[0], members[0]

    def nearest(target: GeoPoint, pool: Sequence[int]) -> int:
        return min(pool, key=lambda i: (haversine_distance(positions[i], target), i))

    def farthest(target: GeoPoint, pool: Sequence[int]) -> int:
        return min(pool, key=lambda i: (-haversine_distance(positions[i], target), i))

    if prev_anchor is not None:
        start = nearest(prev_anchor, members)
    elif next_centroid is not None:
        start = farthest(next_centroid, members)
    else:
        start = members[0]
    rest = [i for i in members if i != start]
    if next_centroid is not None:
        end = nearest(next_centroid, rest)
    else:
        end = farthest(positions[start], rest)
    return start, end


def _split_oversized(
    clusters: list[Cluster],
    positions: Mapping[int, GeoPoint],
    scores: Mapping[int, float],
    tau: float,
    max_n: int,
) -> list[Cluster]:
    out: list[Cluster] = []
    for cluster in clusters:
        if len(cluster.member_ids) <= max_n:
            out.append(cluster)
            continue
        half_tau = tau / 2.0
        members = sorted(cluster.member_ids)
        sub, _ = cluster_and_select(
            [(_IdPoint(i, positions[i]), scores.get(i, 0.0)) for i in members],
            tau=half_tau,
            n_candidates=1,
        )
        if len(sub) == 1:
            # no progress (co-located points); fall back to id-ordered chunks
            chunks = [members[i : i + max_n] for i in range(0, len(members), max_n)]
            sub = [
                Cluster(frozenset(c), sum(scores.get(i, 0.0) for i in c)) for c in chunks
            ]
            out.extend(sub)
        else:
            out.extend(_split_oversized(sub, positions, scores, half_tau, max_n))
    return out


@dataclass(frozen=True)
class _IdPoint:
    id: int
    location: GeoPoint


def order_pois(
    clusters: Sequence[Cluster],
    candidates: Sequence[int],
    store: POIStore,
    decomposition: Decomposition | None,
    gateway: LLMGateway | None,
    sa_params: SAParams = SAParams(),
    tau: float = DEFAULT_TAU_M,
    max_exact_n: int = EXACT_SOLVER_MAX_N,
    model_tag: str = "fast-model",
    prompt_dir: str | None = None,
    warnings: list[str] | None = None,
) -> list[int]:
    """Order candidate POIs: tour over clusters, exact paths within them.

    After concatenating per-cluster paths, the walk's starting POI is taken
    from a 'start'-typed subrequest when one resolves to a candidate, else
    the gateway is asked to pick one (any failure falls back to the current
    head). The sequence is then treated as a closed cycle, rotated so the
    start POI leads, and cut back open, preserving orientation.
    """
    if not candidates:
        raise SpatialError("no candidate POIs to order")
    candidate_set = set(candidates)
    covered = set().union(*(c.member_ids for c in clusters)) if clusters else set()
    if candidate_set - covered:
        raise SpatialError("clusters do not cover candidates")
    active = [c for c in clusters if c.member_ids <= candidate_set]
    positions = {i: store.get(i).location for i in candidate_set}
    scores = {i: 0.0 for i in candidate_set}
    # the exact solver refuses n > EXACT_SOLVER_MAX_N regardless of config
    max_exact_n = min(max_exact_n, EXACT_SOLVER_MAX_N)
    active = _split_oversized(list(active), positions, scores, tau, max_exact_n)

    if len(active) == 1:
        cluster_order = [0]
    else:
        centroids = [cluster_centroid(c, positions) for c in active]
        tour = solve_tsp_sa(build_distance_matrix(centroids), sa_params)
        cluster_order = list(tour.order)

    ordered: list[int] = []
    prev_anchor: GeoPoint | None = None
    for pos, cluster_idx in enumerate(cluster_order):
        cluster = active[cluster_idx]
        if pos + 1 < len(cluster_order):
            next_centroid = cluster_centroid(active[cluster_order[pos + 1]], positions)
        else:
            next_centroid = None
        start_id, end_id = get_cluster_endpoints(cluster, prev_anchor, next_centroid, positions)
        members = sorted(cluster.member_ids)
        if len(members) == 1:
            ordered.append(members[0])
        else:
            local = build_distance_matrix([positions[i] for i in members])
            path = solve_path_fixed_endpoints(
                local, members.index(start_id), members.index(end_id)
            )
            ordered.extend(members[i] for i in path.order)
        prev_anchor = positions[end_id]

    start_poi = _select_start(
        ordered, store, decomposition, gateway, model_tag, prompt_dir, warnings
    )
    return rotate_cycle(ordered, start_poi)


def rotate_cycle(order: Sequence[int], start_id: int) -> list[int]:
    """Close ``order`` into a cycle, rotate the start to the front, cut open.

    Orientation is preserved, so the multiset of cyclic adjacencies is
    unchanged; only the cut point moves.
    """
    pivot = list(order).index(start_id)
    return list(order[pivot:]) + list(order[:pivot])


def _select_start(
    ordered: Sequence[int],
    store: POIStore,
    decomposition: Decomposition | None,
    gateway: LLMGateway | None,
    model_tag: str,
    prompt_dir: str | None,
    warnings: list[str] | None,
) -> int:
    if decomposition is not None:
        start_sub = decomposition.start_subrequest()
        if start_sub is not None:
            poi = store.find_by_name(start_sub.pos)
            if poi is not None and poi.id in set(ordered):
                return poi.id
    if gateway is None or decomposition is None:
        return ordered[0]
    lines = "\n".join(f"{i}. {store.get(i).name}" for i in ordered)
    prompt = render_prompt(
        "start_poi",
        prompt_dir=prompt_dir,
        request=decomposition.raw_request,
        candidates=lines,
    )
    try:
        raw = gateway.chat(ChatRequest(prompt=prompt, model_tag=model_tag, temperature=0.0))
        payload = extract_json_object(raw)
        chosen = int(payload["id"])
        if chosen in set(ordered):
            return chosen
        raise PayloadError(f"id {chosen} is not a candidate")
    except (GatewayError, PayloadError, KeyError, TypeError, ValueError) as exc:
        if warnings is not None:
            warnings.append(f"start selection fell back to route head: {exc}")
        return ordered[0]
