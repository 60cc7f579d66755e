"""Non-dominated multilayer path enumeration and k-shortest physical paths.

The enumeration is a label-correcting search over the multilayer multigraph.
Mid-search we may only discard a label when a competitor is guaranteed to
beat every one of its completions. The full dominance relation does not give
that guarantee: a higher best-rate or virtual-free advantage can evaporate
later (new segments refresh the candidate modes, a future virtual hop marks
both labels), and a shorter distance-since-regeneration can keep alive a
long-reach mode that changes the committed mode choice downstream. So the
in-flight rule only compares labels whose open-segment state (module,
surviving modes, joint availability, distance) is identical, demands no
worse virtual usage and best rate, and requires strictly lower cost — cost
differences are the one advantage that extension can never cancel. The full
relation is applied once, to the complete candidates at the destination.

Per vertex the live labels are capped (default 64); evictions drop the
worst (cost, path) label and are counted, since a hit means the returned
set may be incomplete.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .cost_algebra import (
    Objective,
    PathLabel,
    dominates,
    extend_label,
    initial_label,
    max_rate,
)
from .multilayer import MultilayerGraph, is_router, router_vertex
from .topology import Topology

DEFAULT_LABEL_CAP = 64


@dataclass
class SearchStats:
    cap_hits: int = 0
    popped: int = 0
    inserted: int = 0


def _open_state_key(label: PathLabel):
    if label.open_module is None:
        return None
    return (label.open_module, label.open_modes, label.free_mask, label.dist_since_regen)


def _supersedes(a: PathLabel, b: PathLabel) -> bool:
    """Safe in-flight pruning: same open-segment state, strictly cheaper."""
    return (
        a.total_cost < b.total_cost
        and a.uses_virtual <= b.uses_virtual
        and max_rate(a) >= max_rate(b)
    )


class _VertexLabels:
    """Labels at one vertex, grouped by open-segment state."""

    __slots__ = ("groups", "count")

    def __init__(self):
        self.groups: dict = {}
        self.count = 0

    def insert(self, label: PathLabel) -> bool:
        group = self.groups.setdefault(_open_state_key(label), [])
        for incumbent in group:
            if _supersedes(incumbent, label):
                return False
        survivors = []
        for incumbent in group:
            if _supersedes(label, incumbent):
                incumbent.dead = True
                self.count -= 1
            else:
                survivors.append(incumbent)
        survivors.append(label)
        self.groups[_open_state_key(label)] = survivors
        self.count += 1
        return True

    def evict_worst(self) -> PathLabel:
        worst = None
        for group in self.groups.values():
            for label in group:
                if worst is None or (label.total_cost, label.path) > (
                    worst.total_cost,
                    worst.path,
                ):
                    worst = label
        worst.dead = True
        key = _open_state_key(worst)
        self.groups[key].remove(worst)
        self.count -= 1
        return worst


def nondominated_paths(
    graph: MultilayerGraph,
    src: int,
    dst: int,
    demand_gbps: float,
    *,
    label_cap: int | None = DEFAULT_LABEL_CAP,
    stats: SearchStats | None = None,
) -> list[PathLabel]:
    """All non-dominated complete multilayer paths from src to dst routers.

    Every returned label ends at the destination router with no open
    segment, and is feasible for the demand by construction: rate and port
    limits, optical reach, and a contiguous free slot block on the joint
    availability of each segment. An empty list means no feasible path.
    """
    if src == dst:
        raise ValueError("source and destination must differ")
    if stats is None:
        stats = SearchStats()
    start = initial_label(router_vertex(src), graph)
    target = router_vertex(dst)
    sets: dict[int, _VertexLabels] = {start.vertex: _VertexLabels()}
    sets[start.vertex].insert(start)
    queue: deque[PathLabel] = deque([start])

    while queue:
        label = queue.popleft()
        if label.dead:
            continue
        stats.popped += 1
        vertex = label.path[-1]
        for edge_index in graph.out[vertex]:
            if edge_index in label.edges:
                continue
            new = extend_label(label, graph.edges[edge_index], demand_gbps)
            if new is None:
                continue
            bucket = sets.setdefault(new.path[-1], _VertexLabels())
            if not bucket.insert(new):
                continue
            stats.inserted += 1
            if label_cap is not None and bucket.count > label_cap:
                evicted = bucket.evict_worst()
                stats.cap_hits += 1
                if evicted is new:
                    continue
            queue.append(new)

    candidates: list[PathLabel] = []
    bucket = sets.get(target)
    if bucket is not None:
        for group in bucket.groups.values():
            candidates.extend(group)
    # Complete labels only (never bear an open segment at a router), final
    # filter with the full dominance relation.
    complete = [l for l in candidates if not l.segment_open and len(l.path) > 1]
    return [
        label
        for label in complete
        if not any(other is not label and dominates(other, label) for other in complete)
    ]


def select_winner(labels: list[PathLabel], objective: Objective) -> PathLabel | None:
    """Objective-minimal label; ties fall to the smallest vertex sequence."""
    if not labels:
        return None
    return min(labels, key=lambda l: (objective(l), l.path))


# -- k shortest physical paths ------------------------------------------------


def _shortest_path(
    topology: Topology,
    src: int,
    dst: int,
    banned_edges: frozenset[tuple[int, int]],
    banned_nodes: frozenset[int],
) -> tuple[float, tuple[int, ...]] | None:
    # Dijkstra returning the lexicographically smallest among equally short
    # paths, which keeps the k-shortest enumeration deterministic.
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (src,))]
    settled: set[int] = set()
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node == dst:
            return dist, path
        if node in settled:
            continue
        settled.add(node)
        for neighbor, length in topology.neighbors(node):
            if neighbor in settled or neighbor in banned_nodes:
                continue
            if (node, neighbor) in banned_edges:
                continue
            heapq.heappush(heap, (dist + length, path + (neighbor,)))
    return None


def k_shortest_paths(
    topology: Topology, src: int, dst: int, k: int
) -> list[tuple[int, ...]]:
    """Up to k loopless paths by non-decreasing length.

    Deviation-based enumeration; ties are ordered by the vertex sequence, so
    the output matches a brute-force sort over all simple paths.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    first = _shortest_path(topology, src, dst, frozenset(), frozenset())
    if first is None:
        return []
    accepted: list[tuple[float, tuple[int, ...]]] = [first]
    candidates: list[tuple[float, tuple[int, ...]]] = []
    seen: set[tuple[int, ...]] = {first[1]}

    while len(accepted) < k:
        _, prev_path = accepted[-1]
        for i in range(len(prev_path) - 1):
            spur = prev_path[i]
            root = prev_path[: i + 1]
            banned_edges = set()
            for _, path in accepted:
                if len(path) > i and path[: i + 1] == root:
                    banned_edges.add((path[i], path[i + 1]))
            banned_nodes = frozenset(root[:-1])
            spur_result = _shortest_path(
                topology, spur, dst, frozenset(banned_edges), banned_nodes
            )
            if spur_result is None:
                continue
            spur_len, spur_path = spur_result
            total_path = root[:-1] + spur_path
            if total_path in seen:
                continue
            root_len = sum(
                topology.fiber_length((root[j], root[j + 1])) for j in range(i)
            )
            seen.add(total_path)
            heapq.heappush(candidates, (root_len + spur_len, total_path))
        if not candidates:
            break
        accepted.append(heapq.heappop(candidates))

    return [path for _, path in accepted]


def path_length_km(topology: Topology, path: tuple[int, ...]) -> float:
    return sum(
        topology.fiber_length((path[i], path[i + 1])) for i in range(len(path) - 1)
    )
