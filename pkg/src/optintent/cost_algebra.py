"""Path labels for the multilayer search: extension rules and dominance.

A label folds the edge annotations along a partial multilayer path: distance
since the last electrical regeneration, accumulated module and port cost,
the candidate modes still alive for the currently open transmission segment,
the joint slot availability of that segment, total physical length, grooming
hops taken, and the committed (module, mode) choices of closed segments.

Extending by an edge either yields a new label or None when no mode survives
the rate, reach, port-rate, or contiguous-slot checks. Structural misuse
(e.g. a fiber hop without an open segment) raises ContractError instead:
the graph shape makes it unreachable during a search.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

from .exceptions import ContractError
from .multilayer import EdgeKind, MLEdge, MultilayerGraph, is_router
from .spectrum import has_run
from .topology import Fiber, ModeTuple


class SegmentPlan(NamedTuple):
    """A committed transmission segment of a path: one future lightpath."""

    nodes: tuple[int, ...]
    module: str
    mode: ModeTuple
    fibers: tuple[Fiber, ...]
    length_km: float


class PathLabel:
    __slots__ = (
        "dist_since_regen",
        "module_cost",
        "port_cost",
        "open_modes",
        "open_module",
        "open_nodes",
        "open_fibers",
        "free_mask",
        "groomed",
        "length_km",
        "chosen",
        "segments",
        "path",
        "edges",
        "edge_set",
        "uses_virtual",
        "dead",
    )

    def __init__(
        self,
        dist_since_regen: float,
        module_cost: float,
        port_cost: float,
        open_modes: tuple[ModeTuple, ...],
        open_module: str | None,
        open_nodes: tuple[int, ...],
        open_fibers: tuple[Fiber, ...],
        free_mask: int,
        groomed: tuple[int, ...],
        length_km: float,
        chosen: tuple[tuple[str, ModeTuple], ...],
        segments: tuple[SegmentPlan, ...],
        path: tuple[int, ...],
        edges: tuple[int, ...],
        uses_virtual: bool,
    ):
        self.dist_since_regen = dist_since_regen
        self.module_cost = module_cost
        self.port_cost = port_cost
        self.open_modes = open_modes
        self.open_module = open_module
        self.open_nodes = open_nodes
        self.open_fibers = open_fibers
        self.free_mask = free_mask
        self.groomed = groomed
        self.length_km = length_km
        self.chosen = chosen
        self.segments = segments
        self.path = path
        self.edges = edges
        self.edge_set = frozenset(edges)
        self.uses_virtual = uses_virtual
        self.dead = False  # set when evicted from a label set

    @property
    def total_cost(self) -> float:
        return self.module_cost + self.port_cost

    @property
    def vertex(self) -> int:
        return self.path[-1]

    @property
    def segment_open(self) -> bool:
        return self.open_module is not None

    def __repr__(self) -> str:  # debugging aid
        return (
            f"PathLabel(path={self.path}, cost={self.total_cost:g}, "
            f"L={self.length_km:g}, D={self.dist_since_regen:g}, "
            f"virtual={self.uses_virtual})"
        )


def initial_label(vertex: int, graph: MultilayerGraph) -> PathLabel:
    """Zero-cost label sitting at a router vertex with no open segment."""
    return PathLabel(
        dist_since_regen=0.0,
        module_cost=0.0,
        port_cost=0.0,
        open_modes=(),
        open_module=None,
        open_nodes=(),
        open_fibers=(),
        free_mask=graph.full_mask,
        groomed=(),
        length_km=0.0,
        chosen=(),
        segments=(),
        path=(vertex,),
        edges=(),
        uses_virtual=False,
    )


def max_rate(label: PathLabel) -> float:
    """Best transmission rate the label can still claim.

    Candidate modes of the open segment when one is open, otherwise the
    committed choices; a label that only rode existing lightpaths is not
    rate-limited and counts as infinite.
    """
    if label.open_modes:
        return max(m.rate_gbps for m in label.open_modes)
    if label.chosen:
        return max(m.rate_gbps for _, m in label.chosen)
    return math.inf


def _close_mode(modes: tuple[ModeTuple, ...]) -> ModeTuple:
    # Slot-thriftiest mode wins; longer reach margin, then higher rate break
    # ties deterministically.
    return min(modes, key=lambda m: (m.slots, -m.reach_km, -m.rate_gbps))


def extend_label(label: PathLabel, edge: MLEdge, demand_gbps: float) -> PathLabel | None:
    """Fold one edge into the label; None when no valid mode survives."""
    if label.path[-1] != edge.u:
        raise ContractError(
            f"label at vertex {label.path[-1]} cannot take edge {edge.index} from {edge.u}"
        )
    if edge.index in label.edges:
        raise ContractError(f"edge {edge.index} already on the path")

    kind = edge.kind
    if kind is EdgeKind.VIRTUAL_TO_OPTICAL:
        if label.segment_open:
            raise ContractError("cannot start a segment inside a segment")
        modes = tuple(
            m
            for m in edge.modes
            if m.rate_gbps >= demand_gbps and m.rate_gbps <= edge.port_rate_gbps
        )
        if not modes:
            return None
        return PathLabel(
            0.0,
            label.module_cost + edge.module_cost,
            label.port_cost + edge.port_cost,
            modes,
            edge.module,
            (edge.u // 2,),
            (),
            _full_mask_of(edge, label),
            label.groomed,
            label.length_km,
            label.chosen,
            label.segments,
            label.path + (edge.v,),
            label.edges + (edge.index,),
            label.uses_virtual,
        )

    if kind is EdgeKind.OPTICAL:
        if not label.segment_open:
            raise ContractError("fiber hop without an open segment")
        dist = label.dist_since_regen + edge.dist_km
        mask = label.free_mask & edge.free_mask
        modes = tuple(
            m
            for m in label.open_modes
            if m.reach_km >= dist and has_run(mask, m.slots)
        )
        if not modes:
            return None
        return PathLabel(
            dist,
            label.module_cost,
            label.port_cost,
            modes,
            label.open_module,
            label.open_nodes + (edge.v // 2,),
            label.open_fibers + (edge.fiber,),
            mask,
            label.groomed,
            label.length_km + edge.length_km,
            label.chosen,
            label.segments,
            label.path + (edge.v,),
            label.edges + (edge.index,),
            label.uses_virtual,
        )

    if kind is EdgeKind.OPTICAL_TO_VIRTUAL:
        if not label.segment_open:
            raise ContractError("cannot close a segment that is not open")
        if edge.module != label.open_module:
            return None  # receive side must match the transmit module type
        if not label.open_fibers:
            return None  # a segment must cross at least one fiber
        mode = _close_mode(label.open_modes)
        segment = SegmentPlan(
            nodes=label.open_nodes,
            module=label.open_module,
            mode=mode,
            fibers=label.open_fibers,
            length_km=label.dist_since_regen,
        )
        return PathLabel(
            0.0,
            label.module_cost + edge.module_cost,
            label.port_cost + edge.port_cost,
            (),
            None,
            (),
            (),
            _full_mask_of(edge, label),
            label.groomed,
            label.length_km,
            label.chosen + ((label.open_module, mode),),
            label.segments + (segment,),
            label.path + (edge.v,),
            label.edges + (edge.index,),
            label.uses_virtual,
        )

    if kind is EdgeKind.VIRTUAL:
        if label.segment_open:
            raise ContractError("cannot ride a lightpath inside an open segment")
        return PathLabel(
            0.0,
            label.module_cost,
            label.port_cost,
            (),
            None,
            (),
            (),
            label.free_mask,
            label.groomed + (edge.lightpath,),
            label.length_km + edge.length_km,
            label.chosen,
            label.segments,
            label.path + (edge.v,),
            label.edges + (edge.index,),
            True,
        )

    raise ContractError(f"unknown edge kind {kind}")


def _full_mask_of(edge: MLEdge, label: PathLabel) -> int:
    # Interlayer edges carry an all-free mask; reuse it so closed labels
    # always hold the canonical full mask.
    return edge.free_mask


def dominates(a: PathLabel, b: PathLabel) -> bool:
    """Strict multi-criteria comparison between same-vertex labels.

    ``a`` dominates ``b`` when it is no worse on distance since
    regeneration, summed cost, virtual-hop usage, best claimable rate, and
    slot availability (bitwise superset), and strictly better on at least
    one of them. Identical labels do not dominate each other.
    """
    if a.dist_since_regen > b.dist_since_regen:
        return False
    cost_a, cost_b = a.total_cost, b.total_cost
    if cost_a > cost_b:
        return False
    if a.uses_virtual > b.uses_virtual:
        return False
    rate_a, rate_b = max_rate(a), max_rate(b)
    if rate_a < rate_b:
        return False
    if b.free_mask & ~a.free_mask:
        return False
    return (
        a.dist_since_regen < b.dist_since_regen
        or cost_a < cost_b
        or a.uses_virtual < b.uses_virtual
        or rate_a > rate_b
        or a.free_mask != b.free_mask
    )


def _require_complete(label: PathLabel) -> None:
    if label.segment_open:
        raise ContractError("objective of a label with an open segment")
    if not is_router(label.path[-1]):
        raise ContractError("objective of a label not ending at a router")


def objective_jml(label: PathLabel) -> float:
    """Total module plus port cost; the joint multilayer objective."""
    _require_complete(label)
    return label.total_cost


def objective_ldjml(label: PathLabel) -> tuple[float, float]:
    """Physical length first, cost as the tie breaker."""
    _require_complete(label)
    return (label.length_km, label.total_cost)


Objective = Callable[[PathLabel], object]
