"""Directed multilayer multigraph snapshot used by the joint compilers.

Every topology node becomes two vertices, an IP router and an optical
cross-connect. Fibers connect OXC vertices, transmission modules connect the
two layers of one node (one parallel edge per module type and direction),
and installed lightpaths with enough spare capacity appear as virtual
router-to-router edges. Each edge carries the cost annotations the path
algebra consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .intent_dag import IntentDag, LifecycleState, Lightpath
from .topology import Fiber, ModeTuple, NetworkState


def router_vertex(node: int) -> int:
    return node * 2


def oxc_vertex(node: int) -> int:
    return node * 2 + 1


def vertex_node(vertex: int) -> int:
    return vertex // 2


def is_router(vertex: int) -> bool:
    return vertex % 2 == 0


def vertex_label(vertex: int) -> str:
    return f"{'router' if is_router(vertex) else 'oxc'}:{vertex // 2}"


class EdgeKind(Enum):
    OPTICAL = "optical"
    VIRTUAL = "virtual"
    VIRTUAL_TO_OPTICAL = "virtual_to_optical"
    OPTICAL_TO_VIRTUAL = "optical_to_virtual"


@dataclass(slots=True)
class MLEdge:
    index: int
    u: int
    v: int
    kind: EdgeKind
    dist_km: float          # contribution to the open segment's reach budget
    module_cost: float
    port_cost: float
    modes: tuple[ModeTuple, ...]
    virtual: bool
    free_mask: int
    lightpath: int | None   # intent id behind a virtual edge
    length_km: float        # physical length contribution
    module: str | None
    port_rate_gbps: float
    fiber: Fiber | None


class MultilayerGraph:
    def __init__(self, slots_per_fiber: int):
        self.slots_per_fiber = slots_per_fiber
        self.full_mask = (1 << slots_per_fiber) - 1
        self.vertices: list[int] = []
        self.edges: list[MLEdge] = []
        self.out: dict[int, list[int]] = {}

    def add_vertex(self, vertex: int) -> None:
        if vertex not in self.out:
            self.vertices.append(vertex)
            self.out[vertex] = []

    def add_edge(self, **kwargs) -> MLEdge:
        edge = MLEdge(index=len(self.edges), **kwargs)
        self.edges.append(edge)
        self.out[edge.u].append(edge.index)
        return edge

    def to_dict(self) -> dict:
        return {
            "slots_per_fiber": self.slots_per_fiber,
            "vertices": [vertex_label(v) for v in self.vertices],
            "edges": [
                {
                    "index": e.index,
                    "from": vertex_label(e.u),
                    "to": vertex_label(e.v),
                    "kind": e.kind.value,
                    "dist_km": e.dist_km,
                    "module_cost": e.module_cost,
                    "port_cost": e.port_cost,
                    "modes": [m._asdict() for m in e.modes],
                    "virtual": e.virtual,
                    "free_slots": [
                        i for i in range(self.slots_per_fiber) if e.free_mask & (1 << i)
                    ],
                    "lightpath": e.lightpath,
                    "length_km": e.length_km,
                    "module": e.module,
                    "port_rate_gbps": e.port_rate_gbps,
                    "fiber": list(e.fiber) if e.fiber else None,
                }
                for e in self.edges
            ],
        }


def build_multilayer_graph(
    state: NetworkState, dag: IntentDag, demand_gbps: float
) -> MultilayerGraph:
    """Snapshot the network as a multilayer multigraph for one demand.

    Expects state and DAG to be mutually consistent. Lightpaths whose
    residual capacity cannot carry ``demand_gbps`` are left out entirely;
    rebuilding with a larger demand can only remove virtual edges.
    """
    graph = MultilayerGraph(state.slots_per_fiber)
    full = graph.full_mask

    for node in state.topology.nodes:
        graph.add_vertex(router_vertex(node.id))
        graph.add_vertex(oxc_vertex(node.id))

    # Interlayer edges: one transmit and one receive edge per available
    # module type. Both directions carry the module and port cost; a
    # lightpath therefore pays two modules and two ports.
    for node in state.topology.nodes:
        eq = state.equipment[node.id]
        ports_left = eq.available_router_ports()
        if ports_left is not None and ports_left <= 0:
            continue
        for mt in state.catalog.module_types:
            remaining = eq.available_transmodules(mt.name)
            if remaining is not None and remaining <= 0:
                continue
            graph.add_edge(
                u=router_vertex(node.id),
                v=oxc_vertex(node.id),
                kind=EdgeKind.VIRTUAL_TO_OPTICAL,
                dist_km=0.0,
                module_cost=mt.cost,
                port_cost=eq.router_port_cost,
                modes=mt.modes,
                virtual=False,
                free_mask=full,
                lightpath=None,
                length_km=0.0,
                module=mt.name,
                port_rate_gbps=eq.router_port_rate_gbps,
                fiber=None,
            )
            graph.add_edge(
                u=oxc_vertex(node.id),
                v=router_vertex(node.id),
                kind=EdgeKind.OPTICAL_TO_VIRTUAL,
                dist_km=0.0,
                module_cost=mt.cost,
                port_cost=eq.router_port_cost,
                modes=(),
                virtual=False,
                free_mask=full,
                lightpath=None,
                length_km=0.0,
                module=mt.name,
                port_rate_gbps=eq.router_port_rate_gbps,
                fiber=None,
            )

    # Optical edges: one per directed fiber, carrying the live availability.
    for fiber in state.topology.directed_fibers():
        length = state.topology.fiber_length(fiber)
        graph.add_edge(
            u=oxc_vertex(fiber[0]),
            v=oxc_vertex(fiber[1]),
            kind=EdgeKind.OPTICAL,
            dist_km=length,
            module_cost=0.0,
            port_cost=0.0,
            modes=(),
            virtual=False,
            free_mask=state.fiber_free[fiber],
            lightpath=None,
            length_km=length,
            module=None,
            port_rate_gbps=0.0,
            fiber=fiber,
        )

    # Virtual edges: installed lightpaths with room for this demand. Riding
    # one is free; its modules and ports were paid for at creation.
    for intent in dag.intents():
        if not isinstance(intent.kind, Lightpath):
            continue
        if intent.state is not LifecycleState.INSTALLED:
            continue
        residual = intent.kind.capacity_gbps - intent.kind.groomed_load_gbps
        if residual < demand_gbps:
            continue
        graph.add_edge(
            u=router_vertex(intent.kind.nodes[0]),
            v=router_vertex(intent.kind.nodes[-1]),
            kind=EdgeKind.VIRTUAL,
            dist_km=0.0,
            module_cost=0.0,
            port_cost=0.0,
            modes=(),
            virtual=True,
            free_mask=full,
            lightpath=intent.id,
            length_km=intent.kind.length_km,
            module=None,
            port_rate_gbps=0.0,
            fiber=None,
        )

    return graph
