"""The framework-wide intent graph.

One directed acyclic multigraph holds every user intent and the device-level
reservations compiled from them. A child may have several parents: that is
how two demands end up sharing one lightpath. Indices are allocated from a
single counter and never reused.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .exceptions import CycleError, GroomingCapacityError, IntentError
from .spectrum import SlotInterval, interval_mask
from .topology import Fiber, ModeTuple, NetworkState

_LOAD_EPS = 1e-6


class LifecycleState(str, Enum):
    UNCOMPILED = "uncompiled"
    COMPILED = "compiled"
    INSTALLED = "installed"
    BLOCKED = "blocked"


_ALLOWED_TRANSITIONS = {
    (LifecycleState.UNCOMPILED, LifecycleState.COMPILED),
    (LifecycleState.COMPILED, LifecycleState.INSTALLED),
    (LifecycleState.UNCOMPILED, LifecycleState.BLOCKED),
}


@dataclass
class Connectivity:
    """User-facing demand: move ``rate_gbps`` from source to destination."""

    source: int
    destination: int
    rate_gbps: float
    # Lightpath ids in hop order, one tuple per parallel subflow of an
    # oversized demand. Filled in when the intent is installed.
    routes: tuple[tuple[int, ...], ...] = ()


@dataclass
class Lightpath:
    """Optical channel between two routers; the sharing point for grooming."""

    nodes: tuple[int, ...]
    module: str
    mode: ModeTuple
    length_km: float
    capacity_gbps: float
    groomed_load_gbps: float = 0.0


@dataclass
class Spectrum:
    interval: SlotInterval
    fibers: tuple[Fiber, ...]


@dataclass
class NodeTransmodule:
    node: int
    module: str


@dataclass
class NodeRouterPort:
    node: int


@dataclass
class NodeSpectrum:
    node: int
    fiber: Fiber
    interval: SlotInterval


IntentKind = (
    Connectivity | Lightpath | Spectrum | NodeTransmodule | NodeRouterPort | NodeSpectrum
)

_KIND_NAMES = {
    Connectivity: "connectivity",
    Lightpath: "lightpath",
    Spectrum: "spectrum",
    NodeTransmodule: "node_transmodule",
    NodeRouterPort: "node_router_port",
    NodeSpectrum: "node_spectrum",
}


@dataclass
class Intent:
    id: int
    kind: IntentKind
    state: LifecycleState = LifecycleState.UNCOMPILED


class IntentDag:
    """Mutable intent graph with monotonic id allocation."""

    def __init__(self):
        self._nodes: dict[int, Intent] = {}
        self._children: dict[int, list[int]] = {}
        self._parents: dict[int, list[int]] = {}
        # Carried rate per (connectivity, lightpath) edge; used to shrink the
        # lightpath load when a demand is withdrawn.
        self._edge_rate: dict[tuple[int, int], float] = {}
        self._next = 0

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, intent_id: int) -> bool:
        return intent_id in self._nodes

    def intent(self, intent_id: int) -> Intent:
        try:
            return self._nodes[intent_id]
        except KeyError:
            raise IntentError(f"unknown intent {intent_id}") from None

    def intents(self) -> list[Intent]:
        return [self._nodes[i] for i in sorted(self._nodes)]

    def parents(self, intent_id: int) -> list[int]:
        self.intent(intent_id)
        return list(self._parents.get(intent_id, ()))

    def children(self, intent_id: int) -> list[int]:
        self.intent(intent_id)
        return list(self._children.get(intent_id, ()))

    def roots(self) -> list[int]:
        return [i for i in sorted(self._nodes) if not self._parents.get(i)]

    def edge_rate(self, parent: int, child: int) -> float | None:
        return self._edge_rate.get((parent, child))

    # -- construction -------------------------------------------------------

    def _allocate(self, kind: IntentKind) -> int:
        intent_id = self._next
        self._next += 1
        self._nodes[intent_id] = Intent(intent_id, kind)
        self._children[intent_id] = []
        self._parents[intent_id] = []
        return intent_id

    def add_user_intent(self, source: int, destination: int, rate_gbps: float) -> int:
        if source == destination:
            raise IntentError("source and destination must differ")
        if rate_gbps <= 0:
            raise IntentError(f"rate must be positive, got {rate_gbps}")
        return self._allocate(Connectivity(source, destination, rate_gbps))

    def add_child(
        self, parent: int, kind: IntentKind, *, carried_gbps: float | None = None
    ) -> int:
        self.intent(parent)
        if isinstance(kind, Connectivity):
            raise IntentError("connectivity intents are roots and cannot be children")
        child = self._allocate(kind)
        self._children[parent].append(child)
        self._parents[child].append(parent)
        if carried_gbps is not None:
            self._edge_rate[(parent, child)] = carried_gbps
        return child

    def add_grooming_edge(self, parent: int, lightpath: int, rate_gbps: float) -> None:
        self.intent(parent)
        target = self.intent(lightpath)
        if not isinstance(target.kind, Lightpath):
            raise IntentError(f"intent {lightpath} is not a lightpath")
        if (parent, lightpath) in self._edge_rate:
            raise IntentError(f"intent {parent} already uses lightpath {lightpath}")
        residual = target.kind.capacity_gbps - target.kind.groomed_load_gbps
        if rate_gbps > residual + _LOAD_EPS:
            raise GroomingCapacityError(
                f"lightpath {lightpath} has {residual:g} Gbps left, needs {rate_gbps:g}"
            )
        if self._reachable(lightpath, parent):
            raise CycleError(f"edge {parent}->{lightpath} would close a cycle")
        self._children[parent].append(lightpath)
        self._parents[lightpath].append(parent)
        self._edge_rate[(parent, lightpath)] = rate_gbps
        target.kind.groomed_load_gbps += rate_gbps

    def residual_capacity(self, lightpath: int) -> float:
        target = self.intent(lightpath)
        if not isinstance(target.kind, Lightpath):
            raise IntentError(f"intent {lightpath} is not a lightpath")
        return max(0.0, target.kind.capacity_gbps - target.kind.groomed_load_gbps)

    def _reachable(self, start: int, goal: int) -> bool:
        stack = [start]
        seen = set()
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(self._children.get(node, ()))
        return False

    # -- lifecycle ----------------------------------------------------------

    def set_state(self, intent_id: int, new_state: LifecycleState) -> None:
        intent = self.intent(intent_id)
        if (intent.state, new_state) not in _ALLOWED_TRANSITIONS:
            raise IntentError(
                f"illegal transition {intent.state.value} -> {new_state.value} "
                f"for intent {intent_id}"
            )
        intent.state = new_state

    # -- removal ------------------------------------------------------------

    def remove_user_intent(self, root: int) -> list[Intent]:
        """Withdraw a user intent.

        Children whose last parent disappears are removed transitively;
        lightpaths kept alive by other demands merely shed this demand's
        carried rate. Returns the removed descendants in post order
        (children before parents) so the caller can release resources
        without dangling references.
        """
        intent = self.intent(root)
        if not isinstance(intent.kind, Connectivity):
            raise IntentError(f"intent {root} is not a user intent")
        released: list[Intent] = []
        for child in list(self._children[root]):
            self._detach_edge(root, child)
            if not self._parents[child]:
                self._cascade_remove(child, released)
        del self._nodes[root]
        del self._children[root]
        del self._parents[root]
        return released

    def _detach_edge(self, parent: int, child: int) -> None:
        self._children[parent].remove(child)
        self._parents[child].remove(parent)
        rate = self._edge_rate.pop((parent, child), None)
        target = self._nodes[child]
        if rate is not None and isinstance(target.kind, Lightpath):
            target.kind.groomed_load_gbps = max(0.0, target.kind.groomed_load_gbps - rate)

    def _cascade_remove(self, intent_id: int, released: list[Intent]) -> None:
        for child in list(self._children[intent_id]):
            self._detach_edge(intent_id, child)
            if not self._parents[child]:
                self._cascade_remove(child, released)
        released.append(self._nodes[intent_id])
        del self._nodes[intent_id]
        del self._children[intent_id]
        del self._parents[intent_id]

    # -- raw mutations for rollback -----------------------------------------

    def _remove_leaf_node(self, intent_id: int) -> None:
        if self._children[intent_id]:
            raise IntentError(f"intent {intent_id} still has children")
        for parent in list(self._parents[intent_id]):
            self._detach_edge(parent, intent_id)
        del self._nodes[intent_id]
        del self._children[intent_id]
        del self._parents[intent_id]

    def _remove_grooming_edge(self, parent: int, lightpath: int) -> None:
        self._detach_edge(parent, lightpath)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for intent in self.intents():
            rec: dict = {
                "id": intent.id,
                "kind": _KIND_NAMES[type(intent.kind)],
                "state": intent.state.value,
            }
            rec.update(_kind_to_dict(intent.kind))
            nodes.append(rec)
        edges = []
        for parent in sorted(self._children):
            for child in self._children[parent]:
                rec = {"parent": parent, "child": child}
                rate = self._edge_rate.get((parent, child))
                if rate is not None:
                    rec["rate_gbps"] = rate
                edges.append(rec)
        edges.sort(key=lambda e: (e["parent"], e["child"]))
        return {"next_index": self._next, "nodes": nodes, "edges": edges}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "IntentDag":
        dag = cls()
        dag._next = data["next_index"]
        for rec in data["nodes"]:
            kind = _kind_from_dict(rec)
            intent = Intent(rec["id"], kind, LifecycleState(rec["state"]))
            dag._nodes[intent.id] = intent
            dag._children[intent.id] = []
            dag._parents[intent.id] = []
        for rec in data["edges"]:
            parent, child = rec["parent"], rec["child"]
            dag._children[parent].append(child)
            dag._parents[child].append(parent)
            if "rate_gbps" in rec:
                dag._edge_rate[(parent, child)] = rec["rate_gbps"]
        return dag

    @classmethod
    def loads(cls, text: str) -> "IntentDag":
        return cls.from_dict(json.loads(text))


def _kind_to_dict(kind: IntentKind) -> dict:
    if isinstance(kind, Connectivity):
        return {
            "source": kind.source,
            "destination": kind.destination,
            "rate_gbps": kind.rate_gbps,
            "routes": [list(r) for r in kind.routes],
        }
    if isinstance(kind, Lightpath):
        return {
            "nodes": list(kind.nodes),
            "module": kind.module,
            "mode": kind.mode._asdict(),
            "length_km": kind.length_km,
            "capacity_gbps": kind.capacity_gbps,
            "groomed_load_gbps": kind.groomed_load_gbps,
        }
    if isinstance(kind, Spectrum):
        return {
            "interval": {"start": kind.interval.start, "length": kind.interval.length},
            "fibers": [list(f) for f in kind.fibers],
        }
    if isinstance(kind, NodeTransmodule):
        return {"node": kind.node, "module": kind.module}
    if isinstance(kind, NodeRouterPort):
        return {"node": kind.node}
    if isinstance(kind, NodeSpectrum):
        return {
            "node": kind.node,
            "fiber": list(kind.fiber),
            "interval": {"start": kind.interval.start, "length": kind.interval.length},
        }
    raise TypeError(f"unknown intent kind {kind!r}")


def _kind_from_dict(rec: dict) -> IntentKind:
    kind = rec["kind"]
    if kind == "connectivity":
        return Connectivity(
            rec["source"],
            rec["destination"],
            rec["rate_gbps"],
            tuple(tuple(r) for r in rec.get("routes", [])),
        )
    if kind == "lightpath":
        mode = rec["mode"]
        return Lightpath(
            tuple(rec["nodes"]),
            rec["module"],
            ModeTuple(mode["rate_gbps"], mode["reach_km"], mode["slots"]),
            rec["length_km"],
            rec["capacity_gbps"],
            rec["groomed_load_gbps"],
        )
    if kind == "spectrum":
        iv = rec["interval"]
        return Spectrum(
            SlotInterval(iv["start"], iv["length"]),
            tuple((f[0], f[1]) for f in rec["fibers"]),
        )
    if kind == "node_transmodule":
        return NodeTransmodule(rec["node"], rec["module"])
    if kind == "node_router_port":
        return NodeRouterPort(rec["node"])
    if kind == "node_spectrum":
        iv = rec["interval"]
        return NodeSpectrum(
            rec["node"], (rec["fiber"][0], rec["fiber"][1]), SlotInterval(iv["start"], iv["length"])
        )
    raise ValueError(f"unknown intent kind {kind!r}")


def verify_dag(dag: IntentDag, state: NetworkState) -> list[str]:
    """Audit the intent graph against itself and the resource state.

    Returns a list of human-readable violations; an empty list means the
    graph is acyclic, parent rules hold, lightpath loads reconcile with
    their groomers, and spectrum ownership matches the per-fiber occupancy
    exactly (no unreserved owner, no ownerless occupied slot, no slot owned
    twice).
    """
    violations: list[str] = []

    # Acyclicity via Kahn's algorithm.
    indegree = {i: len(dag._parents[i]) for i in dag._nodes}
    queue = [i for i, d in sorted(indegree.items()) if d == 0]
    visited = 0
    while queue:
        node = queue.pop()
        visited += 1
        for child in dag._children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                queue.append(child)
    if visited != len(dag._nodes):
        cyclic = sorted(i for i, d in indegree.items() if d > 0)
        violations.append(f"cycle involving intents {cyclic}")

    for intent in dag.intents():
        parents = dag._parents[intent.id]
        if isinstance(intent.kind, Connectivity):
            if parents:
                violations.append(f"connectivity intent {intent.id} has parents {parents}")
        elif not parents:
            violations.append(f"intent {intent.id} has no parent")

        if isinstance(intent.kind, Lightpath):
            load = intent.kind.groomed_load_gbps
            if load > intent.kind.capacity_gbps + _LOAD_EPS:
                violations.append(
                    f"lightpath {intent.id} overloaded: {load:g} > {intent.kind.capacity_gbps:g}"
                )
            carried = sum(
                dag._edge_rate.get((p, intent.id), 0.0) for p in parents
            )
            if not math.isclose(carried, load, rel_tol=1e-9, abs_tol=1e-6):
                violations.append(
                    f"lightpath {intent.id} load {load:g} != sum of carried rates {carried:g}"
                )

        if isinstance(intent.kind, Spectrum):
            for parent in parents:
                pk = dag._nodes[parent].kind
                if isinstance(pk, Lightpath) and pk.mode.slots != intent.kind.interval.length:
                    violations.append(
                        f"spectrum intent {intent.id} length {intent.kind.interval.length} "
                        f"!= mode slots {pk.mode.slots} of lightpath {parent}"
                    )
            for child in dag._children[intent.id]:
                ck = dag._nodes[child].kind
                if isinstance(ck, NodeSpectrum) and ck.interval != intent.kind.interval:
                    violations.append(
                        f"node-spectrum intent {child} interval {ck.interval} differs from "
                        f"its parent spectrum {intent.id} interval {intent.kind.interval}"
                    )

    # Spectrum ownership vs. fiber occupancy.
    owned: dict[Fiber, int] = {fiber: 0 for fiber in state.fiber_free}
    for intent in dag.intents():
        if not isinstance(intent.kind, NodeSpectrum):
            continue
        if intent.state is not LifecycleState.INSTALLED:
            continue
        bits = interval_mask(intent.kind.interval)
        fiber = intent.kind.fiber
        if fiber not in owned:
            violations.append(f"intent {intent.id} references unknown fiber {fiber}")
            continue
        if owned[fiber] & bits:
            violations.append(f"fiber {fiber} slots owned twice (intent {intent.id})")
        owned[fiber] |= bits
    for fiber in sorted(owned):
        occupied = state.full_mask & ~state.fiber_free[fiber]
        missing = owned[fiber] & ~occupied
        if missing:
            slot = (missing & -missing).bit_length() - 1
            violations.append(f"fiber {fiber} slot {slot} owned by an intent but free in state")
        stray = occupied & ~owned[fiber]
        if stray:
            slot = (stray & -stray).bit_length() - 1
            violations.append(f"fiber {fiber} slot {slot} occupied without an owning intent")

    return violations


def reconcile_resources(dag: IntentDag, state: NetworkState) -> list[str]:
    """Check equipment counters against the installed intents."""
    violations: list[str] = []
    modules: dict[tuple[int, str], int] = {}
    ports: dict[int, int] = {}
    for intent in dag.intents():
        if intent.state is not LifecycleState.INSTALLED:
            continue
        if isinstance(intent.kind, NodeTransmodule):
            key = (intent.kind.node, intent.kind.module)
            modules[key] = modules.get(key, 0) + 1
        elif isinstance(intent.kind, NodeRouterPort):
            ports[intent.kind.node] = ports.get(intent.kind.node, 0) + 1
    for node in sorted(state.equipment):
        eq = state.equipment[node]
        for module, used in sorted(eq.used_transmodules.items()):
            expected = modules.get((node, module), 0)
            if used != expected:
                violations.append(
                    f"node {node} module {module!r}: state says {used} used, DAG says {expected}"
                )
        expected_ports = ports.get(node, 0)
        if eq.used_router_ports != expected_ports:
            violations.append(
                f"node {node} ports: state says {eq.used_router_ports} used, "
                f"DAG says {expected_ports}"
            )
    return violations
