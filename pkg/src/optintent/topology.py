"""Physical topology, equipment catalog, and the mutable resource state.

Topology files use a plain-text ``NODES ( ... ) / LINKS ( ... )`` listing
(grammar in the README). Every undirected link yields two directed fibers
with independent spectrum. Spectrum occupancy is a per-fiber bitmask with
bit ``i`` set when slot ``i`` is free.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

from .exceptions import ParseError, ResourceError

EARTH_RADIUS_KM = 6371.0

# Directed fiber, keyed by (source node id, destination node id).
Fiber = tuple[int, int]


class ModeTuple(NamedTuple):
    """One operating point of a transmission module."""

    rate_gbps: float
    reach_km: float
    slots: int


@dataclass(frozen=True)
class Node:
    id: int
    name: str
    lat: float
    lon: float


@dataclass(frozen=True)
class Link:
    id: int
    a: int
    b: int
    length_km: float


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]

    def __post_init__(self):
        by_name = {n.name: n.id for n in self.nodes}
        lengths: dict[Fiber, float] = {}
        adjacency: dict[int, list[tuple[int, float]]] = {n.id: [] for n in self.nodes}
        for link in self.links:
            lengths[(link.a, link.b)] = link.length_km
            lengths[(link.b, link.a)] = link.length_km
            adjacency[link.a].append((link.b, link.length_km))
            adjacency[link.b].append((link.a, link.length_km))
        for neighbors in adjacency.values():
            neighbors.sort()
        object.__setattr__(self, "_by_name", by_name)
        object.__setattr__(self, "_fiber_length", lengths)
        object.__setattr__(self, "_adjacency", adjacency)

    def node_id(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown node {name!r}") from None

    def node_name(self, node_id: int) -> str:
        return self.nodes[node_id].name

    def neighbors(self, node_id: int) -> list[tuple[int, float]]:
        return self._adjacency[node_id]

    def directed_fibers(self) -> list[Fiber]:
        out: list[Fiber] = []
        for link in self.links:
            out.append((link.a, link.b))
            out.append((link.b, link.a))
        return out

    def fiber_length(self, fiber: Fiber) -> float:
        return self._fiber_length[fiber]


def great_circle_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Haversine distance between two (lat, lon) points in km."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    s = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(s))


def _tokenize(line: str) -> list[str]:
    return line.replace("(", " ( ").replace(")", " ) ").split()


def parse_sndlib(text: str) -> Topology:
    """Parse a plain-text topology listing into a Topology.

    Recognizes ``NODES ( name ( lon lat ) ... )`` and
    ``LINKS ( id ( src dst ) [attrs] ... )`` sections. The first numeric
    attribute after the endpoint pair is taken as the link length in km; a
    value of 0, or no attributes at all, means "unspecified" and the length
    falls back to the great-circle distance between the endpoints.
    Lines starting with ``#`` or ``?`` are ignored.
    """
    nodes: list[Node] = []
    links: list[Link] = []
    names: dict[str, int] = {}
    link_ids: set[str] = set()
    section: str | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("?"):
            continue
        tokens = _tokenize(line)
        if tokens[0] in ("NODES", "LINKS"):
            if len(tokens) < 2 or tokens[1] != "(":
                raise ParseError(f"expected '(' after {tokens[0]}", lineno)
            section = tokens[0]
            tokens = tokens[2:]
            if not tokens:
                continue
        if tokens == [")"]:
            section = None
            continue
        if section is None:
            raise ParseError(f"unexpected content outside a section: {line!r}", lineno)

        if section == "NODES":
            # name ( lon lat )
            if len(tokens) != 5 or tokens[1] != "(" or tokens[4] != ")":
                raise ParseError(f"malformed node record: {line!r}", lineno)
            name = tokens[0]
            if name in names:
                raise ParseError(f"duplicate node {name!r}", lineno)
            try:
                lon, lat = float(tokens[2]), float(tokens[3])
            except ValueError:
                raise ParseError(f"bad coordinates in node record: {line!r}", lineno)
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise ParseError(f"coordinates out of range: {line!r}", lineno)
            names[name] = len(nodes)
            nodes.append(Node(len(nodes), name, lat, lon))
        else:
            # id ( src dst ) [attrs ...]
            if len(tokens) < 5 or tokens[1] != "(" or tokens[4] != ")":
                raise ParseError(f"malformed link record: {line!r}", lineno)
            link_id = tokens[0]
            if link_id in link_ids:
                raise ParseError(f"duplicate link id {link_id!r}", lineno)
            src, dst = tokens[2], tokens[3]
            for endpoint in (src, dst):
                if endpoint not in names:
                    raise ParseError(f"unknown endpoint {endpoint}", lineno)
            if src == dst:
                raise ParseError(f"link {link_id!r} is a self-loop", lineno)
            a, b = names[src], names[dst]
            if any({a, b} == {l.a, l.b} for l in links):
                raise ParseError(f"parallel link between {src} and {dst}", lineno)
            length = 0.0
            rest = tokens[5:]
            if rest and rest[0] != "(":
                try:
                    length = float(rest[0])
                except ValueError:
                    raise ParseError(f"bad length in link record: {line!r}", lineno)
                if length < 0:
                    raise ParseError(f"negative length in link record: {line!r}", lineno)
            if length == 0.0:
                na, nb = nodes[a], nodes[b]
                length = great_circle_km((na.lat, na.lon), (nb.lat, nb.lon))
            if length <= 0.0:
                raise ParseError(f"link {link_id!r} has zero length", lineno)
            link_ids.add(link_id)
            links.append(Link(len(links), a, b, length))

    return Topology(tuple(nodes), tuple(links))


def serialize_sndlib(topology: Topology) -> str:
    """Write a Topology back to the plain-text listing with explicit lengths."""
    out = ["NODES ("]
    for n in topology.nodes:
        out.append(f"  {n.name} ( {n.lon!r} {n.lat!r} )")
    out.append(")")
    out.append("LINKS (")
    for l in topology.links:
        src, dst = topology.node_name(l.a), topology.node_name(l.b)
        out.append(f"  L{l.id} ( {src} {dst} ) {l.length_km!r}")
    out.append(")")
    return "\n".join(out) + "\n"


def load_topology(path: str | Path) -> Topology:
    return parse_sndlib(Path(path).read_text())


def topology_to_dict(topology: Topology) -> dict:
    return {
        "nodes": [
            {"id": n.id, "name": n.name, "lat": n.lat, "lon": n.lon}
            for n in topology.nodes
        ],
        "links": [
            {"id": l.id, "a": l.a, "b": l.b, "length_km": l.length_km}
            for l in topology.links
        ],
    }


def topology_from_dict(data: dict) -> Topology:
    nodes = tuple(Node(n["id"], n["name"], n["lat"], n["lon"]) for n in data["nodes"])
    links = tuple(Link(l["id"], l["a"], l["b"], l["length_km"]) for l in data["links"])
    return Topology(nodes, links)


@dataclass(frozen=True)
class TransmissionModuleType:
    name: str
    cost: float
    modes: tuple[ModeTuple, ...]

    def __post_init__(self):
        if not self.modes:
            raise ValueError(f"module {self.name!r} has no modes")
        for m in self.modes:
            if m.rate_gbps <= 0 or m.reach_km <= 0 or m.slots < 1:
                raise ValueError(f"module {self.name!r} has an invalid mode {m}")
        for m1 in self.modes:
            for m2 in self.modes:
                if m1 is m2:
                    continue
                if (
                    m1.rate_gbps >= m2.rate_gbps
                    and m1.reach_km >= m2.reach_km
                    and m1.slots <= m2.slots
                ):
                    raise ValueError(
                        f"module {self.name!r}: mode {m2} is redundant next to {m1}"
                    )


@dataclass(frozen=True)
class EquipmentCatalog:
    """Per-node equipment offer: module types, router ports, slot grid."""

    module_types: tuple[TransmissionModuleType, ...]
    port_cost: float
    port_rate_gbps: float
    slots_per_fiber: int
    transmodule_limit: int | None = None  # per node and type; None = unlimited
    router_port_limit: int | None = None  # per node; None = unlimited

    def __post_init__(self):
        if not self.module_types:
            raise ValueError("catalog needs at least one module type")
        if self.slots_per_fiber < 1:
            raise ValueError("slots_per_fiber must be >= 1")
        seen = set()
        for mt in self.module_types:
            if mt.name in seen:
                raise ValueError(f"duplicate module type {mt.name!r}")
            seen.add(mt.name)
        object.__setattr__(self, "_by_name", {mt.name: mt for mt in self.module_types})

    def module(self, name: str) -> TransmissionModuleType:
        return self._by_name[name]

    @property
    def max_rate_gbps(self) -> float:
        return max(m.rate_gbps for mt in self.module_types for m in mt.modes)


def catalog_from_dict(data: dict) -> EquipmentCatalog:
    modules = tuple(
        TransmissionModuleType(
            name=m["name"],
            cost=float(m["cost"]),
            modes=tuple(
                ModeTuple(float(x["rate_gbps"]), float(x["reach_km"]), int(x["slots"]))
                for x in m["modes"]
            ),
        )
        for m in data["module_types"]
    )
    port = data["router_port"]
    pools = data.get("node_defaults", {})
    return EquipmentCatalog(
        module_types=modules,
        port_cost=float(port["cost"]),
        port_rate_gbps=float(port["rate_gbps"]),
        slots_per_fiber=int(data["slots_per_fiber"]),
        transmodule_limit=pools.get("transmodules"),
        router_port_limit=pools.get("router_ports"),
    )


def load_catalog(path: str | Path) -> EquipmentCatalog:
    return catalog_from_dict(json.loads(Path(path).read_text()))


class NodeEquipment:
    """Usage counters for one node's transmission modules and router ports."""

    def __init__(self, catalog: EquipmentCatalog):
        self.used_transmodules: dict[str, int] = {mt.name: 0 for mt in catalog.module_types}
        self.transmodule_limit = catalog.transmodule_limit
        self.used_router_ports = 0
        self.router_port_limit = catalog.router_port_limit
        self.router_port_cost = catalog.port_cost
        self.router_port_rate_gbps = catalog.port_rate_gbps

    def available_transmodules(self, module: str) -> int | None:
        """Remaining count for a module type; None means unlimited."""
        if self.transmodule_limit is None:
            return None
        return self.transmodule_limit - self.used_transmodules[module]

    def available_router_ports(self) -> int | None:
        if self.router_port_limit is None:
            return None
        return self.router_port_limit - self.used_router_ports

    def snapshot(self) -> tuple:
        return (tuple(sorted(self.used_transmodules.items())), self.used_router_ports)


class NetworkState:
    """Single source of truth for spectrum and equipment resources.

    Owned by exactly one compilation/simulation at a time; not thread safe.
    """

    def __init__(self, topology: Topology, catalog: EquipmentCatalog):
        self.topology = topology
        self.catalog = catalog
        self.slots_per_fiber = catalog.slots_per_fiber
        self.full_mask = (1 << catalog.slots_per_fiber) - 1
        self.fiber_free: dict[Fiber, int] = {
            fiber: self.full_mask for fiber in topology.directed_fibers()
        }
        self.equipment: dict[int, NodeEquipment] = {
            node.id: NodeEquipment(catalog) for node in topology.nodes
        }

    # -- spectrum ---------------------------------------------------------

    def _check_interval(self, interval: tuple[int, int]) -> int:
        start, length = interval
        if start < 0 or length < 1 or start + length > self.slots_per_fiber:
            raise ValueError(f"interval {interval} outside the 0..{self.slots_per_fiber} grid")
        return interval_mask_bits(start, length)

    def reserve_slots(self, fiber: Fiber, interval: tuple[int, int]) -> None:
        bits = self._check_interval(interval)
        free = self.fiber_free[fiber]
        if free & bits != bits:
            taken = bits & ~free
            slot = (taken & -taken).bit_length() - 1
            raise ResourceError(f"slot {slot} on fiber {fiber} already occupied")
        self.fiber_free[fiber] = free & ~bits

    def release_slots(self, fiber: Fiber, interval: tuple[int, int]) -> None:
        bits = self._check_interval(interval)
        free = self.fiber_free[fiber]
        if free & bits:
            stray = free & bits
            slot = (stray & -stray).bit_length() - 1
            raise ResourceError(f"slot {slot} on fiber {fiber} is not reserved")
        self.fiber_free[fiber] = free | bits

    def occupied_slots(self, fiber: Fiber) -> int:
        return self.slots_per_fiber - self.fiber_free[fiber].bit_count()

    # -- equipment --------------------------------------------------------

    def reserve_transmodule(self, node: int, module: str) -> None:
        eq = self.equipment[node]
        remaining = eq.available_transmodules(module)
        if remaining is not None and remaining <= 0:
            raise ResourceError(f"no {module!r} transmodule left at node {node}")
        eq.used_transmodules[module] += 1

    def release_transmodule(self, node: int, module: str) -> None:
        eq = self.equipment[node]
        if eq.used_transmodules[module] <= 0:
            raise ResourceError(f"transmodule {module!r} at node {node} is not reserved")
        eq.used_transmodules[module] -= 1

    def reserve_port(self, node: int) -> None:
        eq = self.equipment[node]
        remaining = eq.available_router_ports()
        if remaining is not None and remaining <= 0:
            raise ResourceError(f"no router port left at node {node}")
        eq.used_router_ports += 1

    def release_port(self, node: int) -> None:
        eq = self.equipment[node]
        if eq.used_router_ports <= 0:
            raise ResourceError(f"router port at node {node} is not reserved")
        eq.used_router_ports -= 1

    # -- snapshots and dumps ------------------------------------------------

    def snapshot(self) -> tuple:
        """Comparable value capturing the whole resource state."""
        return (
            tuple(sorted(self.fiber_free.items())),
            tuple((n, eq.snapshot()) for n, eq in sorted(self.equipment.items())),
        )

    def to_dict(self) -> dict:
        fibers = []
        for fiber in sorted(self.fiber_free):
            free = self.fiber_free[fiber]
            occupied = [
                i for i in range(self.slots_per_fiber) if not free & (1 << i)
            ]
            fibers.append({"a": fiber[0], "b": fiber[1], "occupied": occupied})
        equipment = []
        for node in sorted(self.equipment):
            eq = self.equipment[node]
            equipment.append(
                {
                    "node": node,
                    "used_transmodules": dict(sorted(eq.used_transmodules.items())),
                    "transmodule_limit": eq.transmodule_limit,
                    "used_router_ports": eq.used_router_ports,
                    "router_port_limit": eq.router_port_limit,
                    "router_port_cost": eq.router_port_cost,
                    "router_port_rate_gbps": eq.router_port_rate_gbps,
                }
            )
        return {
            "slots_per_fiber": self.slots_per_fiber,
            "topology": topology_to_dict(self.topology),
            "fibers": fibers,
            "equipment": equipment,
        }

    @classmethod
    def from_dict(cls, data: dict, catalog: EquipmentCatalog) -> "NetworkState":
        topology = topology_from_dict(data["topology"])
        state = cls(topology, catalog)
        if data["slots_per_fiber"] != catalog.slots_per_fiber:
            raise ValueError("state dump and catalog disagree on slots_per_fiber")
        for rec in data["fibers"]:
            fiber = (rec["a"], rec["b"])
            mask = state.full_mask
            for slot in rec["occupied"]:
                mask &= ~(1 << slot)
            state.fiber_free[fiber] = mask
        for rec in data["equipment"]:
            eq = state.equipment[rec["node"]]
            eq.used_transmodules.update(rec["used_transmodules"])
            eq.used_router_ports = rec["used_router_ports"]
        return state


def interval_mask_bits(start: int, length: int) -> int:
    return ((1 << length) - 1) << start
