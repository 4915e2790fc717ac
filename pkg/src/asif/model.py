"""Layered domain model: layers, interface trees, lifecycle phases, DFDs, threats.

Every type here is immutable once constructed. Trees and diagrams are plain
values; structural rules that span several nodes are checked by
:func:`asif.treebuilder.validate_tree` instead of the constructors, so that
broken trees can still be represented and reported on.
"""

from __future__ import annotations

import enum
import graphlib
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from asif.errors import MalformedJson, SchemaViolation, UnknownLayer

ID_PATTERN = re.compile(r"[a-z0-9-]+")


class Layer(enum.Enum):
    """The five layers of the hybrid TCP/IP model plus the firmware pseudo-layer."""

    PHYSICAL = (1, "Physical")
    LINK = (2, "Link")
    NETWORK = (3, "Network")
    TRANSPORT = (4, "Transport")
    APPLICATION = (5, "Application")
    FIRMWARE = (None, "Firmware")

    def __init__(self, ordinal: int | None, label: str) -> None:
        self.ordinal = ordinal
        self.label = label

    @property
    def sort_key(self) -> int:
        # firmware sorts after the ordered layers
        return self.ordinal if self.ordinal is not None else 6

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "Layer":
        for layer in cls:
            if layer.ordinal == ordinal:
                return layer
        raise UnknownLayer(str(ordinal))

    def __str__(self) -> str:
        return self.label


def layer_of(name: str) -> Layer:
    """Look up a layer by its (case-insensitive) name."""
    wanted = name.strip().lower()
    for layer in Layer:
        if layer.label.lower() == wanted:
            return layer
    raise UnknownLayer(name)


class NodeKind(str, enum.Enum):
    NETWORK_PROTOCOL = "network-protocol"
    PHYSICAL_PORT = "physical-port"
    HUMAN_INPUT = "human-input"
    STORAGE_MEDIUM = "storage-medium"
    SERVICE = "service"
    FIRMWARE = "firmware"


class DocStatus(str, enum.Enum):
    DOCUMENTED = "documented"
    OBSERVED_UNDOCUMENTED = "observed-undocumented"
    DECLARED_UNOBSERVED = "declared-unobserved"


# kinds that pin a node to exactly one layer
KIND_LAYER = {
    NodeKind.HUMAN_INPUT: Layer.PHYSICAL,
    NodeKind.STORAGE_MEDIUM: Layer.PHYSICAL,
    NodeKind.SERVICE: Layer.APPLICATION,
    NodeKind.FIRMWARE: Layer.FIRMWARE,
}


@dataclass(frozen=True)
class LifecyclePhase:
    name: str
    description: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("lifecycle phase name must be non-empty")


@dataclass(frozen=True)
class InterfaceNode:
    id: str
    layer: Layer
    display_name: str
    kind: NodeKind
    doc_status: DocStatus = DocStatus.DOCUMENTED
    phases: frozenset[str] = frozenset()
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        set_ = object.__setattr__
        set_(self, "kind", NodeKind(self.kind))
        set_(self, "doc_status", DocStatus(self.doc_status))
        set_(self, "phases", frozenset(self.phases))
        set_(self, "attributes", MappingProxyType(dict(sorted(self.attributes.items()))))
        if not ID_PATTERN.fullmatch(self.id):
            raise ValueError(f"node id {self.id!r} must match [a-z0-9-]+")
        pinned = KIND_LAYER.get(self.kind)
        if pinned is not None and pinned is not self.layer:
            raise ValueError(
                f"node {self.id!r}: kind {self.kind.value} requires layer "
                f"{pinned.label}, got {self.layer.label}"
            )
        if self.layer is Layer.FIRMWARE and self.kind is not NodeKind.FIRMWARE:
            raise ValueError(f"node {self.id!r}: firmware layer requires kind firmware")

    def __hash__(self) -> int:
        return hash((self.id, self.layer))

    @property
    def standalone(self) -> bool:
        return self.attributes.get("standalone") == "true"

    def active_in(self, phase: str) -> bool:
        return phase in self.phases

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "layer": self.layer.label,
            "display_name": self.display_name,
            "kind": self.kind.value,
            "doc_status": self.doc_status.value,
            "phases": sorted(self.phases),
            "attributes": dict(self.attributes),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InterfaceNode":
        return cls(
            id=data["id"],
            layer=layer_of(data["layer"]),
            display_name=data["display_name"],
            kind=NodeKind(data["kind"]),
            doc_status=DocStatus(data["doc_status"]),
            phases=frozenset(data.get("phases", ())),
            attributes={str(k): str(v) for k, v in data.get("attributes", {}).items()},
        )


def node_sort_key(node: InterfaceNode) -> tuple[int, str]:
    return (node.layer.sort_key, node.id)


@dataclass(frozen=True)
class InterfaceTree:
    """Layered DAG of a device's interfaces.

    ``edges`` holds ``(child_id, parent_id)`` pairs: the child depends on the
    parent, so arrows point from upper layers down to lower ones.
    ``phases`` lists the lifecycle phases the device was analysed for.
    """

    device_name: str
    nodes: tuple[InterfaceNode, ...] = ()
    edges: frozenset[tuple[str, str]] = frozenset()
    phases: tuple[LifecyclePhase, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "edges", frozenset((c, p) for c, p in self.edges))
        object.__setattr__(self, "phases", tuple(self.phases))

    def __hash__(self) -> int:
        return hash((self.device_name, tuple(n.id for n in self.nodes), self.edges))

    @cached_property
    def by_id(self) -> Mapping[str, InterfaceNode]:
        return MappingProxyType({n.id: n for n in self.nodes})

    def node(self, node_id: str) -> InterfaceNode:
        return self.by_id[node_id]

    def layer_nodes(self, layer: Layer) -> list[InterfaceNode]:
        return [n for n in self.nodes if n.layer is layer]

    @cached_property
    def _adjacency(self) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
        up: dict[str, list[str]] = {}
        down: dict[str, list[str]] = {}
        for child, parent in sorted(self.edges):
            up.setdefault(child, []).append(parent)
            down.setdefault(parent, []).append(child)
        return up, down

    def parents(self, node_id: str) -> list[str]:
        return list(self._adjacency[0].get(node_id, ()))

    def children(self, node_id: str) -> list[str]:
        return sorted(self._adjacency[1].get(node_id, ()))

    @property
    def firmware(self) -> InterfaceNode | None:
        found = self.layer_nodes(Layer.FIRMWARE)
        return found[0] if found else None

    def phase(self, name: str) -> LifecyclePhase | None:
        for phase in self.phases:
            if phase.name == name:
                return phase
        return None

    def topological_order(self) -> list[str]:
        """Node ids ordered so that every parent precedes its children.

        Raises :class:`graphlib.CycleError` if the edges contain a cycle.
        """
        sorter: graphlib.TopologicalSorter[str] = graphlib.TopologicalSorter()
        for node in self.nodes:
            sorter.add(node.id, *self.parents(node.id))
        sorter.prepare()
        order: list[str] = []
        while sorter.is_active():
            ready = sorted(sorter.get_ready())
            order.extend(ready)
            sorter.done(*ready)
        return order

    def to_dict(self) -> dict[str, Any]:
        return {
            "device_name": self.device_name,
            "phases": [{"name": p.name, "description": p.description} for p in self.phases],
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [{"child_id": c, "parent_id": p} for c, p in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InterfaceTree":
        return cls(
            device_name=data["device_name"],
            nodes=tuple(InterfaceNode.from_dict(n) for n in data.get("nodes", ())),
            edges=frozenset((e["child_id"], e["parent_id"]) for e in data.get("edges", ())),
            phases=tuple(
                LifecyclePhase(p["name"], p.get("description", ""))
                for p in data.get("phases", ())
            ),
        )


# -- data flow diagrams ------------------------------------------------------

_ELEMENT_ID = re.compile(r"([A-Z]+)-(\d+)")


def element_sort_key(element_id: str) -> tuple[str, int, str]:
    """Sort ``EE-2`` before ``EE-10``."""
    m = _ELEMENT_ID.fullmatch(element_id)
    if m is None:
        return (element_id, -1, element_id)
    return (m.group(1), int(m.group(2)), element_id)


@dataclass(frozen=True)
class ExternalEntity:
    id: str
    label: str


@dataclass(frozen=True)
class Process:
    id: str
    label: str
    source_node_id: str


@dataclass(frozen=True)
class DataStore:
    id: str
    label: str
    source_node_id: str


@dataclass(frozen=True)
class DataFlow:
    id: str
    from_id: str
    to_id: str
    label: str
    via_node_id: str | None = None


@dataclass(frozen=True)
class TrustBoundary:
    id: str
    label: str
    members: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(sorted(self.members, key=element_sort_key)))


class ElementType(str, enum.Enum):
    EXTERNAL_ENTITY = "ExternalEntity"
    PROCESS = "Process"
    DATA_STORE = "DataStore"
    DATA_FLOW = "DataFlow"


_PREFIX_TYPE = {
    "EE": ElementType.EXTERNAL_ENTITY,
    "P": ElementType.PROCESS,
    "DS": ElementType.DATA_STORE,
    "DF": ElementType.DATA_FLOW,
}


def element_type_of(element_id: str) -> ElementType:
    m = _ELEMENT_ID.fullmatch(element_id)
    if m is None or m.group(1) not in _PREFIX_TYPE:
        raise ValueError(f"not a DFD element id: {element_id!r}")
    return _PREFIX_TYPE[m.group(1)]


def _by_id(items: Iterable[Any]) -> tuple[Any, ...]:
    return tuple(sorted(items, key=lambda x: element_sort_key(x.id)))


@dataclass(frozen=True)
class DataFlowDiagram:
    phase: LifecyclePhase
    external_entities: tuple[ExternalEntity, ...] = ()
    processes: tuple[Process, ...] = ()
    data_stores: tuple[DataStore, ...] = ()
    data_flows: tuple[DataFlow, ...] = ()
    trust_boundaries: tuple[TrustBoundary, ...] = ()

    def __post_init__(self) -> None:
        for name in ("external_entities", "processes", "data_stores", "data_flows",
                     "trust_boundaries"):
            object.__setattr__(self, name, _by_id(getattr(self, name)))

    def elements(self) -> list[ExternalEntity | Process | DataStore | DataFlow]:
        """All threat-bearing elements (boundaries excluded), ordered by id."""
        items = [*self.external_entities, *self.processes, *self.data_stores,
                 *self.data_flows]
        return sorted(items, key=lambda x: element_sort_key(x.id))

    @cached_property
    def by_id(self) -> Mapping[str, Any]:
        return MappingProxyType({e.id: e for e in self.elements()})

    def touches_external(self, flow: DataFlow) -> bool:
        ees = {e.id for e in self.external_entities}
        return flow.from_id in ees or flow.to_id in ees

    def to_dict(self) -> dict[str, Any]:
        return {
            "phase": {"name": self.phase.name, "description": self.phase.description},
            "external_entities": [{"id": e.id, "label": e.label}
                                  for e in self.external_entities],
            "processes": [{"id": p.id, "label": p.label, "source_node_id": p.source_node_id}
                          for p in self.processes],
            "data_stores": [{"id": s.id, "label": s.label, "source_node_id": s.source_node_id}
                            for s in self.data_stores],
            "data_flows": [{"id": f.id, "from_id": f.from_id, "to_id": f.to_id,
                            "label": f.label, "via_node_id": f.via_node_id}
                           for f in self.data_flows],
            "trust_boundaries": [{"id": b.id, "label": b.label, "members": list(b.members)}
                                 for b in self.trust_boundaries],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DataFlowDiagram":
        phase = data["phase"]
        return cls(
            phase=LifecyclePhase(phase["name"], phase.get("description", "")),
            external_entities=tuple(ExternalEntity(**e) for e in data["external_entities"]),
            processes=tuple(Process(**p) for p in data["processes"]),
            data_stores=tuple(DataStore(**s) for s in data["data_stores"]),
            data_flows=tuple(DataFlow(**f) for f in data["data_flows"]),
            trust_boundaries=tuple(
                TrustBoundary(b["id"], b["label"], tuple(b["members"]))
                for b in data["trust_boundaries"]
            ),
        )


# -- threats -----------------------------------------------------------------


class StrideCategory(str, enum.Enum):
    SPOOFING = "Spoofing"
    TAMPERING = "Tampering"
    REPUDIATION = "Repudiation"
    INFORMATION_DISCLOSURE = "InformationDisclosure"
    DENIAL_OF_SERVICE = "DenialOfService"
    ELEVATION_OF_PRIVILEGE = "ElevationOfPrivilege"

    @property
    def letter(self) -> str:
        return _LETTERS[self]


_LETTERS = {
    StrideCategory.SPOOFING: "S",
    StrideCategory.TAMPERING: "T",
    StrideCategory.REPUDIATION: "R",
    StrideCategory.INFORMATION_DISCLOSURE: "I",
    StrideCategory.DENIAL_OF_SERVICE: "D",
    StrideCategory.ELEVATION_OF_PRIVILEGE: "E",
}
STRIDE_ORDER = tuple(StrideCategory)


@dataclass(frozen=True)
class Threat:
    element_id: str
    category: StrideCategory
    rationale: str
    boundary_crossing: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "element_id": self.element_id,
            "category": self.category.value,
            "rationale": self.rationale,
            "boundary_crossing": self.boundary_crossing,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Threat":
        return cls(data["element_id"], StrideCategory(data["category"]),
                   data["rationale"], bool(data["boundary_crossing"]))


# -- JSON --------------------------------------------------------------------


def dumps(data: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def tree_to_json(tree: InterfaceTree) -> str:
    return dumps(tree.to_dict())


def tree_from_json(text: str | bytes) -> InterfaceTree:
    data = _load(text, "tree")
    try:
        return InterfaceTree.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation("tree", f"cannot decode interface tree: {exc}") from exc


def dfd_to_json(dfd: DataFlowDiagram) -> str:
    return dumps(dfd.to_dict())


def dfd_from_json(text: str | bytes) -> DataFlowDiagram:
    data = _load(text, "dfd")
    try:
        return DataFlowDiagram.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation("dfd", f"cannot decode data flow diagram: {exc}") from exc


def threats_to_json(threats: Iterable[Threat]) -> str:
    return dumps([t.to_dict() for t in threats])


def _load(text: str | bytes, what: str) -> Any:
    try:
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        return json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(f"{what}: {exc}") from exc
