"""Fuse a device manifest and observed evidence into an interface tree.

The tree is assembled bottom-up, one layer at a time:

* L1 and L2 come straight from the manifest (physical inspection and
  documentation);
* L3 comes from the traffic capture (IPv4, IPv6, ARP);
* L4 comes from the IP protocol scan;
* L5 comes from the port scan, merged with declared services on
  ``(port, transport)``.

A single firmware node depends on every interface that has no network stack
above it: human inputs, storage media, standalone link protocols and all
application services.
"""

from __future__ import annotations

import graphlib
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from asif.errors import InconsistentEvidence, MissingCarrier
from asif.ingest import (
    DeviceManifest,
    ObservedService,
    ObservedTransportProtocol,
    ServiceDecl,
    TrafficSummary,
)
from asif.model import (
    DocStatus,
    InterfaceNode,
    InterfaceTree,
    Layer,
    NodeKind,
    node_sort_key,
)

FIRMWARE_ID = "firmware"
TRANSPORT_NUMBERS = {"tcp": 6, "udp": 17}
_L4_DISPLAY = {1: "ICMP", 6: "TCP", 17: "UDP", 132: "SCTP"}


def transport_node_id(number: int, name: str | None = None) -> str:
    return name if name else f"ipproto-{number}"


class _Assembly:
    def __init__(self) -> None:
        self.nodes: dict[str, InterfaceNode] = {}
        self.edges: set[tuple[str, str]] = set()

    def add(self, node: InterfaceNode) -> None:
        if node.id in self.nodes:
            raise InconsistentEvidence(f"node id {node.id!r} would be created twice")
        self.nodes[node.id] = node

    def link(self, child: str, parent: str) -> None:
        self.edges.add((child, parent))


def _status(decl_documented: bool | None) -> DocStatus:
    return DocStatus.DOCUMENTED if decl_documented else DocStatus.OBSERVED_UNDOCUMENTED


def build_tree(
    manifest: DeviceManifest,
    traffic: TrafficSummary | None = None,
    transports: Sequence[ObservedTransportProtocol] = (),
    services: Sequence[ObservedService] = (),
) -> InterfaceTree:
    """Build the interface tree for one device.

    Raises :class:`MissingCarrier` when a non-standalone link protocol has no
    physical interface carrying it, and :class:`InconsistentEvidence` when an
    observation has nothing to attach to (e.g. a TCP service without TCP in
    the protocol scan).
    """
    all_phases = frozenset(manifest.phase_names)

    def phases(declared: Iterable[str] | None) -> frozenset[str]:
        return all_phases if declared is None else frozenset(declared)

    out = _Assembly()
    by_id_decl = {d.id: d for d in manifest.declared_services if d.port is None}
    by_key_decl = {d.key: d for d in manifest.declared_services if d.key is not None}

    # L1
    for phy in manifest.physical_interfaces:
        attrs = {"description": phy.description} if phy.description else {}
        out.add(InterfaceNode(phy.id, Layer.PHYSICAL, phy.display_name, phy.kind,
                              _status(phy.documented), phases(phy.phases), attrs))

    # L2
    for link in manifest.link_protocols:
        carriers = [p.id for p in manifest.physical_interfaces if link.id in p.carries]
        if not carriers and not link.standalone:
            raise MissingCarrier(link.id)
        attrs = {"standalone": "true"} if link.standalone else {}
        out.add(InterfaceNode(link.id, Layer.LINK, link.display_name,
                              NodeKind.NETWORK_PROTOCOL, _status(link.documented),
                              phases(link.phases), attrs))
        for carrier in carriers:
            out.link(link.id, carrier)

    def protocol_node(node_id: str, layer: Layer, default_name: str,
                      attrs: dict[str, str]) -> InterfaceNode:
        decl = by_id_decl.get(node_id)
        return InterfaceNode(
            node_id, layer,
            decl.display_name if decl else default_name,
            NodeKind.NETWORK_PROTOCOL,
            _status(decl.documented if decl else None),
            phases(decl.phases if decl else None),
            attrs,
        )

    # L3
    ip_nodes: list[str] = []
    if traffic is not None:
        framing = [link.id for link in manifest.link_protocols if not link.standalone]
        seen = [("ipv4", "IPv4", traffic.ipv4_seen, "0x0800"),
                ("ipv6", "IPv6", traffic.ipv6_seen, "0x86dd"),
                ("arp", "ARP", traffic.arp_seen, "0x0806")]
        for node_id, name, present, ethertype in seen:
            if not present:
                continue
            if not framing:
                raise InconsistentEvidence(
                    f"{name} traffic captured but the manifest has no "
                    "non-standalone link protocol to carry it"
                )
            out.add(protocol_node(node_id, Layer.NETWORK, name, {"ethertype": ethertype}))
            for link_id in framing:
                out.link(node_id, link_id)
            if node_id != "arp":
                ip_nodes.append(node_id)

    # L4
    l4_by_number: dict[int, str] = {}
    for proto in transports:
        if proto.protocol_number in l4_by_number:
            continue
        if not ip_nodes:
            raise InconsistentEvidence(
                f"IP protocol {proto.protocol_number} observed but no IPv4/IPv6 "
                "traffic was captured"
            )
        node_id = transport_node_id(proto.protocol_number, proto.name)
        name = _L4_DISPLAY.get(proto.protocol_number, f"IP protocol {proto.protocol_number}")
        attrs = {"protocol_number": str(proto.protocol_number), "scan_state": proto.state}
        out.add(protocol_node(node_id, Layer.TRANSPORT, name, attrs))
        l4_by_number[proto.protocol_number] = node_id
        for ip in ip_nodes:
            out.link(node_id, ip)

    # L5, observed
    merged: dict[tuple[int, str], list[ObservedService]] = {}
    for svc in services:
        merged.setdefault((svc.port, svc.transport), []).append(svc)
    for (port, transport), seen_as in merged.items():
        parent = l4_by_number.get(TRANSPORT_NUMBERS[transport])
        if parent is None:
            raise InconsistentEvidence(
                f"service {port}/{transport} observed but {transport.upper()} was "
                "not found by the IP protocol scan"
            )
        decl = by_key_decl.get((port, transport))
        guess = next((s.service_name for s in seen_as if s.service_name), None)
        attrs = {"port": str(port), "transport": transport, "scan_state": seen_as[0].state}
        if guess:
            attrs["scanner_name"] = guess
        out.add(_service_node(decl, port, transport, guess, attrs,
                              _status(decl.documented if decl else None),
                              phases(decl.phases if decl else None)))
        out.link(out_id(decl, port, transport), parent)

    # L5, documented but never seen
    for decl in manifest.declared_services:
        if decl.key is None or decl.key in merged or not decl.documented:
            continue
        parent = l4_by_number.get(TRANSPORT_NUMBERS[decl.transport])
        if parent is None:
            continue
        attrs = {"port": str(decl.port), "transport": decl.transport}
        out.add(_service_node(decl, decl.port, decl.transport, None, attrs,
                              DocStatus.DECLARED_UNOBSERVED, phases(decl.phases)))
        out.link(decl.id, parent)

    # firmware
    if FIRMWARE_ID in out.nodes:
        raise InconsistentEvidence(f"id {FIRMWARE_ID!r} is reserved for the firmware node")
    out.add(InterfaceNode(FIRMWARE_ID, Layer.FIRMWARE, "Firmware", NodeKind.FIRMWARE,
                          DocStatus.DOCUMENTED, all_phases))
    for node in list(out.nodes.values()):
        if (node.kind in (NodeKind.HUMAN_INPUT, NodeKind.STORAGE_MEDIUM)
                or (node.layer is Layer.LINK and node.standalone)
                or node.layer is Layer.APPLICATION):
            out.link(FIRMWARE_ID, node.id)

    return InterfaceTree(manifest.device_name, tuple(out.nodes.values()),
                         frozenset(out.edges), manifest.phases)


def out_id(decl: ServiceDecl | None, port: int, transport: str) -> str:
    return decl.id if decl else f"{transport}-{port}"


def _service_node(decl: ServiceDecl | None, port: int, transport: str, guess: str | None,
                  attrs: dict[str, str], status: DocStatus,
                  active: frozenset[str]) -> InterfaceNode:
    # manual verification beats the scanner's port-to-service table
    if decl is not None:
        name = decl.display_name
        if decl.role:
            attrs["role"] = decl.role
    else:
        name = guess or f"port-{port}-{transport}"
    return InterfaceNode(out_id(decl, port, transport), Layer.APPLICATION, name,
                         NodeKind.SERVICE, status, active, attrs)


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """A broken tree invariant. ``subject`` names the offending node or edge."""

    rule: str
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.rule}({self.subject}): {self.detail}" if self.detail else \
            f"{self.rule}({self.subject})"


def _edge_name(child: str, parent: str) -> str:
    return f"{child}->{parent}"


def validate_tree(tree: InterfaceTree) -> list[Violation]:
    """Check every interface-tree invariant; an empty list means the tree is valid."""
    found: list[Violation] = []
    counts = Counter(n.id for n in tree.nodes)
    for node_id in sorted(i for i, c in counts.items() if c > 1):
        found.append(Violation("DuplicateId", node_id, f"{counts[node_id]} nodes share this id"))
    by_id = tree.by_id
    declared_phases = {p.name for p in tree.phases}

    for child, parent in sorted(tree.edges):
        edge = _edge_name(child, parent)
        missing = [x for x in (child, parent) if x not in by_id]
        if missing:
            found.append(Violation("DanglingEdge", edge, f"unknown node {missing[0]!r}"))
            continue
        c, p = by_id[child].layer, by_id[parent].layer
        if Layer.FIRMWARE in (c, p):
            continue
        if c.ordinal != p.ordinal + 1:
            found.append(Violation("LayerSkip", edge,
                                   f"L{c.ordinal} must depend on L{c.ordinal - 1}, "
                                   f"not L{p.ordinal}"))

    for node in tree.nodes:
        ordinal = node.layer.ordinal
        if ordinal is not None and ordinal >= 2 and not node.standalone:
            below = [q for q in tree.parents(node.id)
                     if q in by_id and by_id[q].layer.ordinal == ordinal - 1]
            if not below:
                found.append(Violation("MissingParent", node.id,
                                       f"no parent at L{ordinal - 1}"))
        stray = sorted(node.phases - declared_phases)
        if stray:
            found.append(Violation("UndeclaredPhase", node.id,
                                   f"phases {stray} are not declared by the tree"))

    firmware = sorted(n.id for n in tree.nodes if n.layer is Layer.FIRMWARE)
    if len(firmware) > 1:
        found.append(Violation("DuplicateFirmware", ",".join(firmware),
                               f"{len(firmware)} firmware nodes, at most one allowed"))

    try:
        tree.topological_order()
    except graphlib.CycleError as exc:
        cycle = exc.args[1]
        found.append(Violation("Cycle", "->".join(cycle), "dependency cycle"))
    return found


def undocumented(tree: InterfaceTree) -> list[InterfaceNode]:
    """Nodes seen in the evidence but missing from the documentation."""
    return sorted(
        (n for n in tree.nodes if n.doc_status is DocStatus.OBSERVED_UNDOCUMENTED),
        key=node_sort_key,
    )
