"""Parsers for the evidence artifacts fed into the tree builder.

Four inputs are understood: the device manifest (JSON record of the
physical inspection and the vendor documentation), nmap XML from a TCP/UDP
port scan, nmap XML from an IP protocol scan, and classic libpcap captures
with Ethernet framing. Every parser takes raw bytes and is pure.
"""

from __future__ import annotations

import json
import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Any, Iterator

from asif.errors import (
    BadMagic,
    DanglingReference,
    InvalidValue,
    MalformedJson,
    MalformedXml,
    MissingAttribute,
    SchemaViolation,
    TruncatedRecord,
    UnsupportedLinkType,
    ValueOutOfRange,
)
from asif.model import ID_PATTERN, LifecyclePhase, NodeKind

# -- manifest ----------------------------------------------------------------

MANIFEST_KEYS = ("device_name", "phases", "physical_interfaces", "link_protocols",
                 "declared_services")
PHYSICAL_KINDS = frozenset({
    NodeKind.NETWORK_PROTOCOL, NodeKind.PHYSICAL_PORT, NodeKind.HUMAN_INPUT,
    NodeKind.STORAGE_MEDIUM,
})
TRANSPORTS = ("tcp", "udp")


@dataclass(frozen=True)
class PhysicalInterfaceDecl:
    id: str
    display_name: str
    kind: NodeKind
    carries: tuple[str, ...] = ()
    phases: tuple[str, ...] | None = None
    documented: bool = True
    description: str | None = None


@dataclass(frozen=True)
class LinkProtocolDecl:
    id: str
    display_name: str
    standalone: bool = False
    documented: bool = True
    phases: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ServiceDecl:
    """A documented service or protocol.

    Entries with a ``port`` describe an application-layer service keyed by
    ``(port, transport)``. Entries without a port declare a network or
    transport protocol and are matched against observed nodes by ``id``.
    """

    id: str
    display_name: str
    port: int | None = None
    transport: str | None = None
    documented: bool = True
    role: str | None = None
    phases: tuple[str, ...] | None = None

    @property
    def key(self) -> tuple[int, str] | None:
        if self.port is None or self.transport is None:
            return None
        return (self.port, self.transport)


@dataclass(frozen=True)
class DeviceManifest:
    device_name: str
    phases: tuple[LifecyclePhase, ...] = ()
    physical_interfaces: tuple[PhysicalInterfaceDecl, ...] = ()
    link_protocols: tuple[LinkProtocolDecl, ...] = ()
    declared_services: tuple[ServiceDecl, ...] = ()

    @property
    def phase_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.phases)


class _Reader:
    """Typed accessors that report the JSON path of whatever is wrong."""

    def __init__(self, obj: Any, path: str) -> None:
        self.obj = obj
        self.path = path

    def require_object(self, allowed: tuple[str, ...], required: tuple[str, ...]) -> None:
        if not isinstance(self.obj, dict):
            raise SchemaViolation(self.path, "expected an object")
        for key in self.obj:
            if key not in allowed:
                raise SchemaViolation(f"{self.path}.{key}", "unknown key")
        for key in required:
            if key not in self.obj:
                raise SchemaViolation(f"{self.path}.{key}", "required key missing")

    def get(self, key: str, typ: type | tuple[type, ...], default: Any = ...) -> Any:
        if key not in self.obj:
            if default is ...:
                raise SchemaViolation(f"{self.path}.{key}", "required key missing")
            return default
        value = self.obj[key]
        # bool is an int subclass; never accept it where a number is wanted
        if (isinstance(value, bool) and bool not in _as_tuple(typ)) or not isinstance(value, typ):
            raise SchemaViolation(f"{self.path}.{key}", f"expected {_type_name(typ)}")
        return value

    def string_list(self, key: str) -> tuple[str, ...] | None:
        value = self.get(key, list, None)
        if value is None:
            return None
        for i, item in enumerate(value):
            if not isinstance(item, str):
                raise SchemaViolation(f"{self.path}.{key}[{i}]", "expected string")
        return tuple(value)

    def ident(self) -> str:
        value = self.get("id", str)
        if not ID_PATTERN.fullmatch(value):
            raise SchemaViolation(f"{self.path}.id", f"{value!r} must match [a-z0-9-]+")
        return value

    def items(self, key: str) -> Iterator["_Reader"]:
        for i, item in enumerate(self.get(key, list)):
            yield _Reader(item, f"{self.path}.{key}[{i}]")


def _as_tuple(typ: type | tuple[type, ...]) -> tuple[type, ...]:
    return typ if isinstance(typ, tuple) else (typ,)


def _type_name(typ: type | tuple[type, ...]) -> str:
    names = {str: "string", int: "integer", bool: "boolean", list: "array", dict: "object"}
    return " or ".join(names.get(t, t.__name__) for t in _as_tuple(typ))


def parse_manifest(data: bytes | str) -> DeviceManifest:
    """Parse and validate a device manifest.

    Raises :class:`MalformedJson` for undecodable input,
    :class:`SchemaViolation` for structural problems and
    :class:`DanglingReference` for phase or ``carries`` references that point
    nowhere.
    """
    try:
        text = data.decode("utf-8") if isinstance(data, bytes) else data
        raw = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from exc

    root = _Reader(raw, "$")
    root.require_object(MANIFEST_KEYS, MANIFEST_KEYS)
    device_name = root.get("device_name", str)
    if not device_name:
        raise SchemaViolation("$.device_name", "must be non-empty")

    phases: list[LifecyclePhase] = []
    for item in root.items("phases"):
        item.require_object(("name", "description"), ("name",))
        name = item.get("name", str)
        if not name:
            raise SchemaViolation(f"{item.path}.name", "must be non-empty")
        if any(p.name == name for p in phases):
            raise SchemaViolation(f"{item.path}.name", f"duplicate phase {name!r}")
        phases.append(LifecyclePhase(name, item.get("description", str, "")))
    phase_names = {p.name for p in phases}

    seen_ids: dict[str, str] = {}

    def claim(item: _Reader) -> str:
        ident = item.ident()
        if ident in seen_ids:
            raise SchemaViolation(f"{item.path}.id",
                                  f"duplicate id {ident!r} (first at {seen_ids[ident]})")
        seen_ids[ident] = item.path
        return ident

    def phase_list(item: _Reader) -> tuple[str, ...] | None:
        names = item.string_list("phases")
        for name in names or ():
            if name not in phase_names:
                raise DanglingReference(name, f"{item.path}.phases")
        return names

    physical: list[PhysicalInterfaceDecl] = []
    for item in root.items("physical_interfaces"):
        item.require_object(
            ("id", "display_name", "kind", "carries", "phases", "documented", "description"),
            ("id", "display_name", "kind", "documented"),
        )
        kind_text = item.get("kind", str)
        try:
            kind = NodeKind(kind_text)
        except ValueError:
            kind = None
        if kind not in PHYSICAL_KINDS:
            raise SchemaViolation(f"{item.path}.kind", f"invalid physical kind {kind_text!r}")
        physical.append(PhysicalInterfaceDecl(
            id=claim(item),
            display_name=item.get("display_name", str),
            kind=kind,
            carries=item.string_list("carries") or (),
            phases=phase_list(item),
            documented=item.get("documented", bool),
            description=item.get("description", str, None),
        ))

    links: list[LinkProtocolDecl] = []
    for item in root.items("link_protocols"):
        item.require_object(
            ("id", "display_name", "standalone", "documented", "phases"),
            ("id", "display_name", "documented"),
        )
        links.append(LinkProtocolDecl(
            id=claim(item),
            display_name=item.get("display_name", str),
            standalone=item.get("standalone", bool, False),
            documented=item.get("documented", bool),
            phases=phase_list(item),
        ))

    link_ids = {link.id for link in links}
    for i, decl in enumerate(physical):
        for ref in decl.carries:
            if ref not in link_ids:
                raise DanglingReference(ref, f"$.physical_interfaces[{i}].carries")

    services: list[ServiceDecl] = []
    keys: dict[tuple[int, str], str] = {}
    for item in root.items("declared_services"):
        item.require_object(
            ("id", "display_name", "port", "transport", "documented", "role", "phases"),
            ("id", "display_name", "documented"),
        )
        port = item.get("port", int, None)
        if port is not None and not 0 <= port <= 65535:
            raise SchemaViolation(f"{item.path}.port", f"{port} outside 0..65535")
        transport = item.get("transport", str, None)
        if transport is not None and transport not in TRANSPORTS:
            raise SchemaViolation(f"{item.path}.transport", f"must be one of {TRANSPORTS}")
        if port is not None and transport is None:
            raise SchemaViolation(f"{item.path}.transport", "required when port is given")
        decl = ServiceDecl(
            id=claim(item),
            display_name=item.get("display_name", str),
            port=port,
            transport=transport,
            documented=item.get("documented", bool),
            role=item.get("role", str, None),
            phases=phase_list(item),
        )
        if decl.key is not None:
            if decl.key in keys:
                raise SchemaViolation(
                    f"{item.path}.port", f"{port}/{transport} already declared at {keys[decl.key]}"
                )
            keys[decl.key] = item.path
        services.append(decl)

    return DeviceManifest(
        device_name=device_name,
        phases=tuple(phases),
        physical_interfaces=tuple(physical),
        link_protocols=tuple(links),
        declared_services=tuple(services),
    )


# -- nmap --------------------------------------------------------------------

PORT_STATES = ("open", "open|filtered", "closed", "filtered")
IP_PROTOCOL_NAMES = {1: "icmp", 6: "tcp", 17: "udp", 132: "sctp"}


@dataclass(frozen=True)
class ObservedService:
    port: int
    transport: str
    state: str
    service_name: str | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port {self.port} outside 0..65535")
        if self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")
        if self.state not in PORT_STATES:
            raise ValueError(f"state must be one of {PORT_STATES}")


@dataclass(frozen=True)
class ObservedTransportProtocol:
    protocol_number: int
    name: str | None = None
    state: str = "open"

    def __post_init__(self) -> None:
        if not 0 <= self.protocol_number <= 255:
            raise ValueError(f"protocol number {self.protocol_number} outside 0..255")


def _nmap_ports(xml: bytes | str) -> Iterator[ET.Element]:
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    yield from root.iter("port")


def _port_fields(port: ET.Element, limit: int) -> tuple[str, int, str]:
    protocol = port.get("protocol")
    if protocol is None:
        raise MissingAttribute("port", "protocol")
    portid_text = port.get("portid")
    if portid_text is None:
        raise MissingAttribute("port", "portid")
    try:
        portid = int(portid_text)
    except ValueError:
        raise InvalidValue("port", "portid", portid_text) from None
    if not 0 <= portid <= limit:
        raise ValueOutOfRange("portid", portid, limit)
    state_el = port.find("state")
    if state_el is None:
        raise MissingAttribute("port", "state")
    state = state_el.get("state")
    if state is None:
        raise MissingAttribute("state", "state")
    return protocol, portid, state


def parse_nmap_port_scan(xml: bytes | str) -> list[ObservedService]:
    """Non-closed TCP/UDP ports from an ``nmap -sS``/``-sU`` XML report, in document order."""
    found = []
    for el in _nmap_ports(xml):
        protocol, portid, state = _port_fields(el, 65535)
        if protocol not in TRANSPORTS:
            raise InvalidValue("port", "protocol", protocol)
        if state not in PORT_STATES:
            raise InvalidValue("state", "state", state)
        if state == "closed":
            continue
        service = el.find("service")
        name = service.get("name") if service is not None else None
        found.append(ObservedService(portid, protocol, state, name or None))
    return found


def parse_nmap_ip_protocol_scan(xml: bytes | str) -> list[ObservedTransportProtocol]:
    """Non-closed entries from an ``nmap -sO`` XML report.

    The protocol number is carried in ``portid``. Names come from a small
    built-in table; the scanner's own guess is ignored.
    """
    found = []
    for el in _nmap_ports(xml):
        protocol, number, state = _port_fields(el, 255)
        if protocol != "ip":
            raise InvalidValue("port", "protocol", protocol)
        if state == "closed":
            continue
        found.append(ObservedTransportProtocol(number, IP_PROTOCOL_NAMES.get(number), state))
    return found


# -- pcap --------------------------------------------------------------------

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806
ETHERTYPE_VLAN = 0x8100
ETHERTYPE_IPV6 = 0x86DD
# values below this are IEEE 802.3 length fields, not EtherTypes
ETHERTYPE_MIN = 0x0600

_GLOBAL_HEADER_LEN = 24
_RECORD_HEADER_LEN = 16


@dataclass(frozen=True)
class TrafficSummary:
    ethertypes: frozenset[int] = frozenset()
    ip_protocol_numbers: frozenset[int] = frozenset()
    packet_count: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ethertypes", frozenset(self.ethertypes))
        object.__setattr__(self, "ip_protocol_numbers", frozenset(self.ip_protocol_numbers))

    @property
    def arp_seen(self) -> bool:
        return ETHERTYPE_ARP in self.ethertypes

    @property
    def ipv4_seen(self) -> bool:
        return ETHERTYPE_IPV4 in self.ethertypes

    @property
    def ipv6_seen(self) -> bool:
        return ETHERTYPE_IPV6 in self.ethertypes


def parse_pcap(data: bytes) -> TrafficSummary:
    """Summarise which protocols appear in a classic Ethernet pcap capture."""
    if len(data) < 4:
        raise BadMagic(bytes(data[:4]))
    magic_bytes = bytes(data[:4])
    if int.from_bytes(magic_bytes, "little") in (PCAP_MAGIC, PCAP_MAGIC_NS):
        order = "<"
    elif int.from_bytes(magic_bytes, "big") in (PCAP_MAGIC, PCAP_MAGIC_NS):
        order = ">"
    else:
        raise BadMagic(magic_bytes)
    if len(data) < _GLOBAL_HEADER_LEN:
        raise TruncatedRecord(0)
    (linktype,) = struct.unpack_from(order + "I", data, 20)
    if linktype & 0xFFFF != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(linktype)

    ethertypes: set[int] = set()
    ip_protocols: set[int] = set()
    count = 0
    offset = _GLOBAL_HEADER_LEN
    while offset < len(data):
        if offset + _RECORD_HEADER_LEN > len(data):
            raise TruncatedRecord(offset)
        _, _, incl_len, _ = struct.unpack_from(order + "IIII", data, offset)
        start = offset + _RECORD_HEADER_LEN
        if start + incl_len > len(data):
            raise TruncatedRecord(offset)
        _dissect(data[start:start + incl_len], ethertypes, ip_protocols)
        count += 1
        offset = start + incl_len
    return TrafficSummary(frozenset(ethertypes), frozenset(ip_protocols), count)


def _dissect(frame: bytes, ethertypes: set[int], ip_protocols: set[int]) -> None:
    if len(frame) < 14:
        return
    ethertype = int.from_bytes(frame[12:14], "big")
    payload = 14
    if ethertype == ETHERTYPE_VLAN:
        if len(frame) < 18:
            return
        ethertype = int.from_bytes(frame[16:18], "big")
        payload = 18
    if ethertype < ETHERTYPE_MIN:
        return
    ethertypes.add(ethertype)
    if ethertype == ETHERTYPE_IPV4 and len(frame) >= payload + 10:
        ip_protocols.add(frame[payload + 9])
    elif ethertype == ETHERTYPE_IPV6 and len(frame) >= payload + 7:
        ip_protocols.add(frame[payload + 6])
