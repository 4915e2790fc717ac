"""Exception hierarchy shared by all asif modules."""

from __future__ import annotations


class AsifError(Exception):
    """Base class for every error raised by asif."""


class UnknownLayer(AsifError, ValueError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown layer name {name!r}")
        self.name = name


class UnknownPhase(AsifError, ValueError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown lifecycle phase {name!r}")
        self.name = name


# -- ingest ------------------------------------------------------------------


class ParseError(AsifError, ValueError):
    """An evidence artifact could not be parsed."""


class MalformedJson(ParseError):
    pass


class SchemaViolation(ParseError):
    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class DanglingReference(ParseError):
    def __init__(self, ref: str, path: str = "") -> None:
        where = f" at {path}" if path else ""
        super().__init__(f"dangling reference {ref!r}{where}")
        self.ref = ref
        self.path = path


class MalformedXml(ParseError):
    pass


class MissingAttribute(ParseError):
    def __init__(self, element: str, attr: str) -> None:
        super().__init__(f"<{element}> is missing attribute {attr!r}")
        self.element = element
        self.attr = attr


class InvalidValue(ParseError):
    def __init__(self, element: str, attr: str, value: str) -> None:
        super().__init__(f"<{element}> has invalid {attr}={value!r}")
        self.element = element
        self.attr = attr
        self.value = value


class ValueOutOfRange(ParseError):
    def __init__(self, attr: str, value: int, limit: int) -> None:
        super().__init__(f"{attr}={value} is outside 0..{limit}")
        self.attr = attr
        self.value = value
        self.limit = limit


class BadMagic(ParseError):
    def __init__(self, magic: bytes) -> None:
        hint = ""
        if magic == b"\x0a\x0d\x0d\x0a":
            hint = " (pcapng is not supported, convert to classic pcap)"
        super().__init__(f"bad pcap magic 0x{magic.hex()}{hint}")
        self.magic = magic


class TruncatedRecord(ParseError):
    def __init__(self, offset: int) -> None:
        super().__init__(f"truncated pcap data at byte offset {offset}")
        self.offset = offset


class UnsupportedLinkType(ParseError):
    def __init__(self, code: int) -> None:
        super().__init__(f"unsupported pcap link type {code} (only Ethernet=1)")
        self.code = code


# -- treebuilder -------------------------------------------------------------


class BuildError(AsifError):
    """Evidence could not be fused into a tree."""


class MissingCarrier(BuildError):
    def __init__(self, link_id: str) -> None:
        super().__init__(
            f"link protocol {link_id!r} has no physical carrier and is not standalone"
        )
        self.link_id = link_id


class InconsistentEvidence(BuildError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


class InvalidTree(AsifError, ValueError):
    def __init__(self, violations) -> None:
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"invalid interface tree: {lines}")
        self.violations = list(violations)


class InvalidDiagram(AsifError, ValueError):
    pass
