"""STRIDE-per-element threat enumeration over a data flow diagram."""

from __future__ import annotations

from types import MappingProxyType

from asif.model import (
    STRIDE_ORDER,
    DataFlow,
    DataFlowDiagram,
    ElementType,
    StrideCategory,
    Threat,
    element_type_of,
)

S, T, R, I, D, E = STRIDE_ORDER

APPLICABILITY = MappingProxyType({
    ElementType.EXTERNAL_ENTITY: (S, R),
    ElementType.PROCESS: (S, T, R, I, D, E),
    ElementType.DATA_STORE: (T, R, I, D),
    ElementType.DATA_FLOW: (T, I, D),
})

_VERB = {
    S: "impersonated",
    T: "modified without authorisation",
    R: "acted upon without an attributable record",
    I: "read by an unauthorised party",
    D: "made unavailable",
    E: "used to gain privileges it should not grant",
}


def applicable(element_type: ElementType) -> tuple[StrideCategory, ...]:
    return APPLICABILITY[element_type]


def is_applicable(threat: Threat) -> bool:
    return threat.category in APPLICABILITY[element_type_of(threat.element_id)]


def expected_count(dfd: DataFlowDiagram) -> int:
    """Number of threats :func:`enumerate_threats` yields for ``dfd``."""
    return sum(len(APPLICABILITY[element_type_of(e.id)]) for e in dfd.elements())


def enumerate_threats(dfd: DataFlowDiagram) -> list[Threat]:
    """One threat per (element, applicable category), ordered by element id then S-T-R-I-D-E."""
    threats = []
    for element in dfd.elements():
        kind = element_type_of(element.id)
        crossing = isinstance(element, DataFlow) and dfd.touches_external(element)
        if isinstance(element, DataFlow):
            what = f"data flow {element.id} ({element.label})"
            if crossing:
                what += " crossing the device trust boundary"
        else:
            what = f"{kind.value} {element.id} ({element.label})"
        for category in APPLICABILITY[kind]:
            threats.append(Threat(element.id, category,
                                  f"{what} could be {_VERB[category]}", crossing))
    return threats
