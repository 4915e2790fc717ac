"""Project an interface tree onto a data flow diagram for one lifecycle phase.

Only two layers feed the diagram: application services become processes
and physical interfaces contribute human interaction and storage media.
Elements are created by fixed rules, in this order:

1. each active L5 service becomes a process;
2. the firmware node becomes the ``Runtime/Firmware`` process;
3. each active storage medium becomes a data store;
4. external entities are added per interaction class present
   (``Operator``, ``Engineering workstation``, ``Network peer``);
5. flows: operator input via each human-input node, each service with its
   external entity, firmware with each store, each service with firmware;
6. one trust boundary (the device) encloses all processes and stores.

Ids are numbered densely in creation order.
"""

from __future__ import annotations

from asif.errors import InvalidDiagram, UnknownPhase
from asif.model import (
    DataFlow,
    DataFlowDiagram,
    DataStore,
    ExternalEntity,
    InterfaceNode,
    InterfaceTree,
    Layer,
    LifecyclePhase,
    NodeKind,
    Process,
    TrustBoundary,
    node_sort_key,
)

OPERATOR = "Operator"
ENGINEERING = "Engineering workstation"
NETWORK_PEER = "Network peer"
FIRMWARE_LABEL = "Runtime/Firmware"
ENGINEERING_ROLE = "engineering"


def is_engineering(node: InterfaceNode) -> bool:
    return node.attributes.get("role") == ENGINEERING_ROLE


def _resolve_phase(tree: InterfaceTree, phase: LifecyclePhase | str) -> LifecyclePhase:
    name = phase if isinstance(phase, str) else phase.name
    found = tree.phase(name)
    if found is None:
        raise UnknownPhase(name)
    return found


def generate_dfd(tree: InterfaceTree, phase: LifecyclePhase | str) -> DataFlowDiagram:
    """Derive the data flow diagram of ``tree`` during ``phase``.

    ``phase`` may be a phase name or a :class:`LifecyclePhase`; it must be one
    of the tree's phases, otherwise :class:`UnknownPhase` is raised.
    """
    resolved = _resolve_phase(tree, phase)
    firmware = tree.firmware
    if firmware is None:
        raise InvalidDiagram("interface tree has no firmware node")

    def active(pred) -> list[InterfaceNode]:
        picked = [n for n in tree.nodes if n.active_in(resolved.name) and pred(n)]
        return sorted(picked, key=node_sort_key)

    services = active(lambda n: n.layer is Layer.APPLICATION)
    stores = active(lambda n: n.kind is NodeKind.STORAGE_MEDIUM)
    inputs = active(lambda n: n.kind is NodeKind.HUMAN_INPUT)

    processes: list[Process] = []
    service_pid: dict[str, str] = {}
    for node in services:
        pid = f"P-{len(processes) + 1}"
        processes.append(Process(pid, node.display_name, node.id))
        service_pid[node.id] = pid
    runtime = Process(f"P-{len(processes) + 1}", FIRMWARE_LABEL, firmware.id)
    processes.append(runtime)

    data_stores = [DataStore(f"DS-{i}", node.display_name, node.id)
                   for i, node in enumerate(stores, 1)]

    wanted = []
    if inputs:
        wanted.append(OPERATOR)
    if any(is_engineering(n) for n in services):
        wanted.append(ENGINEERING)
    if any(not is_engineering(n) for n in services):
        wanted.append(NETWORK_PEER)
    entities = [ExternalEntity(f"EE-{i}", label) for i, label in enumerate(wanted, 1)]
    ee_id = {e.label: e.id for e in entities}

    flows: list[DataFlow] = []

    def flow(src: str, dst: str, label: str, via: str) -> None:
        flows.append(DataFlow(f"DF-{len(flows) + 1}", src, dst, label, via))

    for node in inputs:
        flow(ee_id[OPERATOR], runtime.id, f"{node.display_name} input", node.id)
    for node in services:
        peer = ENGINEERING if is_engineering(node) else NETWORK_PEER
        flow(ee_id[peer], service_pid[node.id], node.display_name, node.id)
    for store, node in zip(data_stores, stores):
        flow(runtime.id, store.id, f"read/write {node.display_name}", node.id)
    for node in services:
        flow(service_pid[node.id], runtime.id, f"{node.display_name} to runtime", node.id)

    boundary = TrustBoundary("TB-1", tree.device_name,
                             tuple(p.id for p in processes) + tuple(s.id for s in data_stores))
    return DataFlowDiagram(resolved, tuple(entities), tuple(processes), tuple(data_stores),
                           tuple(flows), (boundary,))


def check_dfd(dfd: DataFlowDiagram, tree: InterfaceTree | None = None) -> list[str]:
    """Structural problems in a diagram, as human-readable strings."""
    problems = []
    ids = [e.id for e in dfd.elements()] + [b.id for b in dfd.trust_boundaries]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    problems += [f"duplicate element id {i}" for i in dupes]
    for prefix, items in (("EE", dfd.external_entities), ("P", dfd.processes),
                          ("DS", dfd.data_stores), ("DF", dfd.data_flows)):
        expected = [f"{prefix}-{i}" for i in range(1, len(items) + 1)]
        if [x.id for x in items] != expected:
            problems.append(f"{prefix} ids are not numbered densely from 1")
    known = set(dfd.by_id)
    for f in dfd.data_flows:
        for end in (f.from_id, f.to_id):
            if end not in known:
                problems.append(f"{f.id} references unknown element {end}")
    used = {f.from_id for f in dfd.data_flows} | {f.to_id for f in dfd.data_flows}
    for e in dfd.external_entities:
        if e.id not in used:
            problems.append(f"external entity {e.id} has no data flow")
    if tree is not None:
        for item in (*dfd.processes, *dfd.data_stores):
            if item.source_node_id not in tree.by_id:
                problems.append(f"{item.id} traces to unknown node {item.source_node_id}")
    return problems
