"""Deterministic Graphviz DOT and JSON output for trees and diagrams."""

from __future__ import annotations

from asif.errors import InvalidDiagram, InvalidTree
from asif.model import (
    DataFlowDiagram,
    DocStatus,
    InterfaceNode,
    InterfaceTree,
    Layer,
    dfd_to_json,
    element_sort_key,
    threats_to_json,
    tree_to_json,
)
from asif.treebuilder import validate_tree

__all__ = ["tree_to_dot", "dfd_to_dot", "tree_to_json", "dfd_to_json", "threats_to_json"]

_STATUS_STYLE = {
    DocStatus.DOCUMENTED: "solid",
    DocStatus.OBSERVED_UNDOCUMENTED: "dashed",
    DocStatus.DECLARED_UNOBSERVED: "dotted",
}


def quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'


def _attrs(**kw: str) -> str:
    return "[" + ", ".join(f"{k}={quote(v)}" for k, v in kw.items()) + "]"


def _cluster_label(layer: Layer) -> str:
    if layer is Layer.FIRMWARE:
        return "Firmware"
    return f"L{layer.ordinal} {layer.label}"


def _tree_node_line(node: InterfaceNode) -> str:
    return f"    {quote(node.id)} {_attrs(label=node.display_name, style=_STATUS_STYLE[node.doc_status])};"


def tree_to_dot(tree: InterfaceTree) -> str:
    """Render ``tree`` as a digraph with one cluster per populated layer.

    Undocumented nodes are dashed, declared-but-unobserved ones dotted.
    Raises :class:`InvalidTree` if the tree breaks any invariant.
    """
    violations = validate_tree(tree)
    if violations:
        raise InvalidTree(violations)
    lines = [
        f"digraph {quote('interface-tree')} {{",
        f"  label={quote(tree.device_name)};",
        "  rankdir=BT;",
        '  node [shape="box"];',
    ]
    for layer in sorted(Layer, key=lambda l: l.sort_key):
        members = tree.layer_nodes(layer)
        if not members:
            continue
        name = "firmware" if layer is Layer.FIRMWARE else f"l{layer.ordinal}"
        lines.append(f"  subgraph {quote('cluster_' + name)} {{")
        lines.append(f"    label={quote(_cluster_label(layer))};")
        lines.extend(_tree_node_line(n) for n in members)
        lines.append("  }")
    for child, parent in sorted(tree.edges):
        lines.append(f"  {quote(child)} -> {quote(parent)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


_DFD_SHAPES = {"EE": "box", "P": "ellipse", "DS": "cylinder"}


def dfd_to_dot(dfd: DataFlowDiagram) -> str:
    """Render ``dfd`` with conventional shapes; the trust boundary is a dashed cluster."""
    members = {m for b in dfd.trust_boundaries for m in b.members}
    known = set(dfd.by_id)
    for b in dfd.trust_boundaries:
        unknown = [m for m in b.members if m not in known]
        if unknown:
            raise InvalidDiagram(f"trust boundary {b.id} lists unknown element {unknown[0]}")
    for f in dfd.data_flows:
        if f.from_id not in known or f.to_id not in known:
            raise InvalidDiagram(f"data flow {f.id} references an unknown element")

    labels = {e.id: e.label for e in (*dfd.external_entities, *dfd.processes, *dfd.data_stores)}

    def node_line(element_id: str, indent: str) -> str:
        shape = _DFD_SHAPES[element_id.split("-")[0]]
        return f"{indent}{quote(element_id)} {_attrs(label=f'{element_id}: {labels[element_id]}', shape=shape)};"

    lines = [f"digraph {quote('dfd-' + dfd.phase.name)} {{",
             f"  label={quote(f'Data flow diagram, {dfd.phase.name} phase')};",
             "  rankdir=LR;"]
    outside = sorted((i for i in labels if i not in members), key=element_sort_key)
    lines.extend(node_line(i, "  ") for i in outside)
    for b in dfd.trust_boundaries:
        lines.append(f"  subgraph {quote('cluster_' + b.id)} {{")
        lines.append(f"    label={quote(f'{b.id}: {b.label}')};")
        lines.append('    style="dashed";')
        lines.extend(node_line(m, "    ") for m in b.members)
        lines.append("  }")
    for f in dfd.data_flows:
        lines.append(f"  {quote(f.from_id)} -> {quote(f.to_id)} "
                     f"{_attrs(label=f.id, tooltip=f.label)};")
    lines.append("}")
    return "\n".join(lines) + "\n"

