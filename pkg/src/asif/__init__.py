"""Asset interface analysis for industrial automation devices.

Evidence from physical inspection, traffic captures and nmap scans is fused
into a five-layer interface tree, which is then projected onto per-phase data
flow diagrams and enumerated for STRIDE threats.
"""

from asif.dfd import generate_dfd
from asif.errors import AsifError
from asif.ingest import (
    DeviceManifest,
    ObservedService,
    ObservedTransportProtocol,
    TrafficSummary,
    parse_manifest,
    parse_nmap_ip_protocol_scan,
    parse_nmap_port_scan,
    parse_pcap,
)
from asif.model import (
    DataFlowDiagram,
    DocStatus,
    InterfaceNode,
    InterfaceTree,
    Layer,
    LifecyclePhase,
    NodeKind,
    StrideCategory,
    Threat,
    layer_of,
    tree_from_json,
    tree_to_json,
)
from asif.render import dfd_to_dot, tree_to_dot
from asif.stride import enumerate_threats
from asif.treebuilder import Violation, build_tree, undocumented, validate_tree

__version__ = "0.1.0"

__all__ = [
    "AsifError", "DataFlowDiagram", "DeviceManifest", "DocStatus", "InterfaceNode",
    "InterfaceTree", "Layer", "LifecyclePhase", "NodeKind", "ObservedService",
    "ObservedTransportProtocol", "StrideCategory", "Threat", "TrafficSummary", "Violation",
    "build_tree", "dfd_to_dot", "enumerate_threats", "generate_dfd", "layer_of",
    "parse_manifest", "parse_nmap_ip_protocol_scan", "parse_nmap_port_scan", "parse_pcap",
    "tree_from_json", "tree_to_dot", "tree_to_json", "undocumented", "validate_tree",
]
