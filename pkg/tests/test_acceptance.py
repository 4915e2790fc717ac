"""Acceptance criteria for the PLC use case and the pipeline invariants.

Each test carries a ``criterion`` marker; ``conftest.py`` prints
one PASS/FAIL line per criterion at the end of the run.
"""

import dataclasses
import json
import random
import time

import pytest
from hypothesis import given, settings, strategies as st

import pcapgen
import randomgen
from asif.cli import main
from asif.dfd import generate_dfd
from asif.ingest import parse_manifest, parse_pcap
from asif.model import (
    DocStatus,
    InterfaceNode,
    InterfaceTree,
    Layer,
    NodeKind,
    tree_from_json,
    tree_to_json,
)
from asif.render import tree_to_dot
from asif.stride import enumerate_threats
from asif.treebuilder import build_tree, undocumented, validate_tree
from conftest import PLC
from dotcheck import parse_dot

C1 = "1 PLC reproduction: 12/5/3/4/9/1 nodes per layer, build < 1 s"
C2 = "2 service-phase DFD has exactly 3 external entities"
C3 = "3 removing SCTP and RPCbind flags and dashes exactly those nodes"
C4 = "4 |threats| = 2|EE| + 6|P| + 4|DS| + 3|DF| on >= 100 random trees"
C5 = "5 big- and little-endian pcap give equal summaries (100 captures)"
C6 = "6 built trees are valid; 20 mutated trees report the mutated element"
C7 = "7 two pipeline runs give byte-identical JSON and DOT"
C8 = "8 tree -> JSON -> tree equality on all generated fixtures"


def _build_args(out):
    return ["build", "--manifest", str(PLC / "manifest.json"),
            "--pcap", str(PLC / "traffic.pcap"), "--ipproto", str(PLC / "ipproto.xml"),
            "--ports", str(PLC / "ports.xml"), "-o", str(out)]


# 1 -----------------------------------------------------------------------


@pytest.mark.criterion(C1)
def test_plc_reproduction(tmp_path):
    start = time.perf_counter()
    code = main(_build_args(tmp_path / "tree.json"))
    elapsed = time.perf_counter() - start
    assert code == 0
    tree = tree_from_json((tmp_path / "tree.json").read_bytes())
    counts = {layer: len(tree.layer_nodes(layer)) for layer in Layer}
    assert counts == {Layer.PHYSICAL: 12, Layer.LINK: 5, Layer.NETWORK: 3,
                      Layer.TRANSPORT: 4, Layer.APPLICATION: 9, Layer.FIRMWARE: 1}
    assert {n.id for n in tree.layer_nodes(Layer.LINK)} == {
        "ethernet", "powerlink", "fieldbus", "rs232", "usb"}
    assert elapsed < 1.0, f"build took {elapsed:.3f} s"


# 2 -----------------------------------------------------------------------


@pytest.mark.criterion(C2)
def test_service_phase_external_entities(tmp_path):
    assert main(_build_args(tmp_path / "tree.json")) == 0
    out = tmp_path / "service.dot"
    assert main(["dfd", "--tree", str(tmp_path / "tree.json"), "--phase", "service",
                 "-o", str(out)]) == 0
    g = parse_dot(out.read_text())
    boxes = sorted(n for n, a in g.all_nodes().items() if a["shape"] == "box")
    assert boxes == ["EE-1", "EE-2", "EE-3"]


# 3 -----------------------------------------------------------------------


def _identity(node):
    # an undeclared service is named after its port, so match services by port
    if node.layer is Layer.APPLICATION:
        return (node.attributes["port"], node.attributes["transport"])
    return node.id


@pytest.mark.criterion(C3)
def test_undocumented_detection(plc_manifest_dict, plc_evidence):
    plc_manifest_dict["declared_services"] = [
        s for s in plc_manifest_dict["declared_services"] if s["id"] not in {"sctp", "rpcbind"}]
    full = build_tree(*plc_evidence)
    tree = build_tree(parse_manifest(json.dumps(plc_manifest_dict)), *plc_evidence[1:])
    removed = {"sctp": "sctp", ("111", "tcp"): "tcp-111"}

    before = {_identity(n): n.doc_status for n in full.nodes}
    after = {_identity(n): n.doc_status for n in tree.nodes}
    assert before.keys() == after.keys()
    assert {k for k in after if after[k] != before[k]} == set(removed)
    assert all(after[k] is DocStatus.OBSERVED_UNDOCUMENTED for k in removed)
    assert {_identity(n) for n in undocumented(tree)} == set(removed)
    nodes = parse_dot(tree_to_dot(tree)).all_nodes()
    assert {n for n, a in nodes.items() if a["style"] == "dashed"} == set(removed.values())


# 4 -----------------------------------------------------------------------


@pytest.mark.criterion(C4)
@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False).map(randomgen.random_evidence))
def test_stride_count_identity(ev):
    tree = build_tree(*ev)
    for phase in tree.phases:
        dfd = generate_dfd(tree, phase)
        assert len(enumerate_threats(dfd)) == (
            2 * len(dfd.external_entities) + 6 * len(dfd.processes)
            + 4 * len(dfd.data_stores) + 3 * len(dfd.data_flows))


@pytest.mark.criterion(C4)
def test_stride_count_identity_plc(plc_tree):
    for phase in plc_tree.phases:
        dfd = generate_dfd(plc_tree, phase)
        assert len(enumerate_threats(dfd)) == (
            2 * len(dfd.external_entities) + 6 * len(dfd.processes)
            + 4 * len(dfd.data_stores) + 3 * len(dfd.data_flows))


# 5 -----------------------------------------------------------------------


@pytest.mark.criterion(C5)
def test_pcap_endianness():
    for seed in range(100):
        frames, expected = randomgen.random_capture(random.Random(seed))
        little = parse_pcap(pcapgen.pcap(frames, "<"))
        big = parse_pcap(pcapgen.pcap(frames, ">"))
        assert little == big, f"seed {seed}"
        assert (set(little.ethertypes), set(little.ip_protocol_numbers),
                little.packet_count) == (expected["ethertypes"],
                                         expected["ip_protocol_numbers"],
                                         expected["packet_count"]), f"seed {seed}"


# 6 -----------------------------------------------------------------------


@pytest.mark.criterion(C6)
@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False).map(randomgen.random_evidence))
def test_built_trees_are_valid(ev):
    assert validate_tree(build_tree(*ev)) == []


def _add_edges(*edges):
    def mutate(tree):
        return dataclasses.replace(tree, edges=tree.edges | frozenset(edges))
    return mutate


def _add_firmware(node_id):
    def mutate(tree):
        extra = InterfaceNode(node_id, Layer.FIRMWARE, "Second firmware", NodeKind.FIRMWARE,
                              DocStatus.DOCUMENTED, frozenset(p.name for p in tree.phases))
        return dataclasses.replace(tree, nodes=tree.nodes + (extra,))
    return mutate


# (label, mutation, element the violation must name)
MUTATIONS = [
    ("skip L5->L2", _add_edges(("opcua-server", "ethernet")), "opcua-server"),
    ("skip L5->L3", _add_edges(("hmi-web-1", "ipv4")), "hmi-web-1"),
    ("skip L5->L1", _add_edges(("rpcbind", "usb-ports")), "rpcbind"),
    ("skip L4->L1", _add_edges(("tcp", "ieee-8023ab")), "tcp"),
    ("skip L4->L2", _add_edges(("icmp", "ethernet")), "icmp"),
    ("skip L3->L1", _add_edges(("ipv4", "fieldbus-connectors")), "ipv4"),
    ("upward L2->L4", _add_edges(("powerlink", "udp")), "powerlink"),
    ("cycle L3<->L2", _add_edges(("ethernet", "ipv6")), "ethernet"),
    ("cycle L4<->L3", _add_edges(("ipv4", "tcp")), "ipv4"),
    ("cycle L5<->L4", _add_edges(("udp", "tftp-server")), "udp"),
    ("cycle via firmware, storage", _add_edges(("cf-card-slot", "firmware")), "cf-card-slot"),
    ("cycle via firmware, service", _add_edges(("opcua-server", "firmware")), "opcua-server"),
    ("cycle via firmware, link", _add_edges(("fieldbus", "firmware")), "fieldbus"),
    ("cycle via firmware, button", _add_edges(("reset-button", "firmware")), "reset-button"),
    ("firmware twin", _add_firmware("firmware-2"), "firmware-2"),
    ("firmware backup", _add_firmware("bootloader"), "bootloader"),
    ("firmware recovery", _add_firmware("recovery-image"), "recovery-image"),
    ("firmware a", _add_firmware("a-firmware"), "a-firmware"),
    ("firmware z", _add_firmware("z-firmware"), "z-firmware"),
    ("firmware numeric", _add_firmware("fw-0"), "fw-0"),
]


def _named(violation) -> set[str]:
    return set(violation.subject.replace("->", ",").split(","))


@pytest.mark.criterion(C6)
@pytest.mark.parametrize("label, mutate, element", MUTATIONS, ids=[m[0] for m in MUTATIONS])
def test_mutated_trees_report_element(plc_tree, label, mutate, element):
    assert validate_tree(plc_tree) == []
    violations = validate_tree(mutate(plc_tree))
    assert violations, label
    assert any(element in _named(v) for v in violations), [str(v) for v in violations]


@pytest.mark.criterion(C6)
def test_twenty_mutations():
    assert len(MUTATIONS) == 20


# 7 -----------------------------------------------------------------------


def _pipeline(directory):
    tree = str(directory / "tree.json")
    assert main(_build_args(directory / "tree.json")) == 0
    assert main(["render", "--tree", tree, "-o", str(directory / "tree.dot")]) == 0
    for phase in ("operation", "service"):
        assert main(["dfd", "--tree", tree, "--phase", phase,
                     "-o", str(directory / f"{phase}.dot")]) == 0
        assert main(["threats", "--tree", tree, "--phase", phase,
                     "-o", str(directory / f"threats-{phase}.json")]) == 0
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.mark.criterion(C7)
def test_determinism(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first, second = _pipeline(tmp_path / "a"), _pipeline(tmp_path / "b")
    assert len(first) == 6
    assert first == second


# 8 -----------------------------------------------------------------------


@pytest.mark.criterion(C8)
def test_round_trip_plc(plc_tree, plc_evidence):
    manifest = plc_evidence[0]
    for tree in (plc_tree, build_tree(manifest),
                 build_tree(manifest, plc_evidence[1], plc_evidence[2], [])):
        assert tree_from_json(tree_to_json(tree)) == tree


@pytest.mark.criterion(C8)
@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False).map(randomgen.random_evidence))
def test_round_trip_random(ev):
    tree = build_tree(*ev)
    again = tree_from_json(tree_to_json(tree))
    assert again == tree
    assert isinstance(again, InterfaceTree)
