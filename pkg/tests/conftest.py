import json
from pathlib import Path

import pytest

from asif.ingest import (
    parse_manifest,
    parse_nmap_ip_protocol_scan,
    parse_nmap_port_scan,
    parse_pcap,
)
from asif.treebuilder import build_tree

FIXTURES = Path(__file__).parent / "fixtures"
PLC = FIXTURES / "plc"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def plc_paths():
    return {
        "manifest": PLC / "manifest.json",
        "pcap": PLC / "traffic.pcap",
        "ipproto": PLC / "ipproto.xml",
        "ports": PLC / "ports.xml",
    }


@pytest.fixture
def plc_manifest_dict():
    return json.loads((PLC / "manifest.json").read_text())


@pytest.fixture
def plc_evidence(plc_paths):
    return (
        parse_manifest(plc_paths["manifest"].read_bytes()),
        parse_pcap(plc_paths["pcap"].read_bytes()),
        parse_nmap_ip_protocol_scan(plc_paths["ipproto"].read_bytes()),
        parse_nmap_port_scan(plc_paths["ports"].read_bytes()),
    )


@pytest.fixture
def plc_tree(plc_evidence):
    return build_tree(*plc_evidence)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, aggregated over its tests."""
    results: dict[str, bool] = {}
    for key in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(key, []):
            props = dict(getattr(report, "user_properties", ()))
            if "criterion" not in props:
                continue
            name = props["criterion"]
            results[name] = results.get(name, True) and report.passed
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(results, key=lambda n: int(n.split()[0])):
        terminalreporter.write_line(f"{'PASS' if results[name] else 'FAIL'}  {name}")
