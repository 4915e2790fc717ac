"""``asif`` command line: build, validate, render, dfd and threats.

Exit codes: 0 success, 1 tree failed validation (``validate`` only),
2 unreadable or invalid input, 3 evidence that cannot be fused into a tree,
4 unknown lifecycle phase.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, TextIO

from asif.dfd import generate_dfd
from asif.errors import (
    AsifError,
    BuildError,
    InvalidTree,
    ParseError,
    UnknownPhase,
)
from asif.ingest import (
    parse_manifest,
    parse_nmap_ip_protocol_scan,
    parse_nmap_port_scan,
    parse_pcap,
)
from asif.model import InterfaceTree, Layer, threats_to_json, tree_from_json, tree_to_json
from asif.render import dfd_to_dot, tree_to_dot
from asif.stride import enumerate_threats
from asif.treebuilder import build_tree, undocumented, validate_tree

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2
EXIT_EVIDENCE = 3
EXIT_PHASE = 4


class _Fail(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _read(path: str | Path, parser: Callable, what: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: cannot read {what}: {exc.strerror or exc}") from exc
    try:
        return parser(data)
    except ParseError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: invalid {what}: {exc}") from exc


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: cannot write: {exc.strerror or exc}") from exc


def _load_tree(path: str | Path) -> InterfaceTree:
    tree = _read(path, tree_from_json, "interface tree")
    violations = validate_tree(tree)
    if violations:
        raise _Fail(EXIT_INPUT, f"{path}: invalid interface tree: {InvalidTree(violations)}")
    return tree


def _run(body: Callable[[], int], err: TextIO) -> int:
    try:
        return body()
    except _Fail as exc:
        print(f"asif: error: {exc}", file=err)
        return exc.code
    except UnknownPhase as exc:
        print(f"asif: error: {exc}", file=err)
        return EXIT_PHASE
    except BuildError as exc:
        print(f"asif: error: {exc}", file=err)
        return EXIT_EVIDENCE
    except AsifError as exc:
        print(f"asif: error: {exc}", file=err)
        return EXIT_INPUT


def summary_table(tree: InterfaceTree) -> str:
    rows = []
    for layer in sorted(Layer, key=lambda l: l.sort_key):
        name = "Firmware" if layer is Layer.FIRMWARE else f"L{layer.ordinal} {layer.label}"
        rows.append((name, len(tree.layer_nodes(layer))))
    rows.append(("undocumented", len(undocumented(tree))))
    width = max(len(r[0]) for r in rows)
    lines = [f"{'layer':<{width}}  nodes"]
    lines += [f"{name:<{width}}  {count:>5}" for name, count in rows]
    return "\n".join(lines)


def cmd_build(manifest_path, pcap_path=None, ipproto_xml_path=None, portscan_xml_path=None,
              out_path="tree.json", *, out: TextIO | None = None,
              err: TextIO | None = None) -> int:
    """Fuse the evidence files into an interface tree and write it as JSON."""
    out = out or sys.stdout

    def body() -> int:
        manifest = _read(manifest_path, parse_manifest, "manifest")
        traffic = _read(pcap_path, parse_pcap, "pcap capture") if pcap_path else None
        transports = (_read(ipproto_xml_path, parse_nmap_ip_protocol_scan, "IP protocol scan")
                      if ipproto_xml_path else [])
        services = (_read(portscan_xml_path, parse_nmap_port_scan, "port scan")
                    if portscan_xml_path else [])
        tree = build_tree(manifest, traffic, transports, services)
        _write(out_path, tree_to_json(tree))
        print(f"interface tree for {tree.device_name} written to {out_path}", file=out)
        print(summary_table(tree), file=out)
        return EXIT_OK

    return _run(body, err or sys.stderr)


def cmd_validate(tree_path, *, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout

    def body() -> int:
        tree = _read(tree_path, tree_from_json, "interface tree")
        violations = validate_tree(tree)
        for v in violations:
            print(v, file=out)
        if violations:
            print(f"{len(violations)} violation(s)", file=out)
            return EXIT_INVALID
        print("ok", file=out)
        return EXIT_OK

    return _run(body, err or sys.stderr)


def cmd_render(tree_path, out_path, *, out: TextIO | None = None,
               err: TextIO | None = None) -> int:
    out = out or sys.stdout

    def body() -> int:
        tree = _load_tree(tree_path)
        _write(out_path, tree_to_dot(tree))
        print(f"interface tree DOT written to {out_path}", file=out)
        return EXIT_OK

    return _run(body, err or sys.stderr)


def cmd_dfd(tree_path, phase_name, out_dot_path, *, out: TextIO | None = None,
            err: TextIO | None = None) -> int:
    """Write the data flow diagram of one lifecycle phase as DOT."""
    out = out or sys.stdout

    def body() -> int:
        dfd = generate_dfd(_load_tree(tree_path), phase_name)
        _write(out_dot_path, dfd_to_dot(dfd))
        print(f"{phase_name}: {len(dfd.external_entities)} external entities, "
              f"{len(dfd.processes)} processes, {len(dfd.data_stores)} data stores, "
              f"{len(dfd.data_flows)} data flows", file=out)
        return EXIT_OK

    return _run(body, err or sys.stderr)


def cmd_threats(tree_path, phase_name, out_json_path, *, out: TextIO | None = None,
                err: TextIO | None = None) -> int:
    """Enumerate STRIDE threats for one phase's diagram and write them as JSON."""
    out = out or sys.stdout

    def body() -> int:
        dfd = generate_dfd(_load_tree(tree_path), phase_name)
        threats = enumerate_threats(dfd)
        _write(out_json_path, threats_to_json(threats))
        print(f"threats: {len(threats)}", file=out)
        return EXIT_OK

    return _run(body, err or sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asif", description="Asset interface analysis of industrial devices.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build an interface tree from evidence files")
    p.add_argument("--manifest", required=True, help="device manifest JSON")
    p.add_argument("--pcap", help="classic pcap capture (Ethernet)")
    p.add_argument("--ipproto", help="nmap -sO XML report")
    p.add_argument("--ports", help="nmap -sS/-sU XML report")
    p.add_argument("-o", "--out", required=True, help="output tree JSON")

    p = sub.add_parser("validate", help="check an interface tree's invariants")
    p.add_argument("--tree", required=True)

    p = sub.add_parser("render", help="render an interface tree as DOT")
    p.add_argument("--tree", required=True)
    p.add_argument("-o", "--out", required=True)

    for name, help_ in (("dfd", "data flow diagram of one phase as DOT"),
                        ("threats", "STRIDE threats of one phase as JSON")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--tree", required=True)
        p.add_argument("--phase", required=True)
        p.add_argument("-o", "--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "build":
        return cmd_build(args.manifest, args.pcap, args.ipproto, args.ports, args.out)
    if args.command == "validate":
        return cmd_validate(args.tree)
    if args.command == "render":
        return cmd_render(args.tree, args.out)
    if args.command == "dfd":
        return cmd_dfd(args.tree, args.phase, args.out)
    return cmd_threats(args.tree, args.phase, args.out)


if __name__ == "__main__":
    sys.exit(main())
