#!/usr/bin/env python3
"""Convert discrete-network BIF files to the HUGIN .net subset.

Used to generate the repository-network test fixtures under
tests/networks/ from the BIF sources kept next to them (the .bif.gz
files are the bnlearn-repository parameterizations as bundled by pgmpy).
Number tokens are carried over verbatim so the .net fixture is textually
faithful to the source probabilities.

Usage: bif_to_net.py input.bif[.gz] output.net
"""

from __future__ import annotations

import gzip
import re
import sys
from math import prod
from pathlib import Path


class BifNode:
    def __init__(self, name, states):
        self.name = name
        self.states = states
        self.parents: tuple[str, ...] = ()
        self.rows: dict[tuple[str, ...], list[str]] = {}


def _read_text(path: Path) -> str:
    if path.suffix == ".gz":
        with gzip.open(path, "rt") as fh:
            return fh.read()
    return path.read_text(encoding="utf-8")


def parse_bif(text: str) -> list[BifNode]:
    """Minimal reader for the BIF dialect used by the public repositories."""
    nodes: dict[str, BifNode] = {}
    order: list[str] = []
    var_re = re.compile(
        r"variable\s+(\S+)\s*\{\s*type\s+discrete\s*\[\s*(\d+)\s*\]\s*\{([^}]*)\}\s*;?\s*\}",
        re.S,
    )
    for m in var_re.finditer(text):
        name = m.group(1)
        states = tuple(s.strip() for s in m.group(3).split(","))
        if len(states) != int(m.group(2)):
            raise ValueError(f"{name}: state count mismatch")
        nodes[name] = BifNode(name, states)
        order.append(name)

    prob_re = re.compile(r"probability\s*\(\s*([^)]*)\)\s*\{([^}]*)\}", re.S)
    for m in prob_re.finditer(text):
        header, body = m.group(1), m.group(2)
        if "|" in header:
            child, parent_part = header.split("|", 1)
            parents = tuple(p.strip() for p in parent_part.split(","))
        else:
            child, parents = header, ()
        child = child.strip()
        node = nodes[child]
        node.parents = parents
        if not parents:
            tm = re.search(r"table\s+([^;]*);", body)
            if tm is None:
                raise ValueError(f"{child}: parentless node without table row")
            node.rows[()] = [v.strip() for v in tm.group(1).split(",")]
        else:
            for rm in re.finditer(r"\(([^)]*)\)\s*([^;]*);", body):
                config = tuple(s.strip() for s in rm.group(1).split(","))
                node.rows[config] = [v.strip() for v in rm.group(2).split(",")]
    return [nodes[n] for n in order]


def flat_values(node: BifNode, cards: dict[str, tuple[str, ...]]) -> list[str]:
    """Values in HUGIN order: parent configs C-order, child innermost."""
    parent_states = [cards[p] for p in node.parents]
    expected_rows = prod(len(s) for s in parent_states)
    if len(node.rows) != expected_rows:
        raise ValueError(
            f"{node.name}: {len(node.rows)} rows, expected {expected_rows}"
        )
    out: list[str] = []

    def rec(prefix: tuple[str, ...], remaining) -> None:
        if not remaining:
            row = node.rows[prefix]
            if len(row) != len(node.states):
                raise ValueError(f"{node.name}: bad row length at {prefix}")
            out.extend(row)
            return
        for state in remaining[0]:
            rec(prefix + (state,), remaining[1:])

    rec((), parent_states)
    return out


def _nest(values: list[str], dims: list[int]) -> str:
    if len(dims) == 1:
        return "(" + " ".join(values) + ")"
    group = len(values) // dims[0]
    return "(" + "".join(
        _nest(values[i * group : (i + 1) * group], dims[1:]) for i in range(dims[0])
    ) + ")"


def to_net(nodes: list[BifNode]) -> str:
    cards = {n.name: n.states for n in nodes}
    lines = ["net", "{", "}"]
    for n in nodes:
        lines += [
            f"node {n.name}",
            "{",
            "  states = ( " + " ".join(f'"{s}"' for s in n.states) + " );",
            "}",
        ]
    for n in nodes:
        header = n.name if not n.parents else f"{n.name} | {' '.join(n.parents)}"
        dims = [len(cards[p]) for p in n.parents] + [len(n.states)]
        lines += [
            f"potential ( {header} )",
            "{",
            "  data = " + _nest(flat_values(n, cards), dims) + ";",
            "}",
        ]
    return "\n".join(lines) + "\n"


def convert(src: Path, dst: Path) -> None:
    nodes = parse_bif(_read_text(src))
    dst.write_text(to_net(nodes), encoding="utf-8")
    print(f"{src} -> {dst}: {len(nodes)} nodes")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    convert(Path(sys.argv[1]), Path(sys.argv[2]))
