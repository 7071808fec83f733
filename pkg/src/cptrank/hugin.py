"""Bayesian network ingestion: HUGIN ``.net`` subset and JSON interchange.

The parser covers the discrete-network subset used by the public network
repositories: a ``net {}`` header, ``node NAME { states = ("…" …); }``
blocks and ``potential ( CHILD | P1 … ) { data = ( … ); }`` blocks.
``%`` starts a comment; unrecognized attributes (positions, labels,
experience tables) are skipped.  Continuous, decision and utility nodes
and ``model_data`` constructs are rejected loudly rather than guessed at.

Probability data is stored flat in file order, which enumerates parent
configurations with the last-listed parent varying fastest and the child
state innermost.  That is exactly C order over [parents..., child], so
``cpt_to_tensor`` is a plain reshape.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from math import prod
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .tensors import tensor_from_flat

__all__ = [
    "NetError",
    "ParseError",
    "UnsupportedFeatureError",
    "ValidationError",
    "NodeSpec",
    "Network",
    "parse_net",
    "emit_net",
    "load_network",
    "network_from_json",
    "network_to_json",
    "cpt_to_tensor",
    "select_cpts",
]

CPT_SUM_TOLERANCE = 1e-6


class NetError(Exception):
    """Base class for network ingestion failures."""


class ParseError(NetError):
    """Malformed ``.net`` input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class UnsupportedFeatureError(ParseError):
    """Construct outside the supported subset (continuous nodes, model_data, ...)."""


class ValidationError(NetError):
    """Structurally parsed network violating CPT invariants."""


@dataclass(frozen=True)
class NodeSpec:
    """One discrete variable: states, parent list and flat CPT data."""

    name: str
    states: tuple[str, ...]
    parents: tuple[str, ...]
    cpt_data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.cpt_data, dtype=np.float64).ravel()
        data.flags.writeable = False
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "cpt_data", data)

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeSpec):
            return NotImplemented
        return (
            self.name == other.name
            and self.states == other.states
            and self.parents == other.parents
            and np.array_equal(self.cpt_data, other.cpt_data)
        )

    def __hash__(self):
        return hash((self.name, self.states, self.parents))


@dataclass(frozen=True)
class Network:
    """Parsed Bayesian network: ordered nodes with name lookup."""

    name: str
    nodes: tuple[NodeSpec, ...]
    _index: dict = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "_index", {n.name: n for n in self.nodes})

    def node(self, name: str) -> NodeSpec:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no node named {name!r} in network {self.name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.name == other.name and self.nodes == other.nodes

    def __hash__(self):
        return hash((self.name, tuple(n.name for n in self.nodes)))


# --- tokenizer ---------------------------------------------------------------

_PUNCT = set("(){}|;=")


class _Token(NamedTuple):
    kind: str  # "punct" | "string" | "atom"
    value: str
    line: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c.isspace():
            i += 1
        elif c == "%":
            while i < n and text[i] != "\n":
                i += 1
        elif c in _PUNCT:
            tokens.append(_Token("punct", c, line))
            i += 1
        elif c == '"':
            start_line = line
            i += 1
            buf = []
            while i < n and text[i] != '"':
                if text[i] == "\\" and i + 1 < n:
                    i += 1
                if text[i] == "\n":
                    line += 1
                buf.append(text[i])
                i += 1
            if i >= n:
                raise ParseError("unterminated string", start_line)
            i += 1
            tokens.append(_Token("string", "".join(buf), start_line))
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in _PUNCT and text[i] not in '%"':
                i += 1
            tokens.append(_Token("atom", text[start:i], line))
    return tokens


# --- recursive-descent parser -------------------------------------------------

_UNSUPPORTED_BLOCKS = {"continuous", "decision", "utility", "class", "instance"}
_UNSUPPORTED_ATTRS = {"model_nodes", "model_data"}


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self, expect_desc: str) -> _Token:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1].line if self.tokens else None
            raise ParseError(f"unexpected end of input, expected {expect_desc}", last)
        self.pos += 1
        return tok

    def _expect_punct(self, char: str) -> _Token:
        tok = self._next(f"'{char}'")
        if tok.kind != "punct" or tok.value != char:
            raise ParseError(f"expected '{char}', got {tok.value!r}", tok.line)
        return tok

    def _expect_atom(self, desc: str) -> _Token:
        tok = self._next(desc)
        if tok.kind != "atom":
            raise ParseError(f"expected {desc}, got {tok.value!r}", tok.line)
        return tok

    def _parse_value(self):
        """One attribute value: string, atom, or parenthesized nesting."""
        tok = self._next("attribute value")
        if tok.kind == "punct" and tok.value == "(":
            items = []
            while True:
                nxt = self._peek()
                if nxt is None:
                    raise ParseError("unterminated '('", tok.line)
                if nxt.kind == "punct" and nxt.value == ")":
                    self.pos += 1
                    return items
                items.append(self._parse_value())
        if tok.kind == "punct":
            raise ParseError(f"unexpected {tok.value!r} in attribute value", tok.line)
        return tok

    def _parse_body(self) -> dict:
        """``{ key = value; ... }`` as a dict; later duplicates overwrite."""
        self._expect_punct("{")
        attrs: dict[str, tuple] = {}
        while True:
            tok = self._peek()
            if tok is None:
                raise ParseError("unterminated block, expected '}'", self.tokens[-1].line)
            if tok.kind == "punct" and tok.value == "}":
                self.pos += 1
                return attrs
            key = self._expect_atom("attribute name")
            if key.value in _UNSUPPORTED_ATTRS:
                raise UnsupportedFeatureError(
                    f"unsupported feature {key.value!r}", key.line
                )
            self._expect_punct("=")
            value = self._parse_value()
            self._expect_punct(";")
            attrs[key.value] = (value, key.line)

    def parse_document(self) -> tuple[list, list]:
        nodes: list[tuple[str, tuple[str, ...], int]] = []
        potentials: list[tuple[str, tuple[str, ...], list, int]] = []
        saw_net = False
        while self._peek() is not None:
            tok = self._expect_atom("block keyword")
            if tok.value == "net":
                self._parse_body()
                saw_net = True
            elif tok.value == "node":
                name = self._expect_atom("node name")
                attrs = self._parse_body()
                if "states" not in attrs:
                    raise ParseError(f"node {name.value!r} has no states", name.line)
                states_value, states_line = attrs["states"]
                if not isinstance(states_value, list) or not states_value:
                    raise ParseError(
                        f"node {name.value!r}: states must be a nonempty list", states_line
                    )
                labels = []
                for item in states_value:
                    if not isinstance(item, _Token) or item.kind != "string":
                        raise ParseError(
                            f"node {name.value!r}: state labels must be quoted strings",
                            states_line,
                        )
                    labels.append(item.value)
                nodes.append((name.value, tuple(labels), name.line))
            elif tok.value == "potential":
                self._expect_punct("(")
                child = self._expect_atom("child node name")
                parents = []
                nxt = self._next("'|' or ')'")
                if nxt.kind == "punct" and nxt.value == "|":
                    while True:
                        nxt = self._next("parent name or ')'")
                        if nxt.kind == "punct" and nxt.value == ")":
                            break
                        if nxt.kind != "atom":
                            raise ParseError(
                                f"expected parent name, got {nxt.value!r}", nxt.line
                            )
                        parents.append(nxt.value)
                elif not (nxt.kind == "punct" and nxt.value == ")"):
                    raise ParseError(f"expected '|' or ')', got {nxt.value!r}", nxt.line)
                attrs = self._parse_body()
                if "data" not in attrs:
                    raise ParseError(
                        f"potential for {child.value!r} has no data", child.line
                    )
                data_value, data_line = attrs["data"]
                potentials.append((child.value, tuple(parents), data_value, data_line))
            elif tok.value in _UNSUPPORTED_BLOCKS:
                raise UnsupportedFeatureError(
                    f"unsupported feature: {tok.value!r} block", tok.line
                )
            else:
                raise ParseError(f"unknown block keyword {tok.value!r}", tok.line)
        if not saw_net:
            raise ParseError("document has no net{} header", 1)
        return nodes, potentials


def _flatten_data(value, line: int) -> tuple[list[float], int]:
    """Flatten nested parenthesized numbers, returning values and max depth."""
    if not isinstance(value, list):
        raise ParseError("data must be a parenthesized list", line)

    out: list[float] = []

    def walk(item, depth: int) -> int:
        if isinstance(item, list):
            deepest = depth + 1
            for sub in item:
                deepest = max(deepest, walk(sub, depth + 1))
            return deepest
        if item.kind != "atom":
            raise ParseError(f"expected number in data, got {item.value!r}", item.line)
        try:
            out.append(float(item.value))
        except ValueError:
            raise ParseError(f"expected number in data, got {item.value!r}", item.line) from None
        return depth

    depth = walk(value, 0)
    return out, depth


def _check_cpt_sums(node: NodeSpec, tolerance: float, on_bad_sums: str) -> None:
    if on_bad_sums == "ignore":
        return
    sums = node.cpt_data.reshape(-1, node.cardinality).sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > tolerance)[0]
    if bad.size == 0:
        return
    config = int(bad[0])
    message = (
        f"node {node.name!r}: probabilities for parent configuration {config} "
        f"sum to {float(sums[config])!r}, outside 1 +/- {tolerance}"
    )
    if on_bad_sums == "warn":
        warnings.warn(message)
    else:
        raise ValidationError(message)


def _assemble_network(
    name: str,
    nodes: Iterable[tuple[str, tuple[str, ...], int]],
    potentials: Iterable[tuple[str, tuple[str, ...], list | np.ndarray, int | None]],
    *,
    sum_tolerance: float,
    on_bad_sums: str,
    data_is_flat: bool = False,
) -> Network:
    cards: dict[str, int] = {}
    order: list[str] = []
    for node_name, states, line in nodes:
        if node_name in cards:
            raise ParseError(f"duplicate node {node_name!r}", line)
        cards[node_name] = len(states)
        order.append(node_name)
    states_by_name = {n: s for n, s, _ in nodes}

    specs: dict[str, NodeSpec] = {}
    for child, parents, data_value, line in potentials:
        if child not in cards:
            raise ParseError(f"potential for unknown node {child!r}", line)
        if child in specs:
            raise ParseError(f"duplicate potential for node {child!r}", line)
        for p in parents:
            if p not in cards:
                raise ParseError(
                    f"unknown parent name {p!r} in potential for {child!r}", line
                )
        if data_is_flat:
            flat = np.asarray(data_value, dtype=np.float64).ravel()
        else:
            values, depth = _flatten_data(data_value, line)
            if depth > 1 and depth != len(parents) + 1:
                raise ParseError(
                    f"potential for {child!r}: data nesting depth {depth} does not "
                    f"match {len(parents)} parents (expected {len(parents) + 1})",
                    line,
                )
            flat = np.asarray(values, dtype=np.float64)
        expected = cards[child] * prod(cards[p] for p in parents)
        if flat.size != expected:
            raise ParseError(
                f"potential for {child!r}: wrong data length, expected {expected} "
                f"values, got {flat.size}",
                line,
            )
        specs[child] = NodeSpec(child, states_by_name[child], parents, flat)

    missing = [n for n in order if n not in specs]
    if missing:
        raise ValidationError(f"nodes without a potential block: {missing}")

    net = Network(name, tuple(specs[n] for n in order))
    for node in net.nodes:
        _check_cpt_sums(node, sum_tolerance, on_bad_sums)
    return net


def parse_net(
    text: str,
    name: str = "net",
    *,
    sum_tolerance: float = CPT_SUM_TOLERANCE,
    on_bad_sums: str = "error",
) -> Network:
    """Parse a HUGIN ``.net`` document into a Network.

    ``on_bad_sums`` controls CPT normalization checking: "error" raises
    ValidationError, "warn" downgrades to a warning (repository files are
    often rounded), "ignore" skips the check.
    """
    if on_bad_sums not in ("error", "warn", "ignore"):
        raise ValueError(f"on_bad_sums must be error/warn/ignore, got {on_bad_sums!r}")
    nodes, potentials = _Parser(_tokenize(text)).parse_document()
    return _assemble_network(
        name, nodes, potentials, sum_tolerance=sum_tolerance, on_bad_sums=on_bad_sums
    )


def _format_value(x: float) -> str:
    return repr(float(x))


def _nest_data(flat: np.ndarray, dims: list[int]) -> str:
    """Render flat data as HUGIN nested parentheses for the given dims."""
    if len(dims) == 1:
        return "(" + " ".join(_format_value(v) for v in flat) + ")"
    group = len(flat) // dims[0]
    parts = [
        _nest_data(flat[i * group : (i + 1) * group], dims[1:]) for i in range(dims[0])
    ]
    return "(" + "".join(parts) + ")"


def emit_net(net: Network) -> str:
    """Render a Network back to ``.net`` text; parses back to an equal Network."""
    lines = ["net", "{", "}"]
    for node in net.nodes:
        lines += [
            f"node {node.name}",
            "{",
            "  states = ( " + " ".join(f'"{s}"' for s in node.states) + " );",
            "}",
        ]
    for node in net.nodes:
        header = node.name if not node.parents else f"{node.name} | {' '.join(node.parents)}"
        dims = [len(net.node(p).states) for p in node.parents] + [node.cardinality]
        lines += [
            f"potential ( {header} )",
            "{",
            "  data = " + _nest_data(node.cpt_data, dims) + ";",
            "}",
        ]
    return "\n".join(lines) + "\n"


def network_from_json(text: str, *, sum_tolerance: float = CPT_SUM_TOLERANCE, on_bad_sums: str = "error") -> Network:
    """Load the JSON interchange form (same flat data order as ``.net``)."""
    obj = json.loads(text)
    nodes = [(n["name"], tuple(n["states"]), 0) for n in obj["nodes"]]
    potentials = [
        (n["name"], tuple(n.get("parents", ())), n["cpt"], None) for n in obj["nodes"]
    ]
    return _assemble_network(
        obj.get("name", "net"),
        nodes,
        potentials,
        sum_tolerance=sum_tolerance,
        on_bad_sums=on_bad_sums,
        data_is_flat=True,
    )


def network_to_json(net: Network) -> str:
    return json.dumps(
        {
            "name": net.name,
            "nodes": [
                {
                    "name": n.name,
                    "states": list(n.states),
                    "parents": list(n.parents),
                    "cpt": [float(x) for x in n.cpt_data],
                }
                for n in net.nodes
            ],
        },
        indent=1,
    )


def load_network(path, *, sum_tolerance: float = CPT_SUM_TOLERANCE, on_bad_sums: str = "error") -> Network:
    """Read a network file (.json interchange or HUGIN .net) from disk."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".json":
        return network_from_json(text, sum_tolerance=sum_tolerance, on_bad_sums=on_bad_sums)
    return parse_net(text, name=p.stem, sum_tolerance=sum_tolerance, on_bad_sums=on_bad_sums)


def cpt_to_tensor(node: NodeSpec, net: Network) -> np.ndarray:
    """View a node's CPT as a tensor with dims [parents..., child].

    Entry (i_1,...,i_m, c) is P(X = state_c | parents at configuration
    (i_1..i_m)); the file's flat order maps onto this shape directly.
    """
    dims = [net.node(p).cardinality for p in node.parents] + [node.cardinality]
    return tensor_from_flat(dims, node.cpt_data)


def select_cpts(net: Network, min_parents: int) -> list[NodeSpec]:
    """Nodes with at least ``min_parents`` parents, in network order."""
    if min_parents < 0:
        raise ValueError("min_parents must be >= 0")
    return [n for n in net.nodes if len(n.parents) >= min_parents]
