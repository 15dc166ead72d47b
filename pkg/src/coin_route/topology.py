"""Network topologies: parsing, validation, and path queries.

A topology document is line oriented::

    # comment
    node 4 source
    node 2 router log1p
    node 1 router power 3
    node 6 destination
    link 4 2
    link 2 6
    regime light 4 -> 6

Only routers carry a load-to-delay function; sources and destinations are
zero-delay endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

ROLES = ("source", "router", "destination")
DELAY_KINDS = ("power", "log1p")
DEFAULT_NETWORKS = {"a": "network-a.topo", "b": "network-b.topo"}


class TopologyError(ValueError):
    """Base class for malformed or invalid topologies."""


class TopologySyntaxError(TopologyError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class TopologyValidationError(TopologyError):
    pass


class UnknownNodeError(KeyError):
    def __str__(self) -> str:
        return f"unknown node id {self.args[0]!r}"


@dataclass(frozen=True)
class DelayFn:
    """Load-to-delay function ``W``: ``x**parameter`` or ``ln(1 + x)``."""

    kind: str
    parameter: float = 1.0

    def __post_init__(self):
        if self.kind not in DELAY_KINDS:
            raise TopologyValidationError(f"unknown delay function kind {self.kind!r}")
        if self.kind == "power" and not (self.parameter > 0 and math.isfinite(self.parameter)):
            # x**p with p <= 0 is not zero at the origin
            raise TopologyValidationError("power exponent must be positive and finite")

    def __call__(self, x: float) -> float:
        if x < 0:
            raise ValueError(f"delay function evaluated at negative load {x!r}")
        if self.kind == "power":
            return x**self.parameter
        return math.log1p(x)

    def vectorized(self, x):
        """Evaluate on a nonnegative numpy array."""
        import numpy as np

        if self.kind == "power":
            return np.power(x, self.parameter)
        return np.log1p(x)

    def to_tokens(self) -> list[str]:
        if self.kind == "power":
            return ["power", _fmt_number(self.parameter)]
        return ["log1p"]


def delay_at(spec: DelayFn, x: float) -> float:
    return spec(x)


@dataclass(frozen=True)
class NodeSpec:
    id: int
    role: str
    delay_fn: DelayFn | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise TopologyValidationError(f"node {self.id}: unknown role {self.role!r}")
        if (self.delay_fn is not None) != (self.role == "router"):
            raise TopologyValidationError(
                f"node {self.id}: delay function must be given for routers and only for routers"
            )


@dataclass(frozen=True)
class NetworkTopology:
    nodes: tuple[NodeSpec, ...]
    links: tuple[tuple[int, int], ...]
    regimes: Mapping[str, tuple[tuple[int, int], ...]]
    name: str = ""
    _succ: dict = field(default=None, init=False, repr=False, compare=False)
    _paths: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        succ: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for a, b in self.links:
            if a in succ:
                succ[a].append(b)
        object.__setattr__(self, "_succ", {k: tuple(sorted(v)) for k, v in succ.items()})
        object.__setattr__(self, "_paths", {})

    def __hash__(self):
        return hash((self.nodes, self.links, tuple(sorted((k, v) for k, v in self.regimes.items()))))

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes)

    def node(self, node_id: int) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownNodeError(node_id)

    def _with_role(self, role: str) -> tuple[int, ...]:
        return tuple(sorted(n.id for n in self.nodes if n.role == role))

    @property
    def sources(self) -> tuple[int, ...]:
        return self._with_role("source")

    @property
    def routers(self) -> tuple[int, ...]:
        return self._with_role("router")

    @property
    def destinations(self) -> tuple[int, ...]:
        return self._with_role("destination")

    def delay_fns(self) -> dict[int, DelayFn]:
        return {n.id: n.delay_fn for n in self.nodes if n.role == "router"}

    def successors(self, node_id: int) -> tuple[int, ...]:
        try:
            return self._succ[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def has_link(self, a: int, b: int) -> bool:
        return b in self._succ.get(a, ())

    def regime(self, name: str) -> tuple[tuple[int, int], ...]:
        try:
            return self.regimes[name]
        except KeyError:
            raise TopologyValidationError(
                f"regime {name!r} not defined (available: {', '.join(self.regimes) or 'none'})"
            ) from None

    def paths(self, source: int, destination: int) -> tuple[tuple[int, ...], ...]:
        """Cached :func:`enumerate_paths` as tuples."""
        key = (source, destination)
        if key not in self._paths:
            self._paths[key] = tuple(tuple(p) for p in enumerate_paths(self, source, destination))
        return self._paths[key]

    def reaches(self, node_id: int, destination: int) -> bool:
        return node_id == destination or bool(self.paths(node_id, destination))

    def max_path_hops(self) -> int:
        """Longest source-to-destination path over all regime pairs, in links."""
        hops = [len(p) - 1 for pairs in self.regimes.values() for s, d in pairs for p in self.paths(s, d)]
        return max(hops, default=0)

    def validate(self) -> "NetworkTopology":
        ids = [n.id for n in self.nodes]
        seen: set[int] = set()
        for i in ids:
            if i in seen:
                raise TopologyValidationError(f"duplicate node id {i}")
            seen.add(i)
        link_set: set[tuple[int, int]] = set()
        for a, b in self.links:
            for end in (a, b):
                if end not in seen:
                    raise TopologyValidationError(f"dangling link {a}->{b}: node {end} is not declared")
            if a == b:
                raise TopologyValidationError(f"cycle detected: self-loop at node {a}")
            if (a, b) in link_set:
                raise TopologyValidationError(f"duplicate link {a}->{b}")
            link_set.add((a, b))
        cycle = _find_cycle(ids, self._succ)
        if cycle:
            raise TopologyValidationError("cycle detected: " + " -> ".join(map(str, cycle)))
        roles = {n.id: n.role for n in self.nodes}
        for a, b in self.links:
            if roles[b] == "source":
                raise TopologyValidationError(f"source {b} has an incoming link from {a}")
            if roles[a] == "destination":
                raise TopologyValidationError(f"destination {a} has an outgoing link to {b}")
        for name, pairs in self.regimes.items():
            for s, d in pairs:
                for end, want in ((s, "source"), (d, "destination")):
                    if end not in roles:
                        raise TopologyValidationError(f"regime {name}: node {end} is not declared")
                    if roles[end] != want:
                        raise TopologyValidationError(f"regime {name}: node {end} is not a {want}")
                if not self.paths(s, d):
                    raise TopologyValidationError(f"regime {name}: unreachable pair {s} -> {d}")
        return self


def _find_cycle(ids: Iterable[int], succ: Mapping[int, tuple[int, ...]]) -> list[int] | None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {i: WHITE for i in ids}
    stack: list[int] = []

    def visit(u: int) -> list[int] | None:
        color[u] = GREY
        stack.append(u)
        for v in succ.get(u, ()):
            if color[v] == GREY:
                return stack[stack.index(v):] + [v]
            if color[v] == WHITE:
                found = visit(v)
                if found:
                    return found
        stack.pop()
        color[u] = BLACK
        return None

    for i in sorted(color):
        if color[i] == WHITE:
            found = visit(i)
            if found:
                return found
    return None


def enumerate_paths(topology: NetworkTopology, source: int, destination: int) -> list[list[int]]:
    """All simple directed paths from ``source`` to ``destination``, sorted lexicographically."""
    topology.successors(source)
    topology.successors(destination)
    out: list[list[int]] = []
    path = [source]

    def dfs(u: int) -> None:
        if u == destination:
            out.append(list(path))
            return
        for v in topology.successors(u):
            if v not in path:
                path.append(v)
                dfs(v)
                path.pop()

    if source != destination:
        dfs(source)
    out.sort()
    return out


def _fmt_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _parse_int(tok: str, line: int, col: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise TopologySyntaxError(f"expected integer {what}, got {tok!r}", line, col) from None


def parse_topology(text: str, name: str = "") -> NetworkTopology:
    """Parse and validate a topology document."""
    nodes: list[NodeSpec] = []
    links: list[tuple[int, int]] = []
    regimes: dict[str, list[tuple[int, int]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = body.split()
        if not toks:
            continue
        cols = []
        pos = 0
        for t in toks:
            pos = body.index(t, pos)
            cols.append(pos + 1)
            pos += len(t)
        kw = toks[0]
        if kw == "node":
            if len(toks) < 3:
                raise TopologySyntaxError("expected 'node <id> <role> [delay]'", lineno, cols[0])
            nid = _parse_int(toks[1], lineno, cols[1], "node id")
            role = toks[2]
            if role not in ROLES:
                raise TopologySyntaxError(f"unknown role {role!r}", lineno, cols[2])
            fn = None
            rest = toks[3:]
            if rest:
                if rest[0] == "power":
                    if len(rest) != 2:
                        raise TopologySyntaxError("expected 'power <exponent>'", lineno, cols[3])
                    try:
                        exp = float(rest[1])
                    except ValueError:
                        raise TopologySyntaxError(f"bad exponent {rest[1]!r}", lineno, cols[4]) from None
                    fn = DelayFn("power", exp)
                elif rest[0] == "log1p":
                    if len(rest) != 1:
                        raise TopologySyntaxError("log1p takes no parameter", lineno, cols[4])
                    fn = DelayFn("log1p")
                else:
                    raise TopologySyntaxError(f"unknown delay function {rest[0]!r}", lineno, cols[3])
            try:
                nodes.append(NodeSpec(nid, role, fn))
            except TopologyValidationError as exc:
                raise TopologyValidationError(f"line {lineno}: {exc}") from None
        elif kw == "link":
            if len(toks) != 3:
                raise TopologySyntaxError("expected 'link <from> <to>'", lineno, cols[0])
            links.append((_parse_int(toks[1], lineno, cols[1], "node id"), _parse_int(toks[2], lineno, cols[2], "node id")))
        elif kw == "regime":
            # regime <name> <src> -> <d1>[,<d2>...]; tolerate spaces around commas
            if len(toks) < 5 or toks[3] != "->":
                raise TopologySyntaxError("expected 'regime <name> <source> -> <dest>[,<dest>...]'", lineno, cols[0])
            src = _parse_int(toks[2], lineno, cols[2], "source id")
            dests = [d for d in "".join(toks[4:]).split(",") if d]
            if not dests:
                raise TopologySyntaxError("regime line lists no destinations", lineno, cols[4])
            pairs = regimes.setdefault(toks[1], [])
            if any(s == src for s, _ in pairs):
                raise TopologyValidationError(f"line {lineno}: second regime line for source {src} in regime {toks[1]!r}")
            for d in dests:
                pair = (src, _parse_int(d, lineno, cols[4], "destination id"))
                if pair in pairs:
                    raise TopologyValidationError(f"line {lineno}: duplicate regime pair {pair[0]} -> {pair[1]}")
                pairs.append(pair)
        else:
            raise TopologySyntaxError(f"unknown keyword {kw!r}", lineno, cols[0])
    topo = NetworkTopology(
        nodes=tuple(nodes),
        links=tuple(links),
        regimes={k: tuple(v) for k, v in regimes.items()},
        name=name,
    )
    return topo.validate()


def serialize_topology(topology: NetworkTopology) -> str:
    lines = []
    for n in topology.nodes:
        toks = ["node", str(n.id), n.role] + (n.delay_fn.to_tokens() if n.delay_fn else [])
        lines.append(" ".join(toks))
    lines += [f"link {a} {b}" for a, b in topology.links]
    for name, pairs in topology.regimes.items():
        by_src: dict[int, list[int]] = {}
        for s, d in pairs:
            by_src.setdefault(s, []).append(d)
        lines += [f"regime {name} {s} -> {','.join(map(str, ds))}" for s, ds in by_src.items()]
    return "\n".join(lines) + "\n"


def load_topology(path: str | Path) -> NetworkTopology:
    path = Path(path)
    return parse_topology(path.read_text(encoding="utf-8"), name=path.stem)


def load_default(name: str) -> NetworkTopology:
    """Load a bundled network by short name (``a``/``b``) or file stem (``network-a``)."""
    key = name.lower().removeprefix("network-")
    if key not in DEFAULT_NETWORKS:
        raise TopologyError(f"no bundled network named {name!r}")
    text = resources.files("coin_route.data").joinpath(DEFAULT_NETWORKS[key]).read_text(encoding="utf-8")
    return parse_topology(text, name=f"network-{key}")


def resolve_network(spec: str) -> NetworkTopology:
    if spec.lower().removeprefix("network-") in DEFAULT_NETWORKS:
        return load_default(spec)
    return load_topology(spec)
