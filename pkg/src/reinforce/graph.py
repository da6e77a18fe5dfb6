"""Directed networks and generators for paths, grids and tori.

Grid coordinates map to node ids mixed-radix, least-significant dimension
first: ``(x_0, ..., x_{d-1}) -> sum(x_i * q**i)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

from .errors import InvalidArgument, ParseError

MAX_NODES = 10_000_000

Arc = tuple[int, int]


@dataclass(frozen=True)
class Network:
    """Immutable directed graph on dense node ids ``0..n-1``.

    Arcs are stored sorted, so two networks with the same arc set compare
    equal regardless of construction order.
    """

    n: int
    arcs: tuple[Arc, ...]

    def __init__(self, n: int, arcs: Iterable[Iterable[int]]):
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise InvalidArgument(f"node count must be a non-negative integer, got {n!r}")
        seen = set()
        for arc in arcs:
            src, dst = (int(x) for x in arc)
            if not (0 <= src < n and 0 <= dst < n):
                raise InvalidArgument(f"arc ({src}, {dst}) has an endpoint outside 0..{n - 1}")
            if src == dst:
                raise InvalidArgument(f"self-loop at node {src}")
            if (src, dst) in seen:
                raise InvalidArgument(f"duplicate arc ({src}, {dst})")
            seen.add((src, dst))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "arcs", tuple(sorted(seen)))

    @property
    def m(self) -> int:
        return len(self.arcs)

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for src, dst in self.arcs:
            out[src].append(dst)
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def in_neighbors(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for src, dst in self.arcs:
            inc[dst].append(src)
        return tuple(tuple(sorted(x)) for x in inc)

    @cached_property
    def arc_set(self) -> frozenset[Arc]:
        return frozenset(self.arcs)

    def has_arc(self, src: int, dst: int) -> bool:
        return (src, dst) in self.arc_set

    def to_dict(self) -> dict:
        return {"n": self.n, "arcs": [list(a) for a in self.arcs]}


@dataclass(frozen=True)
class GridSpec:
    q: int
    d: int
    wraparound: bool = False

    def __post_init__(self):
        if self.q < 2:
            raise InvalidArgument(f"grid side q must be >= 2, got {self.q}")
        if self.d < 1:
            raise InvalidArgument(f"grid dimension d must be >= 1, got {self.d}")

    @property
    def n(self) -> int:
        return self.q**self.d

    def node_id(self, coords: Iterable[int]) -> int:
        coords = tuple(coords)
        if len(coords) != self.d or any(not 0 <= x < self.q for x in coords):
            raise InvalidArgument(f"coordinates {coords} outside [{self.q}]^{self.d}")
        return sum(x * self.q**i for i, x in enumerate(coords))

    def coords(self, node: int) -> tuple[int, ...]:
        if not 0 <= node < self.n:
            raise InvalidArgument(f"node {node} outside grid of {self.n} nodes")
        out = []
        for _ in range(self.d):
            node, x = divmod(node, self.q)
            out.append(x)
        return tuple(out)


def make_path(n: int) -> Network:
    if n < 2:
        raise InvalidArgument(f"a path needs at least 2 nodes, got {n}")
    return Network(n, ((i, i + 1) for i in range(n - 1)))


def make_grid(spec: GridSpec) -> Network:
    """q-ary d-dimensional grid (or torus), each adjacency as two opposite arcs."""
    if spec.q**spec.d > MAX_NODES:
        raise InvalidArgument(f"grid of {spec.q}^{spec.d} nodes exceeds the limit of {MAX_NODES}")
    q, d = spec.q, spec.d
    arcs = set()
    for v in range(spec.n):
        for i in range(d):
            x = (v // q**i) % q
            if x + 1 < q:
                w = v + q**i
            elif spec.wraparound:
                w = v - (q - 1) * q**i
            else:
                continue
            if w != v:
                arcs.add((v, w))
                arcs.add((w, v))
    return Network(spec.n, arcs)


def network_from_dict(data: object) -> Network:
    if not isinstance(data, dict):
        raise ParseError("graph JSON must be an object with fields 'n' and 'arcs'")
    if "n" not in data or "arcs" not in data:
        raise ParseError("graph JSON is missing field 'n' or 'arcs'")
    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise ParseError(f"field 'n': expected a non-negative integer, got {n!r}")
    if not isinstance(data["arcs"], list):
        raise ParseError("field 'arcs': expected a list of [src, dst] pairs")
    seen = set()
    for i, arc in enumerate(data["arcs"]):
        where = f"field 'arcs[{i}]'"
        if (
            not isinstance(arc, list)
            or len(arc) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in arc)
        ):
            raise ParseError(f"{where}: expected [src, dst] integers, got {arc!r}")
        src, dst = arc
        if not (0 <= src < n and 0 <= dst < n):
            raise ParseError(f"{where}: index out of range 0..{n - 1} in {arc}")
        if src == dst:
            raise ParseError(f"{where}: self-loop {arc}")
        if (src, dst) in seen:
            raise ParseError(f"{where}: duplicate arc {arc}")
        seen.add((src, dst))
    return Network(n, seen)


def load_network(path: str | Path) -> Network:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    try:
        return network_from_dict(data)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(json.dumps(net.to_dict()) + "\n")
