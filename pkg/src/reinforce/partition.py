"""Node partitions into regions, their generators, and validation.

Cut statistics count directed arcs: ``eps_hat = cut_arcs / m``. On networks
that carry every edge as two opposite arcs this equals the undirected
fraction.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable

from .errors import InvalidArgument, InvalidPartition, ParseError
from .graph import GridSpec, Network


@dataclass(frozen=True)
class Partition:
    """Disjoint, non-empty regions. Region order is canonical (by smallest id)."""

    regions: tuple[tuple[int, ...], ...]

    def __init__(self, regions: Iterable[Iterable[int]]):
        regs = []
        seen: set[int] = set()
        for region in regions:
            reg = tuple(sorted(int(v) for v in region))
            if not reg:
                raise InvalidPartition("empty region")
            for v in reg:
                if v < 0:
                    raise InvalidPartition(f"negative node id {v}", node=v)
                if v in seen:
                    raise InvalidPartition(f"node {v} appears in more than one region", node=v)
                seen.add(v)
            regs.append(reg)
        regs.sort()
        object.__setattr__(self, "regions", tuple(regs))

    @property
    def k(self) -> int:
        return len(self.regions)

    @cached_property
    def region_of(self) -> dict[int, int]:
        return {v: i for i, reg in enumerate(self.regions) for v in reg}

    def covers(self, n: int) -> bool:
        return len(self.region_of) == n and all(v < n for v in self.region_of)

    def check_cover(self, n: int) -> None:
        for v in self.region_of:
            if v >= n:
                raise InvalidPartition(f"node {v} is not in the network (n={n})", node=v)
        for v in range(n):
            if v not in self.region_of:
                raise InvalidPartition(f"node {v} is not covered by any region", node=v)

    def to_dict(self) -> dict:
        return {"regions": [list(r) for r in self.regions]}


@dataclass(frozen=True)
class PartitionStats:
    R: int
    r: int
    k: int
    cut_arcs: int
    m: int
    connected: tuple[bool, ...]

    @property
    def eps_hat(self) -> Fraction:
        return Fraction(self.cut_arcs, self.m) if self.m else Fraction(0)

    @property
    def all_connected(self) -> bool:
        return all(self.connected)

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "r": self.r,
            "k": self.k,
            "cut_arcs": self.cut_arcs,
            "m": self.m,
            "eps_hat": float(self.eps_hat),
            "all_connected": self.all_connected,
        }


def hypercube_partition(spec: GridSpec, h: int) -> Partition:
    """Split ``[q]^d`` into ``(q/h)^d`` axis-aligned subcubes of side ``h``."""
    if h < 1 or spec.q % h:
        raise InvalidArgument(f"block side h={h} must be a positive divisor of q={spec.q}")
    blocks: dict[tuple[int, ...], list[int]] = {}
    for v in range(spec.n):
        key = tuple(x // h for x in spec.coords(v))
        blocks.setdefault(key, []).append(v)
    return Partition(blocks.values())


def path_partition(n: int, h: int) -> Partition:
    """Consecutive segments of ``h`` nodes; the last may be shorter."""
    if n < 1 or h < 1:
        raise InvalidArgument(f"need n >= 1 and h >= 1, got n={n}, h={h}")
    return Partition(range(s, min(s + h, n)) for s in range(0, n, h))


def single_region(n: int) -> Partition:
    return Partition([range(n)])


def singletons(n: int) -> Partition:
    return Partition([v] for v in range(n))


def validate_partition(net: Network, part: Partition) -> PartitionStats:
    """Check that ``part`` covers ``net`` exactly; return cut and size statistics.

    Per-region connectivity (of the induced subgraph, arcs taken as
    undirected) is reported but not enforced.
    """
    part.check_cover(net.n)
    region_of = part.region_of
    cut = sum(1 for v, w in net.arcs if region_of[v] != region_of[w])
    sizes = [len(r) for r in part.regions]
    return PartitionStats(
        R=max(sizes),
        r=min(sizes),
        k=part.k,
        cut_arcs=cut,
        m=net.m,
        connected=tuple(_induced_connected(net, reg) for reg in part.regions),
    )


def _induced_connected(net: Network, region: tuple[int, ...]) -> bool:
    members = set(region)
    start = region[0]
    seen = {start}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for w in itertools.chain(net.out_neighbors[v], net.in_neighbors[v]):
            if w in members and w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(members)


def partition_from_dict(data: object, n: int | None = None) -> Partition:
    if not isinstance(data, dict) or not isinstance(data.get("regions"), list):
        raise ParseError("partition JSON must be an object with a 'regions' list")
    for i, reg in enumerate(data["regions"]):
        if not isinstance(reg, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in reg
        ):
            raise ParseError(f"field 'regions[{i}]': expected a list of node ids")
    part = Partition(data["regions"])
    if n is not None:
        part.check_cover(n)
    return part


def load_partition(path: str | Path, n: int | None = None) -> Partition:
    """Read a partition file; with ``n`` given, also require an exact cover of ``0..n-1``."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return partition_from_dict(data, n)


def save_partition(part: Partition, path: str | Path) -> None:
    Path(path).write_text(json.dumps(part.to_dict()) + "\n")
