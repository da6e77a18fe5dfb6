"""Reinforced networks: node replication with projection onto the original.

Every original node ``v`` gets ``ell`` copies ``(v, 1) .. (v, ell)``. Strong
modes connect all copies of the endpoints of every arc. Partitioned modes do
that only for arcs crossing regions; an arc inside a region becomes ``ell``
parallel arcs joining copies with equal index.

Internally copies are flattened to ``base * ell + copy - 1``; the same
flattening is used for file export.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

from .errors import InvalidArgument, ParseError
from .graph import Network, network_from_dict
from .partition import Partition, partition_from_dict, validate_partition


class Kind(str, enum.Enum):
    BYZ = "byz"
    OM = "om"


class Mode(str, enum.Enum):
    STRONG_BYZ = "strong-byz"
    STRONG_OM = "strong-om"
    PARTITIONED_BYZ = "partitioned-byz"
    PARTITIONED_OM = "partitioned-om"

    @property
    def kind(self) -> Kind:
        return Kind.BYZ if self in (Mode.STRONG_BYZ, Mode.PARTITIONED_BYZ) else Kind.OM

    @property
    def partitioned(self) -> bool:
        return self in (Mode.PARTITIONED_BYZ, Mode.PARTITIONED_OM)

    @classmethod
    def of(cls, kind: Kind | str, partitioned: bool) -> Mode:
        kind = Kind(kind)
        if partitioned:
            return cls.PARTITIONED_BYZ if kind is Kind.BYZ else cls.PARTITIONED_OM
        return cls.STRONG_BYZ if kind is Kind.BYZ else cls.STRONG_OM


def copies_for(kind: Kind | str, f: int) -> int:
    return 2 * f + 1 if Kind(kind) is Kind.BYZ else f + 1


class CopyId(NamedTuple):
    base: int
    copy: int  # 1..ell


@dataclass(frozen=True)
class ReinforcedNetwork:
    original: Network
    mode: Mode
    f: int
    partition: Partition | None = None
    ell: int = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.f < 0:
            raise InvalidArgument(f"f must be >= 0, got {self.f}")
        if self.mode.partitioned:
            if self.partition is None:
                raise InvalidArgument(f"mode {self.mode.value} needs a partition")
            self.partition.check_cover(self.original.n)
        object.__setattr__(self, "ell", copies_for(self.mode.kind, self.f))

    @property
    def vprime_count(self) -> int:
        return self.ell * self.original.n

    def flat(self, c: CopyId) -> int:
        return c.base * self.ell + c.copy - 1

    def copy_id(self, index: int) -> CopyId:
        return self.copy_ids[index]

    @cached_property
    def copy_ids(self) -> tuple[CopyId, ...]:
        ell = self.ell
        return tuple(CopyId(c // ell, c % ell + 1) for c in range(self.vprime_count))

    def _matched(self, v: int, w: int) -> bool:
        if not self.mode.partitioned:
            return False
        region_of = self.partition.region_of
        return region_of[v] == region_of[w]

    @cached_property
    def in_groups(self) -> tuple[tuple[tuple[int, tuple[int, ...]], ...], ...]:
        """For each flat copy ``c``: ``(w, senders)`` per original in-neighbor ``w``,
        where ``senders`` are the flat copies of ``w`` wired to ``c``."""
        ell = self.ell
        net = self.original
        out = []
        for c in range(self.vprime_count):
            v, i = divmod(c, ell)
            groups = []
            for w in net.in_neighbors[v]:
                if self._matched(w, v):
                    groups.append((w, (w * ell + i,)))
                else:
                    groups.append((w, tuple(range(w * ell, w * ell + ell))))
            out.append(tuple(groups))
        return tuple(out)

    @cached_property
    def out_targets(self) -> tuple[dict[int, tuple[int, ...]], ...]:
        """For each flat copy: original out-neighbor -> flat copies it is wired to."""
        ell = self.ell
        net = self.original
        out = []
        for c in range(self.vprime_count):
            v, i = divmod(c, ell)
            targets = {}
            for w in net.out_neighbors[v]:
                if self._matched(v, w):
                    targets[w] = (w * ell + i,)
                else:
                    targets[w] = tuple(range(w * ell, w * ell + ell))
            out.append(targets)
        return tuple(out)

    @cached_property
    def flat_arcs(self) -> tuple[tuple[int, int], ...]:
        arcs = []
        for c, targets in enumerate(self.out_targets):
            for ts in targets.values():
                arcs.extend((c, t) for t in ts)
        return tuple(sorted(arcs))

    @property
    def eprime(self) -> tuple[tuple[CopyId, CopyId], ...]:
        return tuple((self.copy_id(a), self.copy_id(b)) for a, b in self.flat_arcs)

    @property
    def eprime_count(self) -> int:
        return len(self.flat_arcs)

    def has_arc(self, src: CopyId, dst: CopyId) -> bool:
        return self.flat(dst) in self.out_targets[self.flat(src)].get(dst.base, ())

    def to_dict(self) -> dict:
        return {
            "original": self.original.to_dict(),
            "mode": self.mode.value,
            "f": self.f,
            "ell": self.ell,
            "partition": self.partition.to_dict() if self.partition else None,
            "n_prime": self.vprime_count,
            "arcs": [list(a) for a in self.flat_arcs],
        }


def build_strong(net: Network, f: int, model: Kind | str) -> ReinforcedNetwork:
    return ReinforcedNetwork(net, Mode.of(model, partitioned=False), f)


def build_partitioned(net: Network, f: int, part: Partition, model: Kind | str) -> ReinforcedNetwork:
    return ReinforcedNetwork(net, Mode.of(model, partitioned=True), f, part)


def copies_of(rn: ReinforcedNetwork, v: int) -> list[CopyId]:
    if not 0 <= v < rn.original.n:
        raise InvalidArgument(f"node {v} outside 0..{rn.original.n - 1}")
    return [CopyId(v, i) for i in range(1, rn.ell + 1)]


def project(rn: ReinforcedNetwork, c: CopyId) -> int:
    if not (0 <= c.base < rn.original.n and 1 <= c.copy <= rn.ell):
        raise InvalidArgument(f"{c} is not a copy in this reinforced network")
    return c.base


@dataclass(frozen=True)
class Metrics:
    nu: Fraction
    eta: Fraction | None  # None when the original has no arcs
    eps_hat: Fraction | None = None

    def to_dict(self) -> dict:
        return {
            "nu": float(self.nu),
            "eta": None if self.eta is None else float(self.eta),
            "eps_hat": None if self.eps_hat is None else float(self.eps_hat),
        }


def metrics(rn: ReinforcedNetwork) -> Metrics:
    n, m, ell = rn.original.n, rn.original.m, rn.ell
    nu = Fraction(rn.vprime_count, n) if n else Fraction(ell)
    eta = Fraction(rn.eprime_count, m) if m else None
    eps_hat = None
    if rn.mode.partitioned:
        eps_hat = validate_partition(rn.original, rn.partition).eps_hat
        if eta is not None:
            expected = (1 - eps_hat) * ell + eps_hat * ell * ell
            assert eta == expected, f"edge blow-up {eta} != (1-eps)*ell + eps*ell^2 = {expected}"
    return Metrics(nu, eta, eps_hat)


def reinforced_from_dict(data: object) -> ReinforcedNetwork:
    if not isinstance(data, dict):
        raise ParseError("reinforced-network JSON must be an object")
    missing = [k for k in ("original", "mode", "f") if k not in data]
    if missing:
        raise ParseError(f"reinforced-network JSON is missing field {missing[0]!r}")
    net = network_from_dict(data["original"])
    try:
        mode = Mode(data["mode"])
    except ValueError as exc:
        raise ParseError(f"field 'mode': {exc}") from exc
    f = data["f"]
    if not isinstance(f, int) or f < 0:
        raise ParseError(f"field 'f': expected a non-negative integer, got {f!r}")
    part = None
    if data.get("partition") is not None:
        part = partition_from_dict(data["partition"], net.n)
    elif mode.partitioned:
        raise ParseError(f"field 'partition': mode {mode.value} needs a partition")
    rn = ReinforcedNetwork(net, mode, f, part)
    if "arcs" in data and [list(a) for a in rn.flat_arcs] != data["arcs"]:
        raise ParseError("field 'arcs' does not match the construction for this mode, f and partition")
    return rn


def load_reinforced(path: str | Path) -> ReinforcedNetwork:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return reinforced_from_dict(data)


def save_reinforced(rn: ReinforcedNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(rn.to_dict()) + "\n")

