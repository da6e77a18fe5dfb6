"""Scheduling-algorithm contract and the reference routing schemes.

A scheme is driven one synchronous round at a time::

    state = scheme.init(node, net, rng)
    state, outbox = scheme.step(state, rnd, env_input, inbox)

``inbox`` maps every in-neighbor to the payload it sent in the previous
round, or ``None``. ``outbox`` maps out-neighbors to payloads; a missing key
(or a ``None`` value) means nothing is sent on that arc. Payloads are
``bytes``. States must be hashable, canonical snapshots because the
simulation relation is exact state equality.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Protocol

from .errors import ContractError, InvalidArgument, ParseError
from .graph import GridSpec, Network

Payload = bytes


@dataclass(frozen=True)
class Injection:
    round: int
    node: int
    payload: Payload
    dest: int | None = None


@dataclass(frozen=True)
class EnvSchedule:
    horizon: int
    injections: tuple[Injection, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.horizon < 0:
            raise InvalidArgument(f"horizon must be >= 0, got {self.horizon}")
        index: dict[tuple[int, int], list[Injection]] = {}
        for inj in self.injections:
            index.setdefault((inj.round, inj.node), []).append(inj)
        object.__setattr__(self, "_index", {k: tuple(v) for k, v in index.items()})

    def inputs(self, rnd: int, node: int) -> tuple[Injection, ...]:
        return self._index.get((rnd, node), ())

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "injections": [
                {"round": i.round, "node": i.node, "payload": i.payload.decode(), "dest": i.dest}
                for i in self.injections
            ],
        }


def env_from_dict(data: object) -> EnvSchedule:
    if not isinstance(data, dict) or "horizon" not in data:
        raise ParseError("env schedule must be an object with a 'horizon' field")
    horizon = data["horizon"]
    if not isinstance(horizon, int) or horizon < 0:
        raise ParseError(f"field 'horizon': expected a non-negative integer, got {horizon!r}")
    injections = []
    for i, item in enumerate(data.get("injections", [])):
        try:
            rnd, node, payload = item["round"], item["node"], item["payload"]
            dest = item.get("dest")
        except (KeyError, TypeError) as exc:
            raise ParseError(f"field 'injections[{i}]': missing {exc}") from exc
        if not isinstance(payload, str):
            raise ParseError(f"field 'injections[{i}].payload': expected a string")
        if not isinstance(rnd, int) or not isinstance(node, int) or rnd < 0 or node < 0:
            raise ParseError(f"field 'injections[{i}]': round and node must be non-negative integers")
        if dest is not None and not isinstance(dest, int):
            raise ParseError(f"field 'injections[{i}].dest': expected an integer or null")
        injections.append(Injection(rnd, node, payload.encode(), dest))
    return EnvSchedule(horizon, tuple(injections))


def load_env(path: str | Path) -> EnvSchedule:
    try:
        return env_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


class SchedulingAlgorithm(Protocol):
    def init(self, node: int, net: Network, rng: random.Random): ...

    def step(
        self,
        state,
        rnd: int,
        env_input: tuple[Injection, ...],
        inbox: Mapping[int, Payload | None],
    ) -> tuple[object, dict[int, Payload]]: ...


def node_rng(master_seed: int, node: int) -> random.Random:
    """Randomness stream shared by all copies of ``node``."""
    return random.Random(f"scheme:{master_seed}:{node}")


class PipelineScheme:
    """Move a payload one hop down a directed path per round.

    The state is the held payload (``None`` until something arrives).
    """

    def init(self, node, net, rng):
        if net.arcs != tuple((i, i + 1) for i in range(net.n - 1)):
            raise ContractError(f"pipeline scheme needs a directed path, node {node} sees another graph")
        return _PipeState(node, net.n, None)

    def step(self, state, rnd, env_input, inbox):
        if state.held is not None:
            return state, {}
        got = None
        for inj in env_input:
            got = inj.payload
            break
        if got is None and state.node > 0:
            got = inbox.get(state.node - 1)
        if got is None:
            return state, {}
        state = state._replace(held=got)
        if state.node + 1 < state.n:
            return state, {state.node + 1: got}
        return state, {}


class _PipeState(NamedTuple):
    node: int
    n: int
    held: bytes | None


class FloodingScheme:
    """Every node repeats the largest integer it has seen on all out-arcs each round."""

    def init(self, node, net, rng):
        return _FloodState(node, net.out_neighbors[node], None)

    def step(self, state, rnd, env_input, inbox):
        best = state.best
        values = [inj.payload for inj in env_input]
        values += [msg for msg in inbox.values() if msg is not None]
        for raw in values:
            value = _parse_int(raw)
            if value is not None and (best is None or value > best):
                best = value
        if best is None:
            return state, {}
        msg = str(best).encode()
        return state._replace(best=best), {w: msg for w in state.out}


class _FloodState(NamedTuple):
    node: int
    out: tuple[int, ...]
    best: int | None


def _parse_int(raw: bytes) -> int | None:
    try:
        return int(raw.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        return None


class DimensionOrderScheme:
    """Store-and-forward packet routing on grids and tori.

    Packets correct their coordinates one dimension at a time, lowest
    dimension first, taking the shorter way around on a torus (ties go up).
    Each node keeps one FIFO queue; new arrivals join it ordered by sending
    neighbor id, then local injections in schedule order. At most one packet
    leaves on each arc per round, so a blocked packet waits in place.
    Packets whose next hop is not an out-neighbor (possible on directed
    networks, or with forged destinations) are dropped.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec

    def init(self, node, net, rng):
        if net.n != self.spec.n:
            raise ContractError(f"dimension-order scheme built for {self.spec.n} nodes, network has {net.n}")
        return _DimState(node, (), (), net.out_neighbors[node])

    def next_hop(self, node: int, dest: int) -> int:
        q = self.spec.q
        here, there = self.spec.coords(node), self.spec.coords(dest)
        for i, (x, y) in enumerate(zip(here, there)):
            if x == y:
                continue
            if self.spec.wraparound:
                up = (y - x) % q
                step = 1 if up <= q - up else -1
            else:
                step = 1 if y > x else -1
            return node + (((x + step) % q) - x) * q**i
        return node

    def step(self, state, rnd, env_input, inbox):
        node = state.node
        queue = list(state.queue)
        delivered = list(state.delivered)
        arrivals = []
        for u in sorted(inbox):
            msg = inbox[u]
            if msg is not None:
                pkt = self._decode(msg)
                if pkt is not None:
                    arrivals.append(pkt)
        for inj in env_input:
            if inj.dest is None:
                raise ContractError(f"dimension-order injection at node {node} round {rnd} has no destination")
            arrivals.append((inj.dest, inj.payload))
        for dest, payload in arrivals:
            if dest == node:
                delivered.append((payload, rnd))
            else:
                queue.append((dest, payload))
        outbox: dict[int, bytes] = {}
        waiting = []
        for dest, payload in queue:
            hop = self.next_hop(node, dest)
            if hop not in state.out:
                continue
            if hop in outbox:
                waiting.append((dest, payload))
            else:
                outbox[hop] = b"%d|%s" % (dest, payload)
        return state._replace(queue=tuple(waiting), delivered=tuple(delivered)), outbox

    def _decode(self, msg: bytes):
        head, sep, payload = msg.partition(b"|")
        if not sep:
            return None
        dest = _parse_int(head)
        if dest is None or not 0 <= dest < self.spec.n:
            return None
        return dest, payload


class _DimState(NamedTuple):
    node: int
    queue: tuple
    delivered: tuple
    out: tuple[int, ...]


class RandomWalkScheme:
    """Tokens hop to an out-neighbor picked from the node's private random stream.

    Exists to exercise shared per-node randomness: every copy of a node must
    pick the same neighbor for the simulation to hold.
    """

    def init(self, node, net, rng):
        return _WalkState(node, net.out_neighbors[node], rng.getrandbits(64), ())

    def step(self, state, rnd, env_input, inbox):
        tokens = [inj.payload for inj in env_input]
        tokens += [inbox[u] for u in sorted(inbox) if inbox[u] is not None]
        seen = state.seen + tuple((rnd, t) for t in tokens)
        if not tokens or not state.out:
            return state._replace(seen=seen), {}
        pick = random.Random(f"{state.salt}:{rnd}")
        outbox: dict[int, bytes] = {}
        for token in tokens:
            outbox.setdefault(pick.choice(state.out), token)
        return state._replace(seen=seen), outbox


class _WalkState(NamedTuple):
    node: int
    out: tuple[int, ...]
    salt: int
    seen: tuple


def pipeline_scheme() -> PipelineScheme:
    return PipelineScheme()


def flooding_scheme() -> FloodingScheme:
    return FloodingScheme()


def dimension_order_scheme(spec: GridSpec) -> DimensionOrderScheme:
    return DimensionOrderScheme(spec)


def random_walk_scheme() -> RandomWalkScheme:
    return RandomWalkScheme()


SCHEMES = ("pipeline", "flooding", "dimension-order", "random-walk")


def make_scheme(name: str, grid: GridSpec | None = None) -> SchedulingAlgorithm:
    if name == "pipeline":
        return PipelineScheme()
    if name == "flooding":
        return FloodingScheme()
    if name == "random-walk":
        return RandomWalkScheme()
    if name == "dimension-order":
        if grid is None:
            raise InvalidArgument("dimension-order scheme needs a grid description")
        return DimensionOrderScheme(grid)
    raise InvalidArgument(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
