"""Fault sampling, adversaries, and the round-by-round reinforced execution.

Round semantics (shared by the reference run and the reinforced run): round
0 steps every node with an empty inbox; round ``r > 0`` delivers what was
sent in round ``r - 1``. ``states[r]`` is the snapshot after round ``r``, so
a horizon ``T`` produces ``T + 1`` snapshots.

A copy that fails to decode keeps running with "no message" on the
offending arc; the failure is recorded and is what ``check`` reports.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ContractError, InvalidArgument
from .graph import Network
from .reinforcement import CopyId, Kind, Mode, ReinforcedNetwork
from .routing import EnvSchedule, SchedulingAlgorithm, node_rng


class _Bottom:
    """Wire marker: the simulated node deliberately sends nothing on this arc."""

    __slots__ = ()

    def __repr__(self):
        return "BOT"

    def __reduce__(self):
        return "BOT"


BOT = _Bottom()

NO_MAJORITY = "no-majority"
NO_COPY_CORRECT = "no-copy-correct"
CONFLICTING_OM = "conflicting-om-messages"
MISSING_INPUT = "missing-input"


@dataclass(frozen=True)
class FaultModel:
    kind: Kind
    p: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not 0 <= self.p <= 1:
            raise InvalidArgument(f"fault probability must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class FaultSet:
    faulty: frozenset[CopyId] = frozenset()

    def __contains__(self, c) -> bool:
        return c in self.faulty

    def __len__(self) -> int:
        return len(self.faulty)

    def __iter__(self):
        return iter(sorted(self.faulty))


def sample_faults(rn: ReinforcedNetwork, model: FaultModel, rng_seed: int | str | random.Random) -> FaultSet:
    """Each copy is faulty independently with probability ``model.p``."""
    rng = rng_seed if isinstance(rng_seed, random.Random) else random.Random(rng_seed)
    p = model.p
    faulty = [rn.copy_id(c) for c in range(rn.vprime_count) if rng.random() < p]
    return FaultSet(frozenset(faulty))


# --- adversaries -----------------------------------------------------------


class Adversary:
    """Rewrites the wire outbox of a faulty copy.

    ``intended`` maps every out-arc target of the copy to the message it
    would send honestly, ``None`` where it would send nothing. The return
    value has the same shape; absent keys mean nothing is sent.
    """

    kind = Kind.OM
    deterministic = True

    def corrupt(self, copy: CopyId, rnd: int, intended: Mapping[CopyId, object]) -> dict[CopyId, object]:
        raise NotImplementedError


class Silent(Adversary):
    def corrupt(self, copy, rnd, intended):
        return {}


class CoinOmit(Adversary):
    deterministic = False

    def __init__(self, q: float, rng: random.Random):
        if not 0 <= q <= 1:
            raise InvalidArgument(f"coin-omit probability must lie in [0, 1], got {q}")
        self.q = q
        self.rng = rng

    def corrupt(self, copy, rnd, intended):
        return {t: m for t, m in intended.items() if m is not None and self.rng.random() >= self.q}


class RandomBytes(Adversary):
    kind = Kind.BYZ
    deterministic = False

    def __init__(self, rng: random.Random):
        self.rng = rng

    def corrupt(self, copy, rnd, intended):
        rng = self.rng
        return {t: rng.randbytes(rng.randint(1, 8)) for t in intended}


class Equivocate(Adversary):
    """Tells even-indexed receivers the truth and feeds every other receiver
    its own numeric forgery, so no two of them agree."""

    kind = Kind.BYZ

    def corrupt(self, copy, rnd, intended):
        out = {}
        for t, m in intended.items():
            if t.copy % 2 == 0 and m is not None:
                out[t] = m
            else:
                out[t] = b"%d" % (10**6 + 1000 * t.base + t.copy)
        return out


class Replay(Adversary):
    """Sends what it should have sent one round earlier."""

    kind = Kind.BYZ

    def __init__(self):
        self.last: dict[CopyId, dict] = {}

    def corrupt(self, copy, rnd, intended):
        previous = self.last.get(copy, {})
        self.last[copy] = {t: m for t, m in intended.items() if m is not None}
        return previous


@dataclass(frozen=True)
class AdversarySpec:
    """Named adversary strategy; ``create`` builds a fresh per-trial instance."""

    name: str
    q: float | None = None

    @property
    def kind(self) -> Kind:
        return Kind.BYZ if self.name in ("random-bytes", "equivocate", "replay") else Kind.OM

    @property
    def deterministic(self) -> bool:
        return self.name in ("silent", "equivocate", "replay")

    def create(self, rng: random.Random | None = None) -> Adversary:
        rng = rng if rng is not None else random.Random(0)
        if self.name == "silent":
            return Silent()
        if self.name == "coin-omit":
            return CoinOmit(self.q, rng)
        if self.name == "random-bytes":
            return RandomBytes(rng)
        if self.name == "equivocate":
            return Equivocate()
        if self.name == "replay":
            return Replay()
        raise InvalidArgument(f"unknown adversary {self.name!r}")

    def __str__(self):
        return f"coin-omit({self.q:g})" if self.name == "coin-omit" else self.name


ADVERSARIES = ("silent", "random-bytes", "equivocate", "replay", "coin-omit(q)")


def parse_adversary(text: str) -> AdversarySpec:
    """Accepts ``silent``, ``random-bytes``, ``equivocate``, ``replay``,
    ``coin-omit(q)`` or ``coin-omit:q``."""
    text = text.strip()
    if text.startswith("coin-omit"):
        arg = text[len("coin-omit"):].strip()
        if arg.startswith("(") and arg.endswith(")"):
            arg = arg[1:-1]
        elif arg.startswith(":"):
            arg = arg[1:]
        try:
            q = float(arg)
        except ValueError:
            raise InvalidArgument(f"coin-omit needs a probability, got {text!r}") from None
        if not 0 <= q <= 1:
            raise InvalidArgument(f"coin-omit probability must lie in [0, 1], got {q}")
        return AdversarySpec("coin-omit", q)
    if text in ("silent", "omit-all"):
        return AdversarySpec("silent")
    if text in ("random-bytes", "equivocate", "replay"):
        return AdversarySpec(text)
    raise InvalidArgument(f"unknown adversary {text!r}; expected one of {', '.join(ADVERSARIES)}")


# --- traces ----------------------------------------------------------------


@dataclass
class ReferenceTrace:
    states: list[tuple]
    messages: list[dict[tuple[int, int], bytes]]

    @property
    def horizon(self) -> int:
        return len(self.states) - 1


@dataclass(frozen=True)
class DecodeFailure:
    round: int
    copy: int  # flat index
    sender: int  # original in-neighbor
    reason: str


@dataclass(frozen=True)
class DecodeRecord:
    round: int
    copy: int
    sender: int
    received: tuple
    decoded: bytes | None
    failure: str | None


@dataclass
class SimTrace:
    rn: ReinforcedNetwork
    faults: FaultSet
    states: list[tuple]
    know: list[tuple[bool, ...]] | None
    failures: list[DecodeFailure]
    decodes: list[DecodeRecord] | None = None

    @property
    def horizon(self) -> int:
        return len(self.states) - 1


@dataclass(frozen=True)
class Violation:
    round: int
    node: int
    reason: str
    level: str  # "simulation" or "strong"

    def to_dict(self) -> dict:
        return {"round": self.round, "node": self.node, "reason": self.reason, "level": self.level}


@dataclass(frozen=True)
class Verdict:
    ok: bool
    strong_ok: bool
    first_violation: Violation | None = None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "strong_ok": self.strong_ok,
            "first_violation": self.first_violation.to_dict() if self.first_violation else None,
        }


# --- execution -------------------------------------------------------------


def _check_outbox(outbox, allowed, node, rnd):
    for w in outbox:
        if w not in allowed:
            raise ContractError(f"node {node} sent to non-neighbor {w} in round {rnd}")


def run_reference(
    net: Network, scheme: SchedulingAlgorithm, env: EnvSchedule, seed: int, T: int | None = None
) -> ReferenceTrace:
    """Fault-free execution of ``scheme`` on the original network."""
    T = env.horizon if T is None else T
    if T < 0:
        raise InvalidArgument(f"horizon must be >= 0, got {T}")
    states = [scheme.init(v, net, node_rng(seed, v)) for v in range(net.n)]
    trace_states = []
    trace_msgs = []
    sent: dict[tuple[int, int], bytes] = {}
    for rnd in range(T + 1):
        new_sent = {}
        for v in range(net.n):
            inbox = {w: sent.get((w, v)) for w in net.in_neighbors[v]}
            states[v], outbox = scheme.step(states[v], rnd, env.inputs(rnd, v), inbox)
            _check_outbox(outbox, net.out_neighbors[v], v, rnd)
            for w, msg in outbox.items():
                if msg is not None:
                    new_sent[(v, w)] = msg
        sent = new_sent
        trace_states.append(tuple(states))
        trace_msgs.append(new_sent)
    return ReferenceTrace(trace_states, trace_msgs)


def run_simulation(
    rn: ReinforcedNetwork,
    scheme: SchedulingAlgorithm,
    env: EnvSchedule,
    seed: int,
    faults: FaultSet,
    adv: Adversary,
    T: int | None = None,
    record: bool = False,
) -> SimTrace:
    """Run the reinforced algorithm on every copy for rounds ``0..T``.

    Decode failures are always kept; ``record=True`` additionally keeps the
    received messages and decoded value of every in-neighbor group.
    """
    mode = rn.mode
    if adv.kind is Kind.BYZ and mode.kind is Kind.OM:
        raise InvalidArgument(f"adversary of kind byz cannot drive omission mode {mode.value}")
    T = env.horizon if T is None else T
    if T < 0:
        raise InvalidArgument(f"horizon must be >= 0, got {T}")
    net = rn.original
    ell = rn.ell
    N = rn.vprime_count
    in_groups = rn.in_groups
    out_targets = rn.out_targets
    is_byz = mode.kind is Kind.BYZ
    know_protocol = mode is Mode.PARTITIONED_OM

    faulty = [False] * N
    for c in faults.faulty:
        faulty[rn.flat(c)] = True
    states = [scheme.init(c // ell, net, node_rng(seed, c // ell)) for c in range(N)]
    know = [True] * N
    sent: list[dict] = [{} for _ in range(N)]
    trace_states = []
    trace_know = [] if know_protocol else None
    failures: list[DecodeFailure] = []
    decodes: list[DecodeRecord] | None = [] if record else None

    for rnd in range(T + 1):
        new_sent: list[dict] = [{}] * N
        for c in range(N):
            v = c // ell
            if not know[c]:
                continue
            inbox = {}
            for w, senders in in_groups[c]:
                if rnd == 0:
                    inbox[w] = None
                    continue
                msgs = [sent[s].get(c) for s in senders]
                failure = None
                if is_byz:
                    first = msgs[0]
                    if len(msgs) == 1 or all(m == first for m in msgs):
                        value = first
                    else:
                        tally: dict = {}
                        for m in msgs:
                            tally[m] = tally.get(m, 0) + 1
                        value = max(tally, key=tally.__getitem__)
                        if 2 * tally[value] <= len(msgs):
                            value, failure = None, NO_MAJORITY
                else:
                    distinct = {m for m in msgs if m is not None}
                    if len(distinct) == 1:
                        value = distinct.pop()
                    elif distinct:
                        value, failure = None, CONFLICTING_OM
                    elif know_protocol:
                        value, failure = None, MISSING_INPUT
                    else:
                        value = None
                if value is BOT:
                    value = None
                if failure is not None:
                    failures.append(DecodeFailure(rnd, c, w, failure))
                    if know_protocol:
                        know[c] = False
                if decodes is not None:
                    decodes.append(DecodeRecord(rnd, c, w, tuple(msgs), value, failure))
                inbox[w] = value
            if not know[c]:
                continue
            states[c], outbox = scheme.step(states[c], rnd, env.inputs(rnd, v), inbox)
            targets = out_targets[c]
            _check_outbox(outbox, targets, v, rnd)
            wire = {}
            for w, ts in targets.items():
                msg = outbox.get(w)
                if msg is None and know_protocol:
                    msg = BOT
                if msg is not None:
                    for t in ts:
                        wire[t] = msg
            if faulty[c]:
                wire = _corrupt(rn, adv, c, rnd, wire, targets)
            new_sent[c] = wire
        sent = new_sent
        trace_states.append(tuple(states))
        if trace_know is not None:
            trace_know.append(tuple(know))
    return SimTrace(rn, faults, trace_states, trace_know, failures, decodes)


def _corrupt(rn, adv, c, rnd, wire, targets):
    ids = rn.copy_ids
    intended = {ids[t]: wire.get(t) for ts in targets.values() for t in ts}
    actual = adv.corrupt(ids[c], rnd, intended)
    out = {}
    for t, msg in actual.items():
        if t not in intended:
            raise ContractError(f"adversary sent from {ids[c]} to non-neighbor {t} in round {rnd}")
        if msg is not None:
            out[rn.flat(t)] = msg
    return out


def check(sim: SimTrace, ref: ReferenceTrace, rn: ReinforcedNetwork | None = None) -> Verdict:
    """Compare every copy's state with its original's reference state.

    Byzantine modes: ``ok`` needs a strict majority of all copies of each
    node correct, ``strong_ok`` additionally every non-faulty copy.
    Omission modes: ``ok`` needs one correct copy, ``strong_ok`` all copies
    (faulty omission copies still compute correctly).
    """
    rn = rn or sim.rn
    if sim.horizon != ref.horizon:
        raise InvalidArgument(f"horizon mismatch: simulation {sim.horizon}, reference {ref.horizon}")
    ell = rn.ell
    n = rn.original.n
    byz = rn.mode.kind is Kind.BYZ
    faulty = {rn.flat(c) for c in sim.faults.faulty}
    ok = strong_ok = True
    first = None
    for rnd, (copy_states, ref_states) in enumerate(zip(sim.states, ref.states)):
        for v in range(n):
            target = ref_states[v]
            base = v * ell
            correct = [copy_states[base + i] == target for i in range(ell)]
            if byz:
                node_ok = 2 * sum(correct) > ell
                node_strong = node_ok and all(correct[i] for i in range(ell) if base + i not in faulty)
            else:
                node_ok = any(correct)
                node_strong = all(correct)
            if node_strong:
                continue
            strong_ok = False
            if not node_ok and ok:
                ok = False
                first = Violation(rnd, v, _reason(sim, rn, v, rnd, byz), "simulation")
            elif first is None:
                first = Violation(rnd, v, _reason(sim, rn, v, rnd, byz), "strong")
        if not ok:
            break
    return Verdict(ok, strong_ok, first)


def _reason(sim, rn, v, rnd, byz):
    ell = rn.ell
    latest = None
    for fail in sim.failures:
        if fail.round > rnd:
            break
        if fail.copy // ell == v:
            latest = fail.reason
    if latest is not None:
        return latest
    return NO_MAJORITY if byz else NO_COPY_CORRECT


def precondition_holds(rn: ReinforcedNetwork, faults: FaultSet | Iterable[CopyId]) -> bool:
    """The structural fault condition under which the mode's construction is
    guaranteed to simulate the original, whatever the adversary does."""
    faulty = faults.faulty if isinstance(faults, FaultSet) else frozenset(faults)
    ell, f = rn.ell, rn.f
    if not rn.mode.partitioned:
        per_node = Counter(c.base for c in faulty)
        return all(k <= f for k in per_node.values())
    need = 1 if rn.mode.kind is Kind.OM else f + 1
    region_of = rn.partition.region_of
    dirty = {(region_of[c.base], c.copy) for c in faulty}
    for k in range(rn.partition.k):
        clean = sum(1 for i in range(1, ell + 1) if (k, i) not in dirty)
        if clean < need:
            return False
    return True

