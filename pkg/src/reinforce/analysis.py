"""Experiment driver: Monte Carlo sweeps, exact oracles, exponent fits, toy experiment.

Randomness is derived from string keys (``random.Random`` hashes them with
SHA-512), so trial ``i`` at grid point ``j`` always sees the same streams no
matter which worker runs it.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import InvalidArgument, ParseError
from .faults import (
    AdversarySpec,
    FaultModel,
    FaultSet,
    ReferenceTrace,
    Verdict,
    check,
    parse_adversary,
    precondition_holds,
    run_reference,
    run_simulation,
    sample_faults,
)
from .graph import GridSpec, Network, load_network, make_grid, make_path, network_from_dict
from .partition import (
    Partition,
    hypercube_partition,
    load_partition,
    partition_from_dict,
    path_partition,
    single_region,
    singletons,
)
from .reinforcement import Kind, Mode, ReinforcedNetwork
from .routing import EnvSchedule, Injection, env_from_dict, load_env, make_scheme

Z95 = statistics.NormalDist().inv_cdf(0.975)
ENUMERATION_LIMIT = 22


def derive_rng(*keys) -> random.Random:
    return random.Random(":".join(str(k) for k in keys))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def geometric_grid(lo: float, hi: float) -> list[float]:
    """Decade steps refined by sqrt(10): 1, 3.16, 10, 31.6, ... times 10^k, within [lo, hi]."""
    if not 0 < lo <= hi <= 1:
        raise InvalidArgument(f"geometric grid needs 0 < lo <= hi <= 1, got {lo}, {hi}")
    k = math.floor(math.log10(lo) * 2 + 1e-9)
    out = []
    while True:
        p = 10 ** (k / 2)
        if p > hi * (1 + 1e-9):
            break
        if p >= lo * (1 - 1e-9):
            out.append(float(f"{p:.6g}"))
        k += 1
    return out


# --- configuration ---------------------------------------------------------


@dataclass
class ExperimentConfig:
    network: dict
    scheme: str
    mode: Mode
    f: int
    adversary: str = "silent"
    partition: dict | None = None
    env: dict | None = None
    p_grid: list[float] = field(default_factory=lambda: [0.0])
    trials: int = 100
    horizon: int | None = None
    seed: int = 0
    grid: dict | None = None
    outputs: dict = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        self.mode = Mode(self.mode)
        parse_adversary(self.adversary)
        if self.f < 0:
            raise InvalidArgument(f"f must be >= 0, got {self.f}")
        if self.trials < 0:
            raise InvalidArgument(f"trials must be >= 0, got {self.trials}")
        for p in self.p_grid:
            if not 0 <= p <= 1:
                raise InvalidArgument(f"p-grid value {p} outside [0, 1]")
        for spec in (self.network, self.partition, self.env):
            if isinstance(spec, dict) and "file" in spec and not self.path(spec["file"]).exists():
                raise InvalidArgument(f"referenced file {spec['file']} does not exist")

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def grid_spec(self) -> GridSpec | None:
        if self.grid is not None:
            return GridSpec(self.grid["q"], self.grid["d"], bool(self.grid.get("wraparound", False)))
        gen = self.network.get("generator")
        if gen == "grid":
            return GridSpec(self.network["q"], self.network["d"], bool(self.network.get("wraparound", False)))
        if gen == "path":
            return GridSpec(self.network["n"], 1, False)
        return None

    def build_network(self) -> Network:
        spec = self.network
        if "file" in spec:
            return load_network(self.path(spec["file"]))
        gen = spec.get("generator")
        if gen == "path":
            return make_path(spec["n"])
        if gen == "grid":
            return make_grid(self.grid_spec())
        if "arcs" in spec:
            return network_from_dict(spec)
        raise InvalidArgument(f"network spec needs 'file', 'generator' or inline arcs, got {spec}")

    def build_partition(self, net: Network) -> Partition | None:
        spec = self.partition
        if spec is None:
            if self.mode.partitioned:
                raise InvalidArgument(f"mode {self.mode.value} needs a 'partition' entry")
            return None
        if "file" in spec:
            return load_partition(self.path(spec["file"]), net.n)
        if "regions" in spec:
            return partition_from_dict(spec, net.n)
        kind = spec.get("kind")
        if kind == "path":
            return path_partition(net.n, spec["h"])
        if kind == "hypercube":
            grid = self.grid_spec()
            if grid is None:
                raise InvalidArgument("hypercube partition needs a grid network")
            return hypercube_partition(grid, spec["h"])
        if kind == "single":
            return single_region(net.n)
        if kind == "singletons":
            return singletons(net.n)
        raise InvalidArgument(f"unknown partition spec {spec}")

    def build_reinforced(self) -> ReinforcedNetwork:
        net = self.build_network()
        part = self.build_partition(net) if self.mode.partitioned else None
        return ReinforcedNetwork(net, self.mode, self.f, part)

    def build_env(self, net: Network) -> EnvSchedule:
        if self.env is None:
            env = default_env(self.scheme, net)
        elif "file" in self.env:
            env = load_env(self.path(self.env["file"]))
        else:
            env = env_from_dict(self.env)
        if self.horizon is not None:
            env = EnvSchedule(self.horizon, env.injections)
        return env

    def adversary_spec(self) -> AdversarySpec:
        return parse_adversary(self.adversary)

    def to_dict(self) -> dict:
        return {
            "network": self.network,
            "scheme": self.scheme,
            "mode": self.mode.value,
            "f": self.f,
            "adversary": self.adversary,
            "partition": self.partition,
            "env": self.env,
            "p_grid": self.p_grid,
            "trials": self.trials,
            "horizon": self.horizon,
            "seed": self.seed,
            "grid": self.grid,
            "outputs": self.outputs,
        }


CONFIG_FIELDS = {
    "network", "scheme", "mode", "f", "adversary", "partition", "env",
    "p_grid", "trials", "horizon", "seed", "grid", "outputs",
}


def config_from_dict(data: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    unknown = set(data) - CONFIG_FIELDS
    if unknown:
        raise ParseError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    for key in ("network", "scheme", "mode", "f"):
        if key not in data:
            raise ParseError(f"config is missing field {key!r}")
    kwargs = dict(data)
    grid = kwargs.get("p_grid", [0.0])
    if isinstance(grid, dict):
        kwargs["p_grid"] = geometric_grid(grid["lo"], grid["hi"])
    try:
        kwargs["mode"] = Mode(kwargs["mode"])
    except ValueError as exc:
        raise ParseError(f"field 'mode': {exc}") from exc
    return ExperimentConfig(**kwargs, base_dir=str(base_dir))


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc.strerror}") from exc
    return config_from_dict(data, path.parent)


def default_env(scheme: str, net: Network) -> EnvSchedule:
    """One message from node 0 towards node n-1, with a horizon long enough to arrive."""
    last = net.n - 1
    if scheme == "flooding":
        return EnvSchedule(net.n, (Injection(0, 0, b"1"),))
    if scheme == "dimension-order":
        return EnvSchedule(net.n + 1, (Injection(0, 0, b"X", last),))
    return EnvSchedule(max(last, 1), (Injection(0, 0, b"X"),))


# --- trials ----------------------------------------------------------------


@dataclass
class SweepRow:
    p: float
    trials: int
    precond: int
    ok: int
    strong_ok: int
    ci_lo: float
    ci_hi: float

    @property
    def precond_failure_rate(self) -> float:
        return 1 - self.precond / self.trials if self.trials else 0.0

    def to_dict(self) -> dict:
        return {
            "p": self.p, "trials": self.trials, "precond": self.precond, "ok": self.ok,
            "strong_ok": self.strong_ok, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi,
        }


CSV_HEADER = "p,trials,precond,ok,strong_ok,ci_lo,ci_hi"


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.p!r},{r.trials},{r.precond},{r.ok},{r.strong_ok},{r.ci_lo:.6f},{r.ci_hi:.6f}")
    return "\n".join(lines) + "\n"


class TrialRunner:
    """Everything a trial needs, built once per process and shared by its trials.

    With a deterministic adversary the outcome depends on the fault set
    alone, so outcomes are memoized by fault set.
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.rn = cfg.build_reinforced()
        self.scheme = make_scheme(cfg.scheme, cfg.grid_spec())
        self.env = cfg.build_env(self.rn.original)
        self.adv = cfg.adversary_spec()
        if self.adv.kind is Kind.BYZ and self.rn.mode.kind is Kind.OM:
            raise InvalidArgument(f"adversary {self.adv} cannot be used with omission mode {self.rn.mode.value}")
        self.ref: ReferenceTrace = run_reference(self.rn.original, self.scheme, self.env, cfg.seed)
        self._cache: dict[frozenset, Verdict] = {}

    def outcome(self, faults: FaultSet, adv_rng: random.Random) -> Verdict:
        key = faults.faulty
        if self.adv.deterministic and key in self._cache:
            return self._cache[key]
        sim = run_simulation(self.rn, self.scheme, self.env, self.cfg.seed, faults, self.adv.create(adv_rng))
        verdict = check(sim, self.ref, self.rn)
        if self.adv.deterministic:
            self._cache[key] = verdict
        return verdict

    def trial(self, p_index: int, p: float, i: int) -> dict:
        seed = self.cfg.seed
        faults = sample_faults(self.rn, FaultModel(self.rn.mode.kind, p), derive_rng(seed, "faults", p_index, i))
        verdict = self.outcome(faults, derive_rng(seed, "adv", p_index, i))
        v = verdict.first_violation
        return {
            "trial": i,
            "p": p,
            "mode": self.rn.mode.value,
            "f": self.rn.f,
            "precond": precondition_holds(self.rn, faults),
            "ok": verdict.ok,
            "strong_ok": verdict.strong_ok,
            "first_violation": v.to_dict() if v else None,
        }


_RUNNERS: dict[str, TrialRunner] = {}


def _runner(cfg: ExperimentConfig) -> TrialRunner:
    key = json.dumps(cfg.to_dict(), sort_keys=True) + cfg.base_dir
    if key not in _RUNNERS:
        _RUNNERS.clear()
        _RUNNERS[key] = TrialRunner(cfg)
    return _RUNNERS[key]


def _run_chunk(cfg: ExperimentConfig, p_index: int, p: float, start: int, stop: int) -> list[dict]:
    runner = _runner(cfg)
    return [runner.trial(p_index, p, i) for i in range(start, stop)]


def monte_carlo(cfg: ExperimentConfig, threads: int = 1, records: list | None = None) -> list[SweepRow]:
    """Run ``cfg.trials`` independent trials at every p of the grid.

    Results do not depend on ``threads``: every trial draws from its own
    derived streams and rows are aggregated by count. Per-trial records are
    appended to ``records`` (ordered by grid point, then trial) when given.
    """
    jobs = []
    chunk = max(1, math.ceil(cfg.trials / (4 * threads))) if threads > 1 else max(1, cfg.trials)
    for j, p in enumerate(cfg.p_grid):
        for start in range(0, cfg.trials, chunk):
            jobs.append((j, p, start, min(cfg.trials, start + chunk)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_chunk, cfg, *job) for job in jobs]
            parts = [fut.result() for fut in futures]
    else:
        _runner(cfg)  # surface configuration errors even with zero trials
        parts = [_run_chunk(cfg, *job) for job in jobs]
    by_p: dict[int, list[dict]] = {j: [] for j in range(len(cfg.p_grid))}
    for job, part in zip(jobs, parts):
        by_p[job[0]].extend(part)
    rows = []
    for j, p in enumerate(cfg.p_grid):
        recs = sorted(by_p[j], key=lambda r: r["trial"])
        if records is not None:
            records.extend(recs)
        ok = sum(r["ok"] for r in recs)
        lo, hi = wilson_interval(ok, len(recs))
        rows.append(SweepRow(
            p=p,
            trials=len(recs),
            precond=sum(r["precond"] for r in recs),
            ok=ok,
            strong_ok=sum(r["strong_ok"] for r in recs),
            ci_lo=lo,
            ci_hi=hi,
        ))
    return rows


# --- exact oracles ---------------------------------------------------------


def _binomial_at_least(trials: int, prob, need: int):
    return sum(math.comb(trials, j) * prob**j * (1 - prob) ** (trials - j) for j in range(need, trials + 1))


def exact_precondition_probability(rn: ReinforcedNetwork, p):
    """Probability that a fault set drawn with rate ``p`` satisfies the mode's
    precondition. Exact for ``Fraction`` input; float otherwise."""
    if not 0 <= p <= 1:
        raise InvalidArgument(f"p must lie in [0, 1], got {p}")
    ell, f = rn.ell, rn.f
    if not rn.mode.partitioned:
        per_node = _binomial_at_least(ell, 1 - p, ell - f)  # at most f faulty copies
        return per_node**rn.original.n
    need = 1 if rn.mode.kind is Kind.OM else f + 1
    total = 1
    for region in rn.partition.regions:
        clean = (1 - p) ** len(region)
        total *= _binomial_at_least(ell, clean, need)
    return total


def ok_counts_by_size(
    rn: ReinforcedNetwork, scheme, env: EnvSchedule, adversary: AdversarySpec, T: int | None = None, seed: int = 0
) -> list[int]:
    """``counts[k]`` = number of fault sets of size ``k`` for which the simulation holds."""
    N = rn.vprime_count
    if N > ENUMERATION_LIMIT:
        raise InvalidArgument(f"enumeration needs |V'| <= {ENUMERATION_LIMIT}, got {N}")
    if not adversary.deterministic:
        raise InvalidArgument(f"enumeration needs a deterministic adversary, got {adversary}")
    ref = run_reference(rn.original, scheme, env, seed, T)
    copies = [rn.copy_id(c) for c in range(N)]
    counts = [0] * (N + 1)
    for mask in range(1 << N):
        faults = FaultSet(frozenset(copies[c] for c in range(N) if mask >> c & 1))
        sim = run_simulation(rn, scheme, env, seed, faults, adversary.create(), T)
        if check(sim, ref, rn).ok:
            counts[len(faults)] += 1
    return counts


def probability_from_counts(counts: Sequence[int], p):
    N = len(counts) - 1
    return sum(c * p**k * (1 - p) ** (N - k) for k, c in enumerate(counts))


def enumerate_exact(rn, scheme, env, adversary: AdversarySpec, T, p, seed: int = 0):
    """Exact probability of ``ok`` by summing over every fault set of ``V'``."""
    return probability_from_counts(ok_counts_by_size(rn, scheme, env, adversary, T, seed), p)


# --- exponent fitting -------------------------------------------------------


def fit_exponent(ps: Sequence[float], failures: Sequence[float]) -> float:
    """Least-squares slope of log(failure) against log(p)."""
    if len(ps) != len(failures) or len(ps) < 3:
        raise InvalidArgument("exponent fit needs at least 3 (p, failure) points")
    if any(x <= 0 for x in ps) or any(y <= 0 for y in failures):
        raise InvalidArgument("exponent fit needs strictly positive p and failure probabilities")
    if len(set(failures)) == 1:
        raise InvalidArgument("failure probabilities are constant; no exponent to fit")
    fit = statistics.linear_regression([math.log(x) for x in ps], [math.log(float(y)) for y in failures])
    return fit.slope


def slope_fit(rows: Sequence[SweepRow], min_failures: int = 10) -> float:
    """Fit the exponent of the empirical precondition-failure rate in p.

    Only rows with at least ``min_failures`` observed failures count.
    """
    usable = [r for r in rows if r.p > 0 and r.trials - r.precond >= min_failures]
    if len(usable) < 3:
        raise InvalidArgument(
            f"slope fit needs >= 3 rows with >= {min_failures} precondition failures, got {len(usable)}"
        )
    return fit_exponent([r.p for r in usable], [r.precond_failure_rate for r in usable])


def exact_failure_exponent(rn: ReinforcedNetwork, ps: Sequence) -> float:
    """Fitted exponent of the exact precondition-failure probability in p."""
    return fit_exponent(ps, [1 - exact_precondition_probability(rn, p) for p in ps])


# --- toy path experiment ----------------------------------------------------


@dataclass
class ToyReport:
    n: int
    h: int | None
    p: float
    trials: int
    delivered: int
    union_bound: float
    product_bound: float

    @property
    def rate(self) -> float:
        return self.delivered / self.trials if self.trials else 1.0

    @property
    def sigma(self) -> float:
        return math.sqrt(self.rate * (1 - self.rate) / self.trials) if self.trials else 0.0

    @property
    def passes(self) -> bool:
        return self.rate >= self.union_bound - 3 * self.sigma and self.rate >= self.product_bound - 3 * self.sigma

    def to_dict(self) -> dict:
        return {
            "n": self.n, "h": self.h, "p": self.p, "trials": self.trials,
            "delivered": self.delivered, "rate": self.rate, "sigma": self.sigma,
            "union_bound": self.union_bound, "product_bound": self.product_bound,
            "passes": self.passes,
        }


def toy_delivery(n: int, h: int | None, p: float, trials: int, seed: int) -> int:
    """Count trials in which a payload piped down path(n) reaches node n-1.

    ``h`` segments the path for the partitioned omission construction with
    f=1; ``h=None`` gives the two disjoint copies of the path instead.
    """
    net = make_path(n)
    part = path_partition(n, h) if h is not None else single_region(n)
    rn = ReinforcedNetwork(net, Mode.PARTITIONED_OM, 1, part)
    scheme = make_scheme("pipeline")
    env = EnvSchedule(n - 1, (Injection(0, 0, b"X"),))
    adv = parse_adversary("silent")
    last = range((n - 1) * rn.ell, n * rn.ell)
    cache: dict[frozenset, bool] = {}
    delivered = 0
    for i in range(trials):
        faults = sample_faults(rn, FaultModel(Kind.OM, p), derive_rng(seed, "toy", h, p, i))
        if faults.faulty not in cache:
            sim = run_simulation(rn, scheme, env, seed, faults, adv.create())
            cache[faults.faulty] = any(sim.states[-1][c].held == b"X" for c in last)
        delivered += cache[faults.faulty]
    return delivered


def toy_bound_experiment(n: int, h: int, p: float, trials: int, seed: int = 0) -> ToyReport:
    if h < 1:
        raise InvalidArgument(f"segment length must be >= 1, got {h}")
    delivered = toy_delivery(n, h, p, trials, seed)
    return ToyReport(
        n=n,
        h=h,
        p=p,
        trials=trials,
        delivered=delivered,
        union_bound=1 - n * h * p * p,
        product_bound=(1 - (p * h) ** 2) ** math.ceil(n / h),
    )

