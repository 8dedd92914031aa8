"""Experiment drivers: capweight sweep, RVTR sweep, optimality-gap study.

Every (instance, protocol, depth, repetition) gets its own RNG stream keyed
by the master seed and the instance contents, so results do not depend on
the order or the thread in which tasks run.
"""

from __future__ import annotations

import math
import statistics
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .. import ksolve, nested
from ..amptrack import BiasConfig, MarkedEnsemble
from ..gas import (
    DEFAULT_LAMBDA,
    CostLedger,
    SubspaceCache,
    baseline_gas,
    emulate_measurement,
    sample_rotation_count,
)
from ..instances import (
    CorrType,
    KnapsackInstance,
    Ordering,
    compute_metrics,
    dedup_instances,
    fold_key,
    generate_instance,
    reorder_items,
)
from ..ksolve import Solution
from ..nested import DEFAULT_L, DepthPolicy, nested_gas, nested_step_cost
from .metrics import approximation_ratio, gap_from_values
from .records import RunRecord, quantize

DEFAULT_BIAS = 1.0
DEFAULT_SEEDS = 8
MAX_SEARCH_STEPS = 1 << 16

BASELINE, NESTED = "baseline", "nested"
_PROTOCOL_TAG = {BASELINE: 0, NESTED: 1}


class FilterEmptyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    bias: Optional[float] = DEFAULT_BIAS  # None means b = n
    lam: float = DEFAULT_LAMBDA
    L: int = DEFAULT_L
    policy: DepthPolicy = field(default_factory=DepthPolicy)
    start: str = "greedy"

    def bias_for(self, n: int) -> float:
        return float(n) if self.bias is None else float(self.bias)


@dataclass(frozen=True)
class SweepSpec:
    """Instance filter plus sweep settings.

    Capweight bands are open intervals; ``None`` leaves a side unbounded.
    """

    n_values: tuple[int, ...]
    tightness_values: tuple[int, ...]
    range_r: int = 1000
    corr_type: CorrType = CorrType.UNCORRELATED
    capweight_min: Optional[float] = None
    capweight_max: Optional[float] = None
    depths: Optional[tuple[int, ...]] = None
    seeds: int = DEFAULT_SEEDS
    ordering: Ordering = Ordering.DENSITY_DESCENDING
    max_instances: Optional[int] = None
    pool: Optional[tuple[KnapsackInstance, ...]] = None  # replaces generation when given

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("need at least one seed per point")
        if self.pool is None and (not self.n_values or not self.tightness_values):
            raise ValueError("empty n or tightness list")

    def accepts(self, inst: KnapsackInstance) -> bool:
        cw = compute_metrics(inst).capweight
        if self.capweight_min is not None and not cw > Fraction(str(self.capweight_min)):
            return False
        if self.capweight_max is not None and not cw < Fraction(str(self.capweight_max)):
            return False
        return True

    def instances(self) -> list[KnapsackInstance]:
        if self.pool is not None:
            raw = list(self.pool)
        else:
            raw = [
                generate_instance(n, self.range_r, self.corr_type, s, i)
                for n in self.n_values
                for s in self.tightness_values
                for i in range(1, s + 1)
            ]
        out = [reorder_items(inst, self.ordering) for inst in dedup_instances(raw) if self.accepts(inst)]
        return out[: self.max_instances] if self.max_instances is not None else out

    def cohort(self) -> list[KnapsackInstance]:
        """:meth:`instances`, warning when the filter leaves nothing."""
        insts = self.instances()
        if not insts:
            warnings.warn("instance filter selected no instances; output will be empty", FilterEmptyWarning,
                          stacklevel=3)
        return insts

    def depth_set(self, n: int, full: bool = False) -> list[int]:
        if self.depths is not None:
            return [k for k in self.depths if 1 <= k <= n]
        return list(range(1, n + 1 if full else n))


def task_rng(seed: int, inst: KnapsackInstance, *tags: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = fold_key(*inst.weights, *inst.profits, inst.capacity)
    return np.random.default_rng(np.random.SeedSequence([seed, key & 0xFFFFFFFF, key >> 32, *tags]))


class InstanceContext:
    """Exact reference values and cached subspaces for one instance."""

    def __init__(self, inst: KnapsackInstance, params: ProtocolParams):
        self.inst = inst
        self.params = params
        self.greedy = ksolve.greedy_solution(inst)
        self.optimum = ksolve.optimal_solution(inst)
        self.bias = BiasConfig(params.bias_for(inst.n), self.greedy.bits)
        self.cache = SubspaceCache(inst, self.bias)
        self.capweight = compute_metrics(inst).capweight

    @property
    def greedy_optimal(self) -> bool:
        return self.greedy.value == self.optimum.value

    def record(
        self,
        protocol: str,
        seed: int,
        y_final: int,
        ledger: CostLedger,
        k: Optional[int] = None,
        r_in: Optional[int] = None,
        c_rel: Optional[float] = None,
        trajectory=(),
    ) -> RunRecord:
        inst, p = self.inst, self.params
        y_star, y_greedy = self.optimum.value, self.greedy.value
        gap = gap_from_values(y_final, y_greedy, y_star)
        is_nested = protocol == NESTED
        return RunRecord(
            instance_id=inst.instance_id,
            n=inst.n,
            corr_type=inst.corr_type.value,
            range_r=inst.range_r,
            tightness_s=inst.tightness_s,
            capweight=float(self.capweight),
            protocol=protocol,
            seed=seed,
            bias_b=self.bias.bias_b,
            lam=p.lam,
            L=p.L if is_nested else None,
            depth_policy=(f"fixed:{k}" if c_rel is not None else str(p.policy)) if is_nested else None,
            k=k if is_nested else None,
            r_in=r_in if is_nested else None,
            C_total=ledger.total,
            C_inner=ledger.inner,
            C_outer=ledger.outer,
            y_greedy=y_greedy,
            y_final=y_final,
            y_star=y_star,
            alpha=approximation_ratio(y_final, y_star),
            gamma=gap.value,
            c_rel=c_rel,
            trajectory=list(trajectory),
        )


class FirstImprovement(NamedTuple):
    solution: Solution
    ledger: CostLedger
    k: int
    r_in: int


def _search_until_success(
    ens: MarkedEnsemble, rng: np.random.Generator, lam: float, step_cost: Callable[[int], float], ledger: CostLedger,
    r_in: int = 0, k: int = 0,
) -> Solution:
    m = 1.0
    for _ in range(MAX_SEARCH_STEPS):
        r = sample_rotation_count(m, rng)
        ledger.add_outer(step_cost(r), r, r_in, k)
        found = emulate_measurement(ens, r, rng)
        if found is not None:
            return found
        m *= lam
    raise RuntimeError(f"no improvement after {MAX_SEARCH_STEPS} search steps (theta={ens.theta:.3g})")


def baseline_first_improvement(ctx: InstanceContext, y: int, rng: np.random.Generator) -> FirstImprovement:
    """QSearch from incumbent value ``y`` until the first strictly better state."""
    ens = ctx.cache.baseline(y)
    if len(ens) == 0:
        raise ValueError(f"incumbent {y} is already optimal")
    n = ctx.inst.n
    ledger = CostLedger()
    sol = _search_until_success(ens, rng, ctx.params.lam, lambda r: n * (2 * r + 1), ledger)
    return FirstImprovement(sol, ledger, 0, 0)


def nested_first_improvement(
    ctx: InstanceContext, y: int, k: int, rng: np.random.Generator, search_rng: Optional[np.random.Generator] = None
) -> FirstImprovement:
    """IIF at depth ``k`` followed by nested QSearch until the first improvement.

    ``search_rng`` drives the outer search separately from the IIF, so it can
    share a stream with a baseline run (common random numbers).
    """
    if len(ctx.cache.global_marked(y)) == 0:
        raise ValueError(f"incumbent {y} is already optimal")
    p, n = ctx.params, ctx.inst.n
    ledger = CostLedger()
    found = nested.iif(ctx.inst, ctx.bias, k, y, p.lam, p.L, rng, ledger, ctx.cache)
    r_in = found.r_in
    ens = ctx.cache.nested(y, k, r_in)
    sol = _search_until_success(
        ens, search_rng or rng, p.lam, lambda r: nested_step_cost(n, k, r_in, r), ledger, r_in, k
    )
    return FirstImprovement(sol, ledger, k, r_in)


def run_pool(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map ``fn`` over ``items``; results come back in input order regardless of ``threads``."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- aggregation


@dataclass(frozen=True)
class BinStat:
    lo: float
    hi: float
    count: int
    mean: float
    median: float
    std: float


def _stat(lo, hi, values: list[float]) -> BinStat:
    if not values:
        return BinStat(lo, hi, 0, math.nan, math.nan, math.nan)
    return BinStat(
        lo,
        hi,
        len(values),
        quantize(statistics.fmean(values)),
        quantize(statistics.median(values)),
        quantize(statistics.pstdev(values)),
    )


def capweight_bin(cw: float) -> Optional[int]:
    """Bins ``(j/10, (j+1)/10]`` over ``(0, 1.2]``; ``None`` outside."""
    x = Fraction(repr(cw))
    if x <= 0 or x > Fraction(6, 5):
        return None
    return math.ceil(x * 10) - 1


def rvtr_bin(value: float) -> int:
    """Bins ``[j/10, (j+1)/10)`` over ``[0, 2)``; index 20 collects everything from 2 up."""
    x = Fraction(repr(value))
    if x < 0:
        raise ValueError("negative RVTR")
    return min(math.floor(x * 10), 20)


def binned(points: Iterable[tuple[float, float]], binner: Callable[[float], Optional[int]], nbins: int,
           left_closed: bool) -> list[BinStat]:
    groups: dict[int, list[float]] = {j: [] for j in range(nbins)}
    for x, v in points:
        j = binner(x)
        if j is not None:
            groups[j].append(v)
    out = []
    for j in range(nbins):
        lo = j / 10
        hi = math.inf if left_closed and j == nbins - 1 else (j + 1) / 10
        out.append(_stat(lo, hi, groups[j]))
    return out


def band_values(points: Iterable[tuple[float, float]], lo: float, hi: float) -> list[float]:
    """Values whose key lies in the open interval ``(lo, hi)``."""
    return [v for x, v in points if lo < x < hi]


# ------------------------------------------------------------ capweight sweep


@dataclass
class SweepResult:
    records: list[RunRecord]
    points: list[dict]
    summary: list[BinStat]
    excluded: int
    instances: int


def _mean_cost(runs: list[FirstImprovement]) -> float:
    return statistics.fmean(r.ledger.total for r in runs)


def _crel_rows(ctx: InstanceContext, y: int, depths: list[int], seeds: int, seed: int, y_tag: int = 0):
    """Baseline and per-depth nested cost-to-first-improvement from ``y``; returns records and c_rel by depth.

    Repetition ``s`` runs on seed ``seed + s``; all protocols at that seed
    share one outer-search stream, so the comparison across depths is made
    under common random numbers.
    """
    inst = ctx.inst
    run_seeds = [seed + s for s in range(seeds)]
    base = [baseline_first_improvement(ctx, y, task_rng(rs, inst, 0, y_tag)) for rs in run_seeds]
    records = [ctx.record(BASELINE, rs, run.solution.value, run.ledger) for rs, run in zip(run_seeds, base)]
    c_base = _mean_cost(base)
    crel = {}
    for k in depths:
        runs = [
            nested_first_improvement(ctx, y, k, task_rng(rs, inst, 1, y_tag, k), task_rng(rs, inst, 0, y_tag))
            for rs in run_seeds
        ]
        crel[k] = quantize(nested.relative_cost(c_base, _mean_cost(runs)))
        records += [
            ctx.record(NESTED, rs, run.solution.value, run.ledger, k, run.r_in, crel[k])
            for rs, run in zip(run_seeds, runs)
        ]
    return records, crel


def instance_optima(records: Iterable[RunRecord]) -> dict[str, tuple[float, float, int]]:
    """``instance_id -> (capweight, max_k c_rel, argmax k)`` from nested sweep records."""
    best: dict[str, tuple[float, float, int]] = {}
    for rec in records:
        if rec.protocol != NESTED or rec.c_rel is None:
            continue
        cur = best.get(rec.instance_id)
        if cur is None or rec.c_rel > cur[1] or (rec.c_rel == cur[1] and rec.k < cur[2]):
            best[rec.instance_id] = (rec.capweight, rec.c_rel, rec.k)
    return best


def capweight_summary(records: Iterable[RunRecord]) -> list[BinStat]:
    pts = [(cw, c) for cw, c, _ in instance_optima(records).values()]
    return binned(pts, capweight_bin, 12, left_closed=False)


def capweight_sweep(spec: SweepSpec, params: ProtocolParams = ProtocolParams(), seed: int = 0,
                    threads: int = 1) -> SweepResult:
    """Best-depth relative cost to the first improvement of the greedy incumbent, per instance."""
    insts = spec.cohort()

    def task(inst):
        ctx = InstanceContext(inst, params)
        if ctx.greedy_optimal:
            return None
        return _crel_rows(ctx, ctx.greedy.value, spec.depth_set(inst.n), spec.seeds, seed)[0]

    results = run_pool(task, insts, threads)
    records = [rec for res in results if res is not None for rec in res]
    optima = instance_optima(records)
    points = [
        {"instance_id": iid, "capweight": cw, "c_rel_opt": c, "k_opt": k} for iid, (cw, c, k) in optima.items()
    ]
    excluded = sum(res is None for res in results)
    return SweepResult(records, points, capweight_summary(records), excluded, len(insts))


# ----------------------------------------------------------------- RVTR sweep


def incumbent_chain(
    ctx: InstanceContext, seed: int, limit: Optional[int] = None, start: str = "greedy",
    max_states: Optional[int] = None,
) -> list[int]:
    """Incumbent values a baseline run visits before reaching the optimum.

    ``start="random"`` begins at a uniformly sampled feasible solution.  With
    ``max_states`` the chain stops at the first incumbent whose global marked
    set is larger than that.
    """
    inst = ctx.inst
    rng = task_rng(seed, inst, 2, 0 if start == "greedy" else 1)
    y = ctx.greedy.value if start == "greedy" else ksolve.uniform_feasible(inst, rng).value
    chain: list[int] = []
    while y < ctx.optimum.value and (limit is None or len(chain) < limit):
        if max_states is not None:
            try:
                ksolve.enumerate_global_marked(inst, y, max_states)
            except ksolve.MarkedSetTooLarge:
                break
        chain.append(y)
        y = baseline_first_improvement(ctx, y, rng).solution.value
    return chain


def rvtr_summary(points: Iterable[dict]) -> list[BinStat]:
    return binned(((p["rvtr"], p["c_rel"]) for p in points), rvtr_bin, 21, left_closed=True)


def rvtr_sweep(spec: SweepSpec, params: ProtocolParams = ProtocolParams(), seed: int = 0, threads: int = 1,
               max_incumbents: Optional[int] = 3, random_chain: bool = False,
               chain_max_states: int = 1 << 16) -> SweepResult:
    """Relative cost per (incumbent, depth) pair against that pair's RVTR, depths up to and including ``n``.

    Incumbents come from a baseline chain rooted at the greedy solution and,
    with ``random_chain``, a second chain rooted at a random feasible
    solution; the latter supplies the low incumbents behind large RVTR.
    """
    insts = spec.cohort()

    def task(inst):
        ctx = InstanceContext(inst, params)
        if ctx.greedy_optimal:
            return None
        ys = incumbent_chain(ctx, seed, max_incumbents)
        if random_chain:
            extra = incumbent_chain(ctx, seed, max_incumbents, "random", chain_max_states)
            ys += [y for y in extra if y not in ys]
        records, points = [], []
        for j, y in enumerate(ys):
            recs, crel = _crel_rows(ctx, y, spec.depth_set(inst.n, full=True), spec.seeds, seed, y_tag=j + 1)
            records += recs
            points += [
                {
                    "instance_id": inst.instance_id,
                    "y": y,
                    "k": k,
                    "rvtr": quantize(float(nested.rvtr(inst, k, y))),
                    "c_rel": c,
                }
                for k, c in crel.items()
            ]
        return records, points

    results = run_pool(task, insts, threads)
    records = [rec for res in results if res is not None for rec in res[0]]
    points = [pt for res in results if res is not None for pt in res[1]]
    excluded = sum(res is None for res in results)
    return SweepResult(records, points, rvtr_summary(points), excluded, len(insts))


# ------------------------------------------------------- optimality-gap study


@dataclass(frozen=True)
class GapStat:
    protocol: str
    t: float
    count: int
    mean: float
    std: float


@dataclass
class OptgapResult:
    records: list[RunRecord]
    points: list[dict]
    summary: list[GapStat]
    excluded: int
    instances: int


def run_protocol(ctx: InstanceContext, protocol: str, budget: float, rng: np.random.Generator):
    p = ctx.params
    if protocol == BASELINE:
        return baseline_gas(ctx.inst, ctx.bias, budget, p.lam, rng, p.start, ctx.cache)
    if protocol == NESTED:
        return nested_gas(ctx.inst, ctx.bias, p.policy, p.lam, p.L, budget, rng, p.start, ctx.cache)
    raise ValueError(f"unknown protocol {protocol!r}")


def protocol_record(ctx: InstanceContext, protocol: str, seed: int, result) -> RunRecord:
    inc, ledger, traj = result
    last = next((s for s in reversed(ledger.steps) if s.kind == "outer"), None)
    k = last.k if last is not None and protocol == NESTED else None
    r_in = last.r_in if last is not None and protocol == NESTED else None
    return ctx.record(protocol, seed, inc.value, ledger, k, r_in, trajectory=traj)


def gap_summary(points: Iterable[dict]) -> list[GapStat]:
    groups: dict[tuple[str, float], list[float]] = {}
    for pt in points:
        groups.setdefault((pt["protocol"], pt["t"]), []).append(pt["gamma_mean"])
    out = []
    for (proto, t), vals in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        out.append(GapStat(proto, t, len(vals), quantize(statistics.fmean(vals)), quantize(statistics.pstdev(vals))))
    return out


def optgap_experiment(spec: SweepSpec, c_const: float, t_exps: Sequence[float], reps: int = 4,
                      params: ProtocolParams = ProtocolParams(), seed: int = 0, threads: int = 1,
                      protocols: Sequence[str] = (BASELINE, NESTED)) -> OptgapResult:
    """Final optimality gap under budget ``C n^t``, averaged over ``reps`` runs per datapoint."""
    if c_const <= 0:
        raise ValueError("budget constant must be positive")
    insts = spec.cohort()

    def task(inst):
        ctx = InstanceContext(inst, params)
        if ctx.greedy_optimal:
            return None
        records, points = [], []
        for ti, t in enumerate(t_exps):
            b = nested.budget(c_const, inst.n, t)
            for proto in protocols:
                gammas = []
                for rep in range(reps):
                    rng = task_rng(seed + rep, inst, 3, ti, _PROTOCOL_TAG[proto])
                    rec = protocol_record(ctx, proto, seed + rep, run_protocol(ctx, proto, b, rng))
                    records.append(rec)
                    gammas.append(rec.gamma)
                points.append(
                    {
                        "instance_id": inst.instance_id,
                        "protocol": proto,
                        "t": quantize(t),
                        "budget": quantize(b),
                        "gamma_mean": quantize(statistics.fmean(gammas)),
                    }
                )
        return records, points

    results = run_pool(task, insts, threads)
    records = [rec for res in results if res is not None for rec in res[0]]
    points = [pt for res in results if res is not None for pt in res[1]]
    excluded = sum(res is None for res in results)
    return OptgapResult(records, points, gap_summary(points), excluded, len(insts))


def run_batch(instances: Sequence[KnapsackInstance], protocol: str, c_const: float, t_exps: Sequence[float],
              reps: int = 1, params: ProtocolParams = ProtocolParams(), seed: int = 0,
              threads: int = 1) -> list[RunRecord]:
    """Plain protocol runs under budget ``C n^t``; greedy-optimal instances are kept (gamma reported as 1)."""
    if protocol not in _PROTOCOL_TAG:
        raise ValueError(f"unknown protocol {protocol!r}")

    def task(inst):
        ctx = InstanceContext(inst, params)
        out = []
        for ti, t in enumerate(t_exps):
            b = nested.budget(c_const, inst.n, t)
            for rep in range(reps):
                rng = task_rng(seed + rep, inst, 3, ti, _PROTOCOL_TAG[protocol])
                out.append(protocol_record(ctx, protocol, seed + rep, run_protocol(ctx, protocol, b, rng)))
        return out

    return [rec for recs in run_pool(task, list(instances), threads) for rec in recs]
