"""Baseline Grover Adaptive Search with emulated measurements.

Each QSearch step samples a rotation count ``r`` uniformly from
``{0, ..., ceil(sqrt(m)) - 1}``, applies ``r`` Grover iterations to the QTG
state and measures.  The tracked marked ensemble gives the success
probability ``sin^2((2r+1) theta)`` exactly; on success a marked state is
drawn with probability proportional to its squared amplitude.  Costs are
counted in QTG steps, ``n (2r + 1)`` per baseline step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import amptrack, ksolve
from .amptrack import BiasConfig, MarkedEnsemble
from .instances import KnapsackInstance
from .ksolve import Solution

DEFAULT_LAMBDA = 8.0 / 7.0


@dataclass(frozen=True)
class Incumbent:
    solution: Solution

    @property
    def value(self) -> int:
        return self.solution.value


@dataclass(frozen=True)
class StepEntry:
    kind: str  # "outer" or "inner"
    r: int
    r_in: int
    k: int
    cost: float


@dataclass
class CostLedger:
    inner: float = 0.0
    outer: float = 0.0
    steps: list[StepEntry] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.inner + self.outer

    def add_outer(self, cost: float, r: int, r_in: int = 0, k: int = 0) -> None:
        if cost < 0:
            raise ValueError("negative cost")
        self.outer += cost
        self.steps.append(StepEntry("outer", r, r_in, k, cost))

    def add_inner(self, cost: float, r_in: int, k: int) -> None:
        if cost < 0:
            raise ValueError("negative cost")
        self.inner += cost
        self.steps.append(StepEntry("inner", 0, r_in, k, cost))


@dataclass(frozen=True)
class QSearchState:
    m: float = 1.0
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.lam <= 1:
            raise ValueError("lambda must be > 1")


class RunResult(NamedTuple):
    incumbent: Incumbent
    ledger: CostLedger
    trajectory: list[tuple[float, int]]


class SubspaceCache:
    """Marked sets and tracked ensembles for one (instance, bias) pair.

    Entries depend only on the incumbent value (and depth / inner rotations),
    so repeated runs on the same instance share them.
    """

    def __init__(self, inst: KnapsackInstance, bias: BiasConfig, max_states: int = ksolve.DEFAULT_MAX_STATES):
        self.inst = inst
        self.bias = bias
        self.max_states = max_states
        self._global: dict[int, ksolve.MarkedSet] = {}
        self._baseline: dict[int, MarkedEnsemble] = {}
        self._partial: dict[tuple[int, int], MarkedEnsemble] = {}
        self._nested: dict[tuple[int, int, int], MarkedEnsemble] = {}

    def global_marked(self, y: int) -> ksolve.MarkedSet:
        if y not in self._global:
            self._global[y] = ksolve.enumerate_global_marked(self.inst, y, self.max_states)
        return self._global[y]

    def baseline(self, y: int) -> MarkedEnsemble:
        if y not in self._baseline:
            self._baseline[y] = amptrack.build_partial_ensemble(self.inst, self.bias, self.global_marked(y))
        return self._baseline[y]

    def partial(self, y: int, k: int) -> MarkedEnsemble:
        key = (y, k)
        if key not in self._partial:
            marked = ksolve.enumerate_partial_marked(self.inst, y, k, self.max_states)
            self._partial[key] = amptrack.build_partial_ensemble(self.inst, self.bias, marked)
        return self._partial[key]

    def nested(self, y: int, k: int, r_in: int) -> MarkedEnsemble:
        """Partial ensemble, rotated ``r_in`` times, pushed through the remaining QTG steps."""
        if r_in == 0:
            return self.baseline(y)
        key = (y, k, r_in)
        if key not in self._nested:
            inner = amptrack.apply_rotation(self.partial(y, k), r_in)
            self._nested[key] = amptrack.extend_ensemble(self.inst, self.bias, inner, self.global_marked(y))
        return self._nested[key]


def sample_rotation_count(m: float, rng: np.random.Generator) -> int:
    if m < 1:
        raise ValueError("m must be >= 1")
    return int(rng.integers(0, math.ceil(math.sqrt(m))))


def emulate_measurement(ens: MarkedEnsemble, r: int, rng: np.random.Generator) -> Optional[Solution]:
    """Measure after ``r`` Grover iterations; ``None`` means an unmarked outcome."""
    p_success = amptrack.success_probability(ens, r)
    if len(ens) == 0 or rng.random() >= p_success:
        return None
    cum = np.cumsum(ens.amplitudes * ens.amplitudes)
    j = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    j = min(j, len(ens) - 1)
    bits = ksolve.code_to_bits(int(ens.codes[j]), ens.depth)
    return Solution(bits, int(ens.profits[j]), int(ens.weights[j]))


class StepOutcome(NamedTuple):
    incumbent: Incumbent
    qs: QSearchState
    r: int
    cost: float


def search_step(
    ens: MarkedEnsemble,
    incumbent: Incumbent,
    qs: QSearchState,
    rng: np.random.Generator,
    step_cost: Callable[[int], float],
) -> StepOutcome:
    """One QSearch iteration against a prepared ensemble."""
    r = sample_rotation_count(qs.m, rng)
    outcome = emulate_measurement(ens, r, rng)
    if outcome is not None and outcome.value > incumbent.value:
        incumbent, qs = Incumbent(outcome), replace(qs, m=1.0)
    else:
        qs = replace(qs, m=qs.m * qs.lam)
    return StepOutcome(incumbent, qs, r, step_cost(r))


def qsearch_step(
    inst: KnapsackInstance,
    bias: BiasConfig,
    incumbent: Incumbent,
    qs: QSearchState,
    rng: np.random.Generator,
    ledger: CostLedger,
    cache: SubspaceCache | None = None,
) -> StepOutcome:
    cache = cache or SubspaceCache(inst, bias)
    ens = cache.baseline(incumbent.value)
    n = inst.n
    out = search_step(ens, incumbent, qs, rng, lambda r: n * (2 * r + 1))
    ledger.add_outer(out.cost, out.r)
    return out


def initial_incumbent(inst: KnapsackInstance, start: str, rng: np.random.Generator) -> Incumbent:
    if start == "greedy":
        return Incumbent(ksolve.greedy_solution(inst))
    if start == "random":
        return Incumbent(ksolve.uniform_feasible(inst, rng))
    raise ValueError(f"unknown start {start!r}")


def baseline_gas(
    inst: KnapsackInstance,
    bias: BiasConfig,
    budget: float,
    lam: float = DEFAULT_LAMBDA,
    rng: np.random.Generator | None = None,
    start: str = "greedy",
    cache: SubspaceCache | None = None,
) -> RunResult:
    """Run QSearch steps until the accumulated cost reaches ``budget``.

    The budget is checked after each completed step, so the final cost can
    exceed it by up to one step.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    cache = cache or SubspaceCache(inst, bias)
    incumbent = initial_incumbent(inst, start, rng)
    qs = QSearchState(1.0, lam)
    ledger = CostLedger()
    trajectory = [(0.0, incumbent.value)]
    while ledger.total < budget:
        incumbent, qs, *_ = qsearch_step(inst, bias, incumbent, qs, rng, ledger, cache)
        trajectory.append((ledger.total, incumbent.value))
    return RunResult(incumbent, ledger, trajectory)
