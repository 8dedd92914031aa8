"""Nested amplitude amplification: inner iteration finder and nested GAS.

The decision tree is cut at depth ``k``.  An inner search amplifies every
depth-``k`` prefix that could still beat the incumbent once the remaining
items are added; the inner iteration finder (IIF) picks a rotation count
``r_in`` for that search, certified by ``L`` consecutive marked samples.
The outer GAS then uses ``QTG_{n-k} . X(r_in)`` as its state preparation, at
``(2r + 1)(n + 2 r_in k)`` QTG steps per outer iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from . import amptrack, ksolve
from .amptrack import BiasConfig
from .gas import (
    DEFAULT_LAMBDA,
    CostLedger,
    Incumbent,
    QSearchState,
    RunResult,
    SubspaceCache,
    initial_incumbent,
    sample_rotation_count,
    search_step,
)
from .instances import KnapsackInstance

DEFAULT_L = 5
DEFAULT_RVTR_TARGET = 0.6
MAX_IIF_ROUNDS = 64
# theta_k this close to pi/2 means the partial filter keeps (almost) everything
SATURATION_TOL = 1e-9


@dataclass(frozen=True)
class IifResult:
    r_in: int
    cost: float
    attempts: int
    degenerate: bool
    rounds: int = 0
    theta: float = 0.0


@dataclass(frozen=True)
class DepthPolicy:
    mode: str = "rvtr"
    k: int | None = None
    target: float = DEFAULT_RVTR_TARGET

    def __post_init__(self):
        if self.mode == "fixed":
            if self.k is None or self.k < 1:
                raise ValueError("fixed depth policy needs k >= 1")
        elif self.mode == "rvtr":
            if not 0.0 < self.target < 1.0:
                raise ValueError("RVTR target must lie in (0, 1)")
        else:
            raise ValueError(f"unknown depth policy mode {self.mode!r}")

    @classmethod
    def fixed(cls, k: int) -> "DepthPolicy":
        return cls("fixed", k=int(k))

    @classmethod
    def rvtr_target(cls, target: float = DEFAULT_RVTR_TARGET) -> "DepthPolicy":
        return cls("rvtr", target=float(target))

    @classmethod
    def parse(cls, text: str) -> "DepthPolicy":
        """``fixed:K`` or ``rvtr:TARGET``."""
        mode, _, arg = text.partition(":")
        mode = mode.strip().lower()
        if mode == "fixed":
            return cls.fixed(int(arg))
        if mode == "rvtr":
            return cls.rvtr_target(float(arg) if arg else DEFAULT_RVTR_TARGET)
        raise ValueError(f"cannot parse depth policy {text!r}")

    def __str__(self) -> str:
        return f"fixed:{self.k}" if self.mode == "fixed" else f"rvtr:{self.target:g}"


@dataclass(frozen=True)
class CpBounds:
    p_lower: float
    p_upper: float
    confidence: float


def rvtr(inst: KnapsackInstance, k: int, y: int) -> Fraction:
    """Profit mass of items ``k..n-1`` relative to the incumbent value."""
    if not 0 <= k <= inst.n:
        raise ValueError(f"depth k={k} outside 0..{inst.n}")
    if y == 0:
        raise ZeroDivisionError("RVTR undefined for incumbent value 0")
    return Fraction(sum(inst.profits[k:]), y)


def choose_depth(inst: KnapsackInstance, y: int, policy: DepthPolicy) -> int:
    n = inst.n
    if n < 2:
        raise ValueError("no valid depth for n < 2")
    if policy.mode == "fixed":
        if not 1 <= policy.k <= n - 1:
            raise ValueError(f"fixed depth {policy.k} outside 1..{n - 1}")
        return policy.k
    if y <= 0:
        raise ValueError("RVTR depth selection needs a positive incumbent value")
    target = Fraction(str(policy.target))
    # min() keeps the first (smallest) k on ties
    return min(range(1, n), key=lambda k: abs(rvtr(inst, k, y) - target))


def clopper_pearson(successes: int, trials: int, confidence: float = 0.9) -> CpBounds:
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    alpha = 1.0 - confidence
    s, t = successes, trials
    lower = 0.0 if s == 0 else float(stats.beta.ppf(alpha / 2, s, t - s + 1))
    upper = 1.0 if s == t else float(stats.beta.ppf(1 - alpha / 2, s + 1, t - s))
    return CpBounds(lower, upper, confidence)


def iif(
    inst: KnapsackInstance,
    bias: BiasConfig,
    k: int,
    incumbent: Incumbent | int,
    lam: float = DEFAULT_LAMBDA,
    L: int = DEFAULT_L,
    rng: np.random.Generator | None = None,
    ledger: CostLedger | None = None,
    cache: SubspaceCache | None = None,
    max_rounds: int = MAX_IIF_ROUNDS,
) -> IifResult:
    """Inner iteration finder at depth ``k``.

    Each round samples ``r_in`` from ``{0, ..., ceil(sqrt(m)) - 1}`` and takes
    up to ``L`` measurements of the inner search, stopping at the first
    unmarked outcome.  Every measurement costs ``k (2 r_in + 1)``.  The finder
    returns once a round sees ``L`` marked outcomes in a row.
    """
    if not 1 <= k <= inst.n:
        raise ValueError(f"depth k={k} outside 1..{inst.n}")
    if L < 1:
        raise ValueError("L must be >= 1")
    y = incumbent if isinstance(incumbent, int) else incumbent.value
    rng = rng if rng is not None else np.random.default_rng()
    cache = cache or SubspaceCache(inst, bias)
    theta = cache.partial(y, k).theta
    if len(cache.partial(y, k)) == 0 or theta == 0.0:
        result = IifResult(0, 0.0, 0, True, 0, theta)
    elif theta >= 0.5 * math.pi * (1.0 - SATURATION_TOL):
        # every sample lands marked: one round of L validations at r_in = 0
        result = IifResult(0, float(L * k), L, True, 1, theta)
    else:
        result = _iif_rounds(k, theta, lam, L, rng, max_rounds)
    if ledger is not None:
        ledger.add_inner(result.cost, result.r_in, k)
    return result


def _iif_rounds(k: int, theta: float, lam: float, L: int, rng: np.random.Generator, max_rounds: int) -> IifResult:
    m = 1.0
    m_cap = 2.0**k
    cost = 0.0
    attempts = 0
    best_r, best_p = 0, -1.0
    for rounds in range(1, max_rounds + 1):
        r_in = sample_rotation_count(m, rng)
        p_marked = math.sin((2 * r_in + 1) * theta) ** 2
        if p_marked > best_p:
            best_r, best_p = r_in, p_marked
        passed = 0
        while passed < L:
            attempts += 1
            cost += k * (2 * r_in + 1)
            if rng.random() >= p_marked:
                break
            passed += 1
        if passed == L:
            return IifResult(r_in, cost, attempts, False, rounds, theta)
        m = min(lam * m, m_cap)
    return IifResult(best_r, cost, attempts, True, max_rounds, theta)


def nested_step_cost(n: int, k: int, r_in: int, r: int) -> int:
    return (2 * r + 1) * (n + 2 * r_in * k)


def nested_gas(
    inst: KnapsackInstance,
    bias: BiasConfig,
    policy: DepthPolicy,
    lam: float = DEFAULT_LAMBDA,
    L: int = DEFAULT_L,
    budget: float = 1.0,
    rng: np.random.Generator | None = None,
    start: str = "greedy",
    cache: SubspaceCache | None = None,
) -> RunResult:
    """Nested GAS until the accumulated cost (inner plus outer) reaches ``budget``.

    Depth and inner rotation count are recomputed whenever the incumbent
    value changes.  The budget is checked once the IIF cost and the outer
    step have both been charged.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    cache = cache or SubspaceCache(inst, bias)
    n = inst.n
    incumbent = initial_incumbent(inst, start, rng)
    qs = QSearchState(1.0, lam)
    ledger = CostLedger()
    trajectory = [(0.0, incumbent.value)]
    y_prev = None
    k = r_in = 0
    while ledger.total < budget:
        y = incumbent.value
        if y != y_prev:
            k = choose_depth(inst, y, policy)
            r_in = iif(inst, bias, k, y, lam, L, rng, ledger, cache).r_in
        y_prev = y
        ens = cache.nested(y, k, r_in)
        step = search_step(ens, incumbent, qs, rng, lambda r: nested_step_cost(n, k, r_in, r))
        incumbent, qs = step.incumbent, step.qs
        ledger.add_outer(step.cost, step.r, r_in, k)
        trajectory.append((ledger.total, incumbent.value))
    return RunResult(incumbent, ledger, trajectory)


def relative_cost(c_base: float, c_nested: float) -> float:
    if c_base <= 0 or c_nested <= 0:
        raise ValueError("relative cost needs positive costs")
    return math.log2(c_base / c_nested)


def budget(c_const: float, n: int, t_exp: float) -> float:
    if c_const <= 0 or n < 1:
        raise ValueError("need C > 0 and n >= 1")
    return c_const * n**t_exp
