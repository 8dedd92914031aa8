"""Exact knapsack solving and extraction of marked subspaces.

The global marked set for incumbent value ``y`` holds every feasible
``x in {0,1}^n`` with profit strictly above ``y``.  The partial marked set at
depth ``k`` holds every prefix ``x in {0,1}^k`` that respects the capacity
and could still beat ``y`` if all remaining items were packed, i.e. its
prefix profit exceeds ``y - sum(p[k:])``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .instances import KnapsackInstance

DEFAULT_MAX_STATES = 1 << 22
DEFAULT_DP_CELLS = 1 << 28


class MarkedSetTooLarge(RuntimeError):
    """Raised instead of silently truncating a marked set."""

    def __init__(self, depth: int, threshold: int, limit: int):
        super().__init__(
            f"marked set at depth {depth} with threshold {threshold} exceeds {limit} states; "
            "raise max_states or use a tighter incumbent"
        )
        self.depth = depth
        self.threshold = threshold
        self.limit = limit


class SolverResourceError(MemoryError):
    pass


@dataclass(frozen=True)
class Solution:
    bits: tuple[int, ...]
    value: int
    weight: int

    @classmethod
    def from_bits(cls, inst: KnapsackInstance, bits) -> "Solution":
        bits = tuple(int(b) for b in bits)
        value = sum(p for p, b in zip(inst.profits, bits) if b)
        weight = sum(w for w, b in zip(inst.weights, bits) if b)
        return cls(bits, value, weight)

    @classmethod
    def from_code(cls, inst: KnapsackInstance, code: int) -> "Solution":
        return cls.from_bits(inst, code_to_bits(int(code), inst.n))

    def is_feasible(self, inst: KnapsackInstance) -> bool:
        return self.weight <= inst.capacity


def code_to_bits(code: int, nbits: int) -> tuple[int, ...]:
    return tuple((code >> (nbits - 1 - i)) & 1 for i in range(nbits))


def bits_to_code(bits) -> int:
    code = 0
    for b in bits:
        code = (code << 1) | int(b)
    return code


@dataclass(frozen=True, eq=False)
class MarkedSet:
    """Marked bitstrings at a given depth, sorted lexicographically.

    ``codes[j]`` packs the bitstring (item 0 is the most significant bit);
    ``profits[j]`` and ``weights[j]`` are its partial sums over the first
    ``depth`` items.
    """

    depth: int
    threshold: int
    codes: np.ndarray
    profits: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return int(self.codes.size)

    def bitstrings(self) -> list[tuple[int, ...]]:
        return [code_to_bits(int(c), self.depth) for c in self.codes]


def greedy_solution(inst: KnapsackInstance) -> Solution:
    """Pack items by decreasing profit density while they fit."""
    order = sorted(range(inst.n), key=lambda j: (-Fraction(inst.profits[j], inst.weights[j]), j))
    bits = [0] * inst.n
    room = inst.capacity
    for j in order:
        if inst.weights[j] <= room:
            bits[j] = 1
            room -= inst.weights[j]
    return Solution.from_bits(inst, bits)


def optimal_solution(inst: KnapsackInstance, max_cells: int = DEFAULT_DP_CELLS) -> Solution:
    """Dynamic programme over capacity, one item at a time."""
    n, c = inst.n, inst.capacity
    if n * (c + 1) > max_cells:
        raise SolverResourceError(
            f"DP table of {n} x {c + 1} cells exceeds budget {max_cells}; use a branch-and-bound solver"
        )
    best = np.zeros(c + 1, dtype=np.int64)
    take = np.zeros((n, c + 1), dtype=bool)
    for i, (w, p) in enumerate(zip(inst.weights, inst.profits)):
        if w > c:
            continue
        cand = best[: c + 1 - w] + p
        better = cand > best[w:]
        take[i, w:] = better
        best[w:] = np.where(better, cand, best[w:])
    bits = [0] * n
    room = c
    for i in range(n - 1, -1, -1):
        if take[i, room]:
            bits[i] = 1
            room -= inst.weights[i]
    sol = Solution.from_bits(inst, bits)
    assert sol.value == best[c]
    return sol


def _enumerate(inst: KnapsackInstance, depth: int, threshold: int, max_states: int, backend=None) -> MarkedSet:
    if depth > _kernels.MAX_CODE_BITS:
        raise ValueError(f"depth {depth} exceeds {_kernels.MAX_CODE_BITS} packed bits")
    codes, w, p, count = _kernels.enumerate_prefixes(
        inst.w[:depth], inst.p[:depth], inst.capacity, depth, threshold, max_states, backend=backend
    )
    if count < 0:
        raise MarkedSetTooLarge(depth, threshold, max_states)
    return MarkedSet(depth, int(threshold), codes, p, w)


def enumerate_global_marked(
    inst: KnapsackInstance, y: int, max_states: int = DEFAULT_MAX_STATES, backend=None
) -> MarkedSet:
    return _enumerate(inst, inst.n, int(y), max_states, backend)


def partial_threshold(inst: KnapsackInstance, y: int, k: int) -> int:
    return int(y) - sum(inst.profits[k:])


def enumerate_partial_marked(
    inst: KnapsackInstance, y: int, k: int, max_states: int = DEFAULT_MAX_STATES, backend=None
) -> MarkedSet:
    if not 1 <= k <= inst.n:
        raise ValueError(f"depth k={k} outside 1..{inst.n}")
    return _enumerate(inst, k, partial_threshold(inst, y, k), max_states, backend)


def feasible_states(inst: KnapsackInstance, max_states: int = DEFAULT_MAX_STATES) -> MarkedSet:
    """Every feasible bitstring (all profits exceed -1)."""
    return enumerate_global_marked(inst, -1, max_states)


def uniform_feasible(inst: KnapsackInstance, rng: np.random.Generator) -> Solution:
    """Exactly uniform sample from the feasible set via completion counts."""
    n, c = inst.n, inst.capacity
    # counts[i, rem]: feasible completions of items i..n-1 with room rem (float64 is exact below 2**53)
    counts = np.zeros((n + 1, c + 1), dtype=np.float64)
    counts[n, :] = 1.0
    for i in range(n - 1, -1, -1):
        w = inst.weights[i]
        counts[i] = counts[i + 1]
        if w <= c:
            counts[i, w:] += counts[i + 1, : c + 1 - w]
    bits = []
    room = c
    for i in range(n):
        w = inst.weights[i]
        with_item = counts[i + 1, room - w] if w <= room else 0.0
        if rng.random() * counts[i, room] < with_item:
            bits.append(1)
            room -= w
        else:
            bits.append(0)
    return Solution.from_bits(inst, bits)
