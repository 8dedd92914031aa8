"""Knapsack instance generation in the Pisinger parameterisation.

Instances are described by item count ``n``, a sampling range ``r``, a
correlation type, a tightness ``S`` and an index ``i``.  Weights are drawn
from ``{1..r}``; profits depend on the correlation type; the capacity is

    c = max(ceil(i / (S + 1) * sum(w)), r + 1)

Randomness comes from :class:`SplitMix64Stream`, a counter-based generator
whose output depends only on the folded key and the draw counter, so the
same parameters give the same instance on every platform.

>>> inst = generate_instance(3, 10, CorrType.STRONGLY_CORRELATED, 1, 1)
>>> [p - w for w, p in zip(inst.weights, inst.profits)]
[10, 10, 10]
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import IO, Iterable, Iterator

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class ParameterError(ValueError):
    """Invalid generator parameter combination."""


class CorrType(str, enum.Enum):
    UNCORRELATED = "uncorrelated"
    WEAKLY_CORRELATED = "weakly_correlated"
    STRONGLY_CORRELATED = "strongly_correlated"

    @classmethod
    def parse(cls, text: str) -> "CorrType":
        aliases = {"unc": cls.UNCORRELATED, "weak": cls.WEAKLY_CORRELATED, "strong": cls.STRONGLY_CORRELATED}
        key = text.strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


class Ordering(str, enum.Enum):
    AS_GENERATED = "as_generated"
    DENSITY_DESCENDING = "density_descending"
    VALUE_DESCENDING = "value_descending"


_CORR_CODE = {CorrType.UNCORRELATED: 1, CorrType.WEAKLY_CORRELATED: 2, CorrType.STRONGLY_CORRELATED: 3}


def splitmix64(x: int) -> int:
    """The SplitMix64 finaliser (Steele, Lea & Flood 2014)."""
    x = (x + GOLDEN_GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fold_key(*values: int) -> int:
    key = 0
    for v in values:
        key = splitmix64(key ^ (v & MASK64))
    return key


class SplitMix64Stream:
    """Counter-based stream: draw ``j`` is ``splitmix64(key + j * GOLDEN_GAMMA)``."""

    def __init__(self, key: int):
        self.key = key & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        out = splitmix64((self.key + self.counter * GOLDEN_GAMMA) & MASK64)
        self.counter += 1
        return out

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` by rejection (no modulo bias)."""
        span = hi - lo + 1
        if span <= 0:
            raise ParameterError(f"empty range [{lo}, {hi}]")
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % span


@dataclass(frozen=True)
class KnapsackInstance:
    weights: tuple[int, ...]
    profits: tuple[int, ...]
    capacity: int
    corr_type: CorrType = CorrType.UNCORRELATED
    range_r: int = 0
    tightness_s: int = 0
    index_i: int = 0
    ordering: Ordering = Ordering.AS_GENERATED

    def __post_init__(self):
        if len(self.weights) != len(self.profits):
            raise ParameterError("weights and profits differ in length")
        if any(w < 1 for w in self.weights) or any(p < 1 for p in self.profits):
            raise ParameterError("weights and profits must be positive integers")
        if self.capacity < 0:
            raise ParameterError("capacity must be non-negative")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def instance_id(self) -> str:
        return f"{self.corr_type.value}-n{self.n}-r{self.range_r}-S{self.tightness_s}-i{self.index_i}"

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.int64)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.profits, dtype=np.int64)

    def key(self) -> tuple:
        return (self.weights, self.profits, self.capacity)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "weights": list(self.weights),
            "profits": list(self.profits),
            "capacity": self.capacity,
            "corr_type": self.corr_type.value,
            "range_r": self.range_r,
            "tightness_s": self.tightness_s,
            "index_i": self.index_i,
            "ordering": self.ordering.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "KnapsackInstance":
        inst = cls(
            weights=tuple(int(v) for v in d["weights"]),
            profits=tuple(int(v) for v in d["profits"]),
            capacity=int(d["capacity"]),
            corr_type=CorrType(d.get("corr_type", "uncorrelated")),
            range_r=int(d.get("range_r", 0)),
            tightness_s=int(d.get("tightness_s", 0)),
            index_i=int(d.get("index_i", 0)),
            ordering=Ordering(d.get("ordering", "as_generated")),
        )
        if "n" in d and int(d["n"]) != inst.n:
            raise ParameterError(f"n={d['n']} disagrees with {inst.n} items")
        return inst


@dataclass(frozen=True)
class InstanceMetrics:
    capweight: Fraction
    total_weight: int
    total_profit: int


def generate_instance(
    n: int,
    range_r: int,
    corr_type: CorrType | str,
    tightness_s: int,
    index_i: int,
) -> KnapsackInstance:
    corr_type = CorrType.parse(corr_type) if isinstance(corr_type, str) else corr_type
    if n < 1:
        raise ParameterError("n must be >= 1")
    if range_r < 1:
        raise ParameterError("range must be >= 1")
    if tightness_s < 1:
        raise ParameterError("tightness S must be >= 1")
    if index_i < 1:
        raise ParameterError("instance index must be >= 1")
    if corr_type is CorrType.WEAKLY_CORRELATED and range_r < 10:
        raise ParameterError("weakly correlated instances need range >= 10")

    rng = SplitMix64Stream(fold_key(n, range_r, _CORR_CODE[corr_type], index_i))
    spread = range_r // 10
    weights, profits = [], []
    for _ in range(n):
        w = rng.integer(1, range_r)
        if corr_type is CorrType.UNCORRELATED:
            p = rng.integer(1, range_r)
        elif corr_type is CorrType.WEAKLY_CORRELATED:
            p = rng.integer(max(1, w - spread), w + spread)
        else:
            p = w + 10
        weights.append(w)
        profits.append(p)

    total = sum(weights)
    capacity = max(-(-index_i * total // (tightness_s + 1)), range_r + 1)
    return KnapsackInstance(
        weights=tuple(weights),
        profits=tuple(profits),
        capacity=capacity,
        corr_type=corr_type,
        range_r=range_r,
        tightness_s=tightness_s,
        index_i=index_i,
    )


def generate_batch(
    n: int, range_r: int, corr_type: CorrType | str, tightness_s: int, count: int, start_index: int = 1
) -> list[KnapsackInstance]:
    return [generate_instance(n, range_r, corr_type, tightness_s, i) for i in range(start_index, start_index + count)]


def compute_metrics(inst: KnapsackInstance) -> InstanceMetrics:
    total_w = sum(inst.weights)
    if total_w <= 0:
        raise ParameterError("total weight must be positive")
    return InstanceMetrics(Fraction(inst.capacity, total_w), total_w, sum(inst.profits))


def dedup_instances(batch: Iterable[KnapsackInstance]) -> list[KnapsackInstance]:
    """Keep the first instance of every distinct (weights, profits, capacity) triple."""
    seen = set()
    out = []
    for inst in batch:
        k = inst.key()
        if k not in seen:
            seen.add(k)
            out.append(inst)
    return out


def item_permutation(inst: KnapsackInstance, ordering: Ordering) -> list[int]:
    idx = range(inst.n)
    if ordering is Ordering.AS_GENERATED:
        return list(idx)
    if ordering is Ordering.DENSITY_DESCENDING:
        return sorted(idx, key=lambda j: (-Fraction(inst.profits[j], inst.weights[j]), j))
    if ordering is Ordering.VALUE_DESCENDING:
        return sorted(idx, key=lambda j: (-inst.profits[j], j))
    raise ParameterError(f"unknown ordering {ordering!r}")


def reorder_items(inst: KnapsackInstance, ordering: Ordering | str) -> KnapsackInstance:
    ordering = Ordering(ordering)
    perm = item_permutation(inst, ordering)
    return replace(
        inst,
        weights=tuple(inst.weights[j] for j in perm),
        profits=tuple(inst.profits[j] for j in perm),
        ordering=ordering,
    )


def write_jsonl(instances: Iterable[KnapsackInstance], fh: IO[str]) -> None:
    for inst in instances:
        fh.write(inst.to_json())
        fh.write("\n")


def read_jsonl(fh: IO[str]) -> Iterator[KnapsackInstance]:
    for line in fh:
        line = line.strip()
        if line:
            yield KnapsackInstance.from_dict(json.loads(line))


def capweight_float(inst: KnapsackInstance) -> float:
    return float(compute_metrics(inst).capweight)


def register_width(value: int) -> int:
    """Bits needed to store the integers ``0..value``, i.e. ``ceil(log2(value + 1))``."""
    return max(1, int(value).bit_length())
