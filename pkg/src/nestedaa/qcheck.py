"""Dense statevector simulation of the QTG, threshold oracle and AA operators.

Only for small registers; used to certify the amplitude tracker.  The state is
stored as a tensor with one axis per item qubit followed by the capacity
register, the profit register and the oracle flag qubit:

    amps[x_0, ..., x_{n-1}, C, P, flag]

Register arithmetic is modular so every gate is a permutation or a
controlled 2x2 unitary on the full space.  The comparator ``w_m <= C`` is
evaluated per basis state rather than built from gates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .amptrack import BiasConfig, success_probability
from .gas import SubspaceCache
from .instances import KnapsackInstance, register_width
from .ksolve import enumerate_global_marked, partial_threshold

MAX_QUBITS = 26


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterLayout:
    item_qubits: int
    capacity_qubits: int
    profit_qubits: int
    capacity: int
    flag_qubits: int = 1

    @classmethod
    def for_instance(cls, inst: KnapsackInstance, max_qubits: int = MAX_QUBITS) -> "RegisterLayout":
        layout = cls(inst.n, register_width(inst.capacity), register_width(sum(inst.profits)), inst.capacity)
        if layout.total_qubits > max_qubits:
            raise LayoutError(f"{layout.total_qubits} qubits exceed the simulation cap of {max_qubits}")
        return layout

    @property
    def total_qubits(self) -> int:
        return self.item_qubits + self.capacity_qubits + self.profit_qubits + self.flag_qubits

    @property
    def arithmetic_width(self) -> int:
        """``max(ceil(log2 c), ceil(log2 sum p))`` as used by the gate-cost estimate."""
        return max(self.capacity_qubits, self.profit_qubits)

    @property
    def shape(self) -> tuple[int, ...]:
        return (2,) * self.item_qubits + (1 << self.capacity_qubits, 1 << self.profit_qubits, 2)

    @property
    def cap_axis(self) -> int:
        return self.item_qubits

    @property
    def profit_axis(self) -> int:
        return self.item_qubits + 1

    @property
    def flag_axis(self) -> int:
        return self.item_qubits + 2


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: RegisterLayout
    amps: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps.ravel()))

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.amps.copy())


def initial_state(layout: RegisterLayout) -> StateVector:
    """Items ``|0...0>``, capacity register ``|c>``, profit ``|0>``, flag ``|->``."""
    amps = np.zeros(layout.shape, dtype=np.complex128)
    head = (0,) * layout.item_qubits + (layout.capacity, 0)
    amps[head + (0,)] = 1 / math.sqrt(2)
    amps[head + (1,)] = -1 / math.sqrt(2)
    return StateVector(layout, amps)


def _check_fits(layout: RegisterLayout, inst: KnapsackInstance) -> None:
    if inst.n != layout.item_qubits:
        raise LayoutError("item register size does not match the instance")
    if inst.capacity >= 1 << layout.capacity_qubits or sum(inst.profits) >= 1 << layout.profit_qubits:
        raise LayoutError("arithmetic registers too narrow for this instance")


def _biased_hadamard(bias: BiasConfig, m: int) -> np.ndarray:
    b = bias.bias_b
    stay = (b + 1) / (b + 2) if bias.reference[m] == 0 else 1 / (b + 2)
    s, t = math.sqrt(stay), math.sqrt(1 - stay)
    # reflection form: b = 0 gives the ordinary Hadamard, and it is self-inverse
    return np.array([[s, t], [t, -s]])


def _qtg_item(amps: np.ndarray, layout: RegisterLayout, inst: KnapsackInstance, bias: BiasConfig, m: int, inverse: bool):
    n = layout.item_qubits
    cap_axis_in_slice = layout.cap_axis - 1
    prof_axis_in_slice = layout.profit_axis - 1
    w, p = inst.weights[m], inst.profits[m]
    a0 = np.take(amps, 0, axis=m)
    a1 = np.take(amps, 1, axis=m)

    def arith(a1, sign):
        a1 = np.roll(a1, -sign * w, axis=cap_axis_in_slice)
        return np.roll(a1, sign * p, axis=prof_axis_in_slice)

    def mix(a0, a1):
        u = _biased_hadamard(bias, m)
        fits = np.arange(1 << layout.capacity_qubits) >= w
        shape = [1] * (n - 1 + 3)
        shape[cap_axis_in_slice] = fits.size
        fits = fits.reshape(shape)
        new0 = np.where(fits, u[0, 0] * a0 + u[0, 1] * a1, a0)
        new1 = np.where(fits, u[1, 0] * a0 + u[1, 1] * a1, a1)
        return new0, new1

    if not inverse:
        a0, a1 = mix(a0, a1)
        a1 = arith(a1, +1)
    else:
        a1 = arith(a1, -1)
        a0, a1 = mix(a0, a1)
    return np.stack((a0, a1), axis=m)


def apply_qtg(
    state: StateVector, inst: KnapsackInstance, bias: BiasConfig, item_range: range | None = None, inverse: bool = False
) -> StateVector:
    """Comparator-controlled biased Hadamard, then controlled SUB/ADD, for each item in range."""
    layout = state.layout
    _check_fits(layout, inst)
    items = list(item_range if item_range is not None else range(inst.n))
    amps = state.amps
    for m in reversed(items) if inverse else items:
        amps = _qtg_item(amps, layout, inst, bias, m, inverse)
    return StateVector(layout, amps)


def threshold_patterns(threshold: int, width: int) -> list[int]:
    """Control patterns of the ``p > T`` comparator, one per zero bit ``j`` of ``T``.

    The pattern for bit ``j`` fixes ``p_i = T_i`` above ``j`` and ``p_j = 1``,
    which is the prefix value ``(T >> j) + 1`` of ``p >> j``.  Returned as the
    list of zero-bit positions ``j`` (MSB first).
    """
    if threshold >= (1 << width) - 1:
        return []
    return [j for j in range(width - 1, -1, -1) if not (threshold >> j) & 1]


def pattern_mask(threshold: int, width: int) -> np.ndarray:
    """Which register values at least one control pattern fires on."""
    values = np.arange(1 << width)
    if threshold < 0:
        return np.ones(values.size, dtype=bool)
    hit = np.zeros(values.size, dtype=bool)
    for j in threshold_patterns(threshold, width):
        hit |= (values >> j) == (threshold >> j) + 1
    return hit


def apply_threshold_oracle(state: StateVector, threshold: int) -> StateVector:
    """Flip the ``|->`` flag (a ``-1`` phase) on every basis state with profit ``> threshold``."""
    layout = state.layout
    fire = pattern_mask(int(threshold), layout.profit_qubits)
    shape = [1] * len(layout.shape)
    shape[layout.profit_axis] = fire.size
    fire = fire.reshape(shape)
    flipped = np.flip(state.amps, axis=layout.flag_axis)
    return StateVector(layout, np.where(fire, flipped, state.amps))


def apply_diffuser(state: StateVector) -> StateVector:
    """``I - 2|s><s|`` about the pre-preparation state (items 0, ``C = c``, ``P = 0``)."""
    layout = state.layout
    amps = state.amps.copy()
    head = (0,) * layout.item_qubits + (layout.capacity, 0)
    amps[head] *= -1
    return StateVector(layout, amps)


class NestedOperator:
    """``(-G D G^dag O_global)^r_out G`` with ``G = QTG_{n-k} X(r_in)``."""

    def __init__(self, inst: KnapsackInstance, bias: BiasConfig, k: int, y: int, r_in: int):
        if not 1 <= k <= inst.n:
            raise ValueError(f"depth k={k} outside 1..{inst.n}")
        self.inst, self.bias, self.k, self.y, self.r_in = inst, bias, k, int(y), int(r_in)
        self.inner_threshold = partial_threshold(inst, y, k)
        self.head = range(0, k)
        self.tail = range(k, inst.n)

    def _a(self, s, inverse=False):
        return apply_qtg(s, self.inst, self.bias, self.head, inverse)

    def _inner_iterate(self, s):
        s = apply_threshold_oracle(s, self.inner_threshold)
        s = apply_diffuser(self._a(s, inverse=True))
        s = self._a(s)
        return StateVector(s.layout, -s.amps)

    def _inner_iterate_dag(self, s):
        s = apply_diffuser(self._a(s, inverse=True))
        s = apply_threshold_oracle(self._a(s), self.inner_threshold)
        return StateVector(s.layout, -s.amps)

    def prepare(self, s):
        s = self._a(s)
        for _ in range(self.r_in):
            s = self._inner_iterate(s)
        return apply_qtg(s, self.inst, self.bias, self.tail)

    def unprepare(self, s):
        s = apply_qtg(s, self.inst, self.bias, self.tail, inverse=True)
        for _ in range(self.r_in):
            s = self._inner_iterate_dag(s)
        return self._a(s, inverse=True)

    def outer_iterate(self, s):
        s = apply_threshold_oracle(s, self.y)
        s = self.prepare(apply_diffuser(self.unprepare(s)))
        return StateVector(s.layout, -s.amps)


def run_nested_operator(
    inst: KnapsackInstance, bias: BiasConfig, k: int, y: int, r_in: int, r_out: int, max_qubits: int = MAX_QUBITS
) -> StateVector:
    layout = RegisterLayout.for_instance(inst, max_qubits)
    op = NestedOperator(inst, bias, k, y, r_in)
    s = op.prepare(initial_state(layout))
    for _ in range(r_out):
        s = op.outer_iterate(s)
    return s


def nested_marked_trajectory(
    inst: KnapsackInstance, bias: BiasConfig, k: int, y: int, r_in: int, r_out_max: int, max_qubits: int = MAX_QUBITS
) -> list[float]:
    """Marked probability after ``0..r_out_max`` outer iterations (one state evolution)."""
    layout = RegisterLayout.for_instance(inst, max_qubits)
    op = NestedOperator(inst, bias, k, y, r_in)
    s = op.prepare(initial_state(layout))
    out = [marked_probability(s, inst, y)]
    for _ in range(r_out_max):
        s = op.outer_iterate(s)
        out.append(marked_probability(s, inst, y))
    return out


def _basis_index(inst: KnapsackInstance, bits) -> tuple[int, ...]:
    weight = sum(w for w, b in zip(inst.weights, bits) if b)
    profit = sum(p for p, b in zip(inst.profits, bits) if b)
    return tuple(bits) + (inst.capacity - weight, profit)


def marked_probability(state: StateVector, inst: KnapsackInstance, y: int) -> float:
    """Probability mass on ``S_global(y)`` with consistent capacity/profit registers."""
    marked = enumerate_global_marked(inst, y)
    total = 0.0
    for bits in marked.bitstrings():
        total += float(np.sum(np.abs(state.amps[_basis_index(inst, bits)]) ** 2))
    return total


def item_probabilities(state: StateVector, inst: KnapsackInstance) -> dict[tuple[int, ...], float]:
    """Probability of each item bitstring at its consistent register values."""
    out = {}
    for idx in np.ndindex(*(2,) * inst.n):
        weight = sum(w for w, b in zip(inst.weights, idx) if b)
        if weight <= inst.capacity:
            out[idx] = float(np.sum(np.abs(state.amps[_basis_index(inst, idx)]) ** 2))
    return out


def phased_values(threshold: int, width: int) -> set[int]:
    """Run the oracle on every profit-register basis value; return those picking up a ``-1``."""
    layout = RegisterLayout(0, 1, width, 0)
    amps = np.zeros(layout.shape, dtype=np.complex128)
    amps[0, :, 0] = 1.0
    amps[0, :, 1] = -1.0
    before = StateVector(layout, amps)
    after = apply_threshold_oracle(before, threshold)
    sign = np.real(after.amps[0, :, 0] / before.amps[0, :, 0])
    return {int(v) for v in np.flatnonzero(sign < 0)}


def oracle_mismatches(max_width: int = 6) -> list[tuple[int, int]]:
    """Every ``(width, T)`` whose phased set differs from ``{p : p > T}``."""
    bad = []
    for width in range(1, max_width + 1):
        for t in range(1 << width):
            if phased_values(t, width) != set(range(t + 1, 1 << width)):
                bad.append((width, t))
    return bad


def tracking_deviation(
    inst: KnapsackInstance, bias: BiasConfig, k: int, y: int, r_in: int, r_out_max: int, cache=None
) -> float:
    """Largest gap between statevector and tracked marked probability over ``r_out = 0..r_out_max``."""
    cache = cache or SubspaceCache(inst, bias)
    ens = cache.nested(y, k, r_in)
    sim = nested_marked_trajectory(inst, bias, k, y, r_in, r_out_max)
    return max(abs(p - success_probability(ens, r)) for r, p in enumerate(sim))
