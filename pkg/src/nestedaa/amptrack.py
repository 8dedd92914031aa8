"""Classical amplitude tracking for QTG preparation and amplitude amplification.

A QTG step on item ``i`` multiplies the amplitude of a branch by

* ``sqrt((b+1)/(b+2))`` if the item fits and ``x_i`` agrees with the reference,
* ``sqrt(1/(b+2))`` if the item fits and ``x_i`` disagrees,
* ``1`` if the item does not fit and ``x_i = 0`` (no split),
* ``0`` if the item does not fit and ``x_i = 1`` (infeasible).

Amplitude amplification with ``r`` Grover iterations on a marked subspace of
squared norm ``sin^2(theta)`` maps the marked component onto
``sin((2r+1) theta)`` times its normalised direction, so every marked
amplitude is scaled by ``sin((2r+1) theta) / sin(theta)``.  Amplitudes are
kept signed; probabilities always use squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .instances import KnapsackInstance
from .ksolve import MarkedSet, greedy_solution


class TrackingConsistencyError(RuntimeError):
    """A global marked state has no tracked prefix (marked-set extraction bug)."""


@dataclass(frozen=True)
class BiasConfig:
    bias_b: float
    reference: tuple[int, ...]

    def __post_init__(self):
        if self.bias_b < 0:
            raise ValueError("bias must be non-negative")

    @classmethod
    def greedy(cls, inst: KnapsackInstance, bias_b: float) -> "BiasConfig":
        return cls(float(bias_b), greedy_solution(inst).bits)

    @property
    def factors(self) -> tuple[float, float]:
        """(agreeing-branch factor, disagreeing-branch factor)."""
        b = self.bias_b
        return math.sqrt((b + 1.0) / (b + 2.0)), math.sqrt(1.0 / (b + 2.0))

    @property
    def ref_array(self) -> np.ndarray:
        return np.asarray(self.reference, dtype=np.uint64)


def theta_from_mass(mass: float) -> float:
    return math.asin(math.sqrt(min(max(mass, 0.0), 1.0)))


def rotation_gain(theta: float, r: int) -> float:
    """Factor applied to every marked amplitude by ``r`` Grover iterations."""
    s = math.sin(theta)
    if s == 0.0:
        return float(2 * r + 1)
    return math.sin((2 * r + 1) * theta) / s


@dataclass(frozen=True, eq=False)
class MarkedEnsemble:
    depth: int
    codes: np.ndarray
    amplitudes: np.ndarray
    theta: float
    profits: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    rotations: int = 0

    def __len__(self) -> int:
        return int(self.codes.size)

    @property
    def mass(self) -> float:
        return float(np.dot(self.amplitudes, self.amplitudes))


def qtg_step_factor(inst: KnapsackInstance, bias: BiasConfig, prefix_weight: int, i: int, x_i: int) -> float:
    a_match, a_flip = bias.factors
    if prefix_weight + inst.weights[i] <= inst.capacity:
        return a_match if x_i == bias.reference[i] else a_flip
    return 1.0 if x_i == 0 else 0.0


def partial_amplitude(inst: KnapsackInstance, bias: BiasConfig, x, k: int) -> float:
    if len(x) < k:
        raise ValueError("bitstring shorter than depth")
    amp = 1.0
    weight = 0
    for i in range(k):
        amp *= qtg_step_factor(inst, bias, weight, i, x[i])
        if amp == 0.0:
            return 0.0
        weight += inst.weights[i] * x[i]
    return amp


def prefix_amplitudes(inst: KnapsackInstance, bias: BiasConfig, codes: np.ndarray, depth: int, backend=None):
    a_match, a_flip = bias.factors
    return _kernels.step_product(
        codes, depth, 0, depth, inst.w, inst.capacity, bias.ref_array, a_match, a_flip, backend=backend
    )


def build_partial_ensemble(inst: KnapsackInstance, bias: BiasConfig, marked: MarkedSet, backend=None) -> MarkedEnsemble:
    """Attach QTG amplitudes to a marked set (any depth, including ``n``)."""
    amps = prefix_amplitudes(inst, bias, marked.codes, marked.depth, backend=backend)
    theta = theta_from_mass(float(np.dot(amps, amps)))
    return MarkedEnsemble(marked.depth, marked.codes, amps, theta, marked.profits, marked.weights)


build_ensemble = build_partial_ensemble


def apply_rotation(ens: MarkedEnsemble, r: int) -> MarkedEnsemble:
    """Track ``r`` Grover iterations; ``theta`` keeps its preparation value."""
    if r < 0:
        raise ValueError("rotation count must be non-negative")
    gain = rotation_gain(ens.theta, r)
    return MarkedEnsemble(
        ens.depth, ens.codes, ens.amplitudes * gain, ens.theta, ens.profits, ens.weights, ens.rotations + r
    )


def extend_ensemble(
    inst: KnapsackInstance, bias: BiasConfig, inner: MarkedEnsemble, global_marked: MarkedSet, backend=None
) -> MarkedEnsemble:
    """Push a depth-``k`` ensemble through the QTG on items ``k..n-1``."""
    n, k = inst.n, inner.depth
    if global_marked.depth != n:
        raise ValueError("global marked set must have depth n")
    codes = global_marked.codes
    prefixes = codes >> np.uint64(n - k)
    pos = np.searchsorted(inner.codes, prefixes)
    pos_c = np.minimum(pos, max(inner.codes.size - 1, 0))
    if codes.size and (inner.codes.size == 0 or np.any(inner.codes[pos_c] != prefixes)):
        raise TrackingConsistencyError(f"global marked state without a depth-{k} prefix in the inner ensemble")
    a_match, a_flip = bias.factors
    suffix = _kernels.step_product(
        codes, n, k, n, inst.w, inst.capacity, bias.ref_array, a_match, a_flip, backend=backend
    )
    amps = inner.amplitudes[pos_c] * suffix if codes.size else np.zeros(0)
    theta = theta_from_mass(float(np.dot(amps, amps)))
    return MarkedEnsemble(n, codes, amps, theta, global_marked.profits, global_marked.weights)


def success_probability(ens: MarkedEnsemble, r: int) -> float:
    return math.sin((2 * r + 1) * ens.theta) ** 2
