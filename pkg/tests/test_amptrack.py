import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestedaa import qcheck
from nestedaa.amptrack import (
    BiasConfig,
    MarkedEnsemble,
    TrackingConsistencyError,
    apply_rotation,
    build_partial_ensemble,
    extend_ensemble,
    partial_amplitude,
    prefix_amplitudes,
    qtg_step_factor,
    rotation_gain,
    success_probability,
)
from nestedaa.instances import KnapsackInstance, generate_instance
from nestedaa.ksolve import (
    bits_to_code,
    enumerate_global_marked,
    enumerate_partial_marked,
    feasible_states,
    greedy_solution,
    optimal_solution,
)

from oracles import all_bitstrings, brute_marked, marked_theta, qtg_amplitude, random_instance


def _ens(amps, theta=None):
    amps = np.asarray(amps, dtype=float)
    codes = np.arange(amps.size, dtype=np.uint64)
    if theta is None:
        theta = math.asin(math.sqrt(float(amps @ amps)))
    z = np.zeros(amps.size, dtype=np.int64)
    return MarkedEnsemble(4, codes, amps, theta, z, z)


def test_step_factor_cases():
    inst = KnapsackInstance((3, 5), (1, 1), 6)
    bias = BiasConfig(2.0, (1, 0))
    assert qtg_step_factor(inst, bias, 0, 0, 1) == pytest.approx(math.sqrt(3 / 4))
    assert qtg_step_factor(inst, bias, 0, 0, 0) == pytest.approx(math.sqrt(1 / 4))
    # item 1 (w=5) after 3 units packed: does not fit
    assert qtg_step_factor(inst, bias, 3, 1, 0) == 1.0
    assert qtg_step_factor(inst, bias, 3, 1, 1) == 0.0


def test_unbiased_is_hadamard():
    inst = KnapsackInstance((1, 1), (1, 1), 5)
    bias = BiasConfig(0.0, (0, 1))
    for x in (0, 1):
        assert qtg_step_factor(inst, bias, 0, 0, x) == pytest.approx(1 / math.sqrt(2))


def test_negative_bias_rejected():
    with pytest.raises(ValueError):
        BiasConfig(-0.5, (0,))


def test_partial_amplitude_uniform_tree():
    inst = KnapsackInstance((1,) * 6, (1,) * 6, 6)
    bias = BiasConfig(0.0, (1,) * 6)
    for bits in all_bitstrings(6):
        assert partial_amplitude(inst, bias, bits, 4) == pytest.approx(2 ** -2)


def test_partial_amplitude_reference_path():
    inst = KnapsackInstance((1,) * 5, (1,) * 5, 5)
    b = 3.0
    ref = (1, 0, 1, 1, 0)
    assert partial_amplitude(inst, BiasConfig(b, ref), ref, 5) == pytest.approx(((b + 1) / (b + 2)) ** 2.5)
    with pytest.raises(ValueError):
        partial_amplitude(inst, BiasConfig(b, ref), ref[:2], 3)


def test_partial_normalisation_n4(rng):
    for _ in range(20):
        inst = random_instance(rng, 4)
        bias = BiasConfig(float(rng.choice([0, 1, 4])), tuple(int(v) for v in rng.integers(0, 2, 4)))
        for k in range(1, 5):
            total = sum(partial_amplitude(inst, bias, x, k) ** 2 for x in brute_marked(inst, -1, k))
            assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(st.integers(1, 9), st.integers(1, 9)), min_size=1, max_size=8),
    st.integers(0, 40),
    st.floats(0, 20),
    st.integers(0, 255),
)
def test_zero_amplitude_iff_infeasible(items, cap, b, ref_code):
    inst = KnapsackInstance(tuple(w for w, _ in items), tuple(p for _, p in items), cap)
    n = inst.n
    bias = BiasConfig(b, tuple((ref_code >> j) & 1 for j in range(n)))
    for bits in all_bitstrings(n):
        weight = sum(w for w, x in zip(inst.weights, bits) if x)
        amp = partial_amplitude(inst, bias, bits, n)
        assert (amp == 0.0) == (weight > cap)
        assert amp == pytest.approx(qtg_amplitude(inst, bias.reference, b, bits), abs=1e-15)


def test_prefix_amplitudes_vectorised(backend, rng):
    inst = random_instance(rng, 10)
    bias = BiasConfig.greedy(inst, 1.5)
    ms = enumerate_partial_marked(inst, -1, 7)
    got = prefix_amplitudes(inst, bias, ms.codes, 7, backend=backend)
    want = [partial_amplitude(inst, bias, bits, 7) for bits in ms.bitstrings()]
    assert np.allclose(got, want, rtol=0, atol=1e-15)


def test_empty_and_full_ensembles():
    inst = generate_instance(8, 30, "uncorrelated", 3, 2)
    bias = BiasConfig.greedy(inst, 1.0)
    y_star = optimal_solution(inst).value
    assert build_partial_ensemble(inst, bias, enumerate_global_marked(inst, y_star)).theta == 0.0
    full = build_partial_ensemble(inst, bias, enumerate_partial_marked(inst, -1, 5))
    assert full.theta == pytest.approx(math.pi / 2, abs=1e-7)


def test_partial_theta_vs_direct_sum():
    inst = generate_instance(10, 50, "uncorrelated", 3, 2)
    ref = greedy_solution(inst).bits
    y = greedy_solution(inst).value
    for b in (0.0, 1.0, 10.0):
        ens = build_partial_ensemble(inst, BiasConfig(b, ref), enumerate_partial_marked(inst, y, 5))
        assert ens.theta == pytest.approx(marked_theta(inst, ref, b, brute_marked(inst, y, 5)), abs=1e-12)
        assert ens.mass == pytest.approx(math.sin(ens.theta) ** 2, abs=1e-12)


def test_rotation_exact_grover_angle():
    ens = _ens([0.3, 0.4], theta=math.pi / 6)
    assert success_probability(ens, 1) == pytest.approx(1.0)
    rot = apply_rotation(ens, 1)
    assert rot.theta == ens.theta
    assert rot.mass == pytest.approx(1.0 * (0.25 / math.sin(math.pi / 6) ** 2))


def test_rotation_zero_is_identity():
    ens = _ens([0.5, 0.5, 0.1])
    assert np.allclose(apply_rotation(ens, 0).amplitudes, ens.amplitudes)
    full = _ens([1.0], theta=math.pi / 2)
    assert success_probability(full, 0) == pytest.approx(1.0)


def test_rotation_algebra(rng):
    amps = rng.uniform(0.01, 0.2, 12)
    ens = _ens(amps)
    for r in range(6):
        rot = apply_rotation(ens, r)
        ratio = rot.amplitudes / ens.amplitudes
        assert np.allclose(ratio, ratio[0])
        assert rot.mass == pytest.approx(math.sin((2 * r + 1) * ens.theta) ** 2, abs=1e-12)
        assert rot.rotations == r
    with pytest.raises(ValueError):
        apply_rotation(ens, -1)


def test_rotation_gain_at_zero_theta():
    assert rotation_gain(0.0, 3) == 7.0


def test_success_probability_edges():
    assert success_probability(_ens([], theta=0.0), 5) == 0.0
    for r in range(5):
        assert success_probability(_ens([1.0], theta=math.pi / 2), r) == pytest.approx(1.0)


def test_extend_identity_at_full_depth():
    inst = generate_instance(8, 30, "uncorrelated", 3, 2)
    bias = BiasConfig.greedy(inst, 1.0)
    y = greedy_solution(inst).value
    inner = build_partial_ensemble(inst, bias, enumerate_partial_marked(inst, y, inst.n))
    out = extend_ensemble(inst, bias, inner, enumerate_global_marked(inst, y))
    assert np.array_equal(out.amplitudes, inner.amplitudes)
    assert out.theta == pytest.approx(inner.theta, abs=1e-15)


def test_extend_forced_suffix():
    # item 0 fills the knapsack; the suffix items never fit, so their factor is 1
    inst = KnapsackInstance((5, 3, 4), (9, 1, 1), 5)
    bias = BiasConfig(2.0, (1, 0, 0))
    inner = build_partial_ensemble(inst, bias, enumerate_partial_marked(inst, 8, 1))
    glob = enumerate_global_marked(inst, 8)
    assert glob.bitstrings() == [(1, 0, 0)]
    out = extend_ensemble(inst, bias, inner, glob)
    assert out.amplitudes[0] == inner.amplitudes[list(inner.codes).index(1)]


def test_extend_matches_full_enumeration(backend):
    inst = generate_instance(8, 40, "uncorrelated", 3, 2)
    ref = greedy_solution(inst).bits
    y = greedy_solution(inst).value
    for b in (0.0, 2.0):
        bias = BiasConfig(b, ref)
        k = 4
        part = build_partial_ensemble(inst, bias, enumerate_partial_marked(inst, y, k), backend=backend)
        theta_k = marked_theta(inst, ref, b, brute_marked(inst, y, k))
        for r_in in range(4):
            out = extend_ensemble(inst, bias, apply_rotation(part, r_in), enumerate_global_marked(inst, y),
                                  backend=backend)
            gain = math.sin((2 * r_in + 1) * theta_k) / math.sin(theta_k)
            states = brute_marked(inst, y)
            want = {bits_to_code(s): qtg_amplitude(inst, ref, b, s) * gain for s in states}
            assert len(out) == len(states)
            for code, amp in zip(out.codes, out.amplitudes):
                assert amp == pytest.approx(want[int(code)], abs=1e-12)


def test_extend_missing_prefix_raises():
    inst = generate_instance(6, 30, "uncorrelated", 3, 2)
    bias = BiasConfig.greedy(inst, 1.0)
    glob = enumerate_global_marked(inst, 0)
    inner = build_partial_ensemble(inst, bias, enumerate_partial_marked(inst, optimal_solution(inst).value, 3))
    with pytest.raises(TrackingConsistencyError):
        extend_ensemble(inst, bias, inner, glob)


def test_extend_requires_full_depth_marked_set():
    inst = generate_instance(6, 30, "uncorrelated", 3, 2)
    bias = BiasConfig.greedy(inst, 1.0)
    inner = build_partial_ensemble(inst, bias, enumerate_partial_marked(inst, 0, 3))
    with pytest.raises(ValueError):
        extend_ensemble(inst, bias, inner, enumerate_partial_marked(inst, 0, 4))


@pytest.mark.parametrize("b", [0.0, 1.0, 6.0])
def test_normalisation_random_instances(rng, b, backend):
    for _ in range(8):
        n = int(rng.integers(6, 15))
        inst = random_instance(rng, n, r=30)
        bias = BiasConfig.greedy(inst, b)
        states = feasible_states(inst)
        amps = prefix_amplitudes(inst, bias, states.codes, n, backend=backend)
        assert float(amps @ amps) == pytest.approx(1.0, abs=1e-12)


def test_probabilities_match_statevector_n3():
    inst = generate_instance(3, 8, "uncorrelated", 3, 2)
    y_star = optimal_solution(inst).value
    for b in (0.0, 1.0, 3.0):
        bias = BiasConfig.greedy(inst, b)
        for y in range(-1, y_star):
            ens = build_partial_ensemble(inst, bias, enumerate_global_marked(inst, y))
            state = qcheck.run_nested_operator(inst, bias, 3, y, 0, 0)
            for r in range(3):
                sim = qcheck.nested_marked_trajectory(inst, bias, 3, y, 0, r)[-1]
                assert success_probability(ens, r) == pytest.approx(sim, abs=1e-12)
            assert qcheck.marked_probability(state, inst, y) == pytest.approx(ens.mass, abs=1e-12)
