import os
import subprocess
import sys

import numpy as np
import pytest

from nestedaa import _kernels
from nestedaa.instances import generate_instance

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _cases():
    for n, s, i in [(8, 4, 1), (14, 4, 2), (18, 10, 7), (20, 2, 1)]:
        yield generate_instance(n, 100, "uncorrelated", s, i)


def test_bound_orders_rows():
    w = np.array([2, 4, 1, 3])
    p = np.array([4, 4, 3, 3])
    order = _kernels.bound_orders(w, p, 4)
    # densities 2, 1, 3, 1: ties keep the lower index
    assert list(order[0]) == [2, 0, 1, 3]
    assert list(order[2]) == [2, 3, -1, -1]
    assert (order[4] == -1).all()


@needs_numba
def test_enumeration_backends_agree():
    for inst in _cases():
        for depth in (inst.n // 2, inst.n):
            for thr in (-1, sum(inst.profits) // 3, sum(inst.profits) // 2):
                a = _kernels.enumerate_prefixes(inst.w[:depth], inst.p[:depth], inst.capacity, depth, thr, 1 << 22,
                                                backend="numpy")
                b = _kernels.enumerate_prefixes(inst.w[:depth], inst.p[:depth], inst.capacity, depth, thr, 1 << 22,
                                                backend="numba")
                assert a[3] == b[3]
                for x, y in zip(a[:3], b[:3]):
                    assert np.array_equal(x, y)


@needs_numba
def test_step_product_backends_agree(rng):
    for inst in _cases():
        n = inst.n
        codes = np.sort(rng.integers(0, 1 << n, 500).astype(np.uint64))
        ref = rng.integers(0, 2, n).astype(np.uint64)
        for start, stop in [(0, n), (0, n // 2), (n // 2, n)]:
            a = _kernels.step_product(codes, n, start, stop, inst.w, inst.capacity, ref, 0.8, 0.6, backend="numpy")
            b = _kernels.step_product(codes, n, start, stop, inst.w, inst.capacity, ref, 0.8, 0.6, backend="numba")
            assert np.array_equal(a, b)


def test_cap_signal(backend):
    inst = generate_instance(12, 100, "uncorrelated", 2, 2)
    out = _kernels.enumerate_prefixes(inst.w, inst.p, inst.capacity, inst.n, -1, 5, backend=backend)
    assert out[3] == -1


def test_environment_flag_disables_numba():
    env = dict(os.environ, NESTEDAA_DISABLE_NUMBA="1")
    code = "from nestedaa import _kernels; print(_kernels.backend_name())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["NESTEDAA_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("numba" if _kernels.HAVE_NUMBA else "numpy")
