"""Hot loops: marked-prefix enumeration and QTG step-factor products.

Each kernel has a numba implementation and a pure-numpy one. The numba path
is used when numba imports cleanly and ``NESTEDAA_DISABLE_NUMBA`` is unset
(or set to ``0``/``false``). Both paths return identical arrays; the test
suite runs every kernel check against both.

Bitstrings are packed into ``uint64`` codes with item 0 in the most
significant position, so numeric order of codes is lexicographic order of
bitstrings and the depth-``k`` prefix of an ``n``-bit code is ``code >> (n-k)``.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    flag = os.environ.get("NESTEDAA_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()

MAX_CODE_BITS = 63


def bound_orders(weights: np.ndarray, profits: np.ndarray, depth: int) -> np.ndarray:
    """Row ``d`` lists items ``d..depth-1`` by decreasing profit density.

    Unused tail entries are ``-1``. Ties keep the lower index first.
    """
    order = np.full((depth + 1, max(depth, 1)), -1, dtype=np.int64)
    dens = profits[:depth] / weights[:depth]
    for d in range(depth):
        idx = np.arange(d, depth)
        srt = idx[np.lexsort((idx, -dens[d:depth]))]
        order[d, : depth - d] = srt
    return order


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _fractional_bound_np(rem_cap, level, order, weights, profits):
    """Vectorised fractional-knapsack bound over items ``level..depth-1``."""
    row = order[level]
    row = row[row >= 0]
    if row.size == 0:
        return np.zeros(rem_cap.shape, dtype=np.float64)
    w = weights[row].astype(np.float64)
    p = profits[row].astype(np.float64)
    cw = np.concatenate(([0.0], np.cumsum(w)))
    cp = np.concatenate(([0.0], np.cumsum(p)))
    # number of whole items that fit in density order
    j = np.searchsorted(cw, rem_cap, side="right") - 1
    bound = cp[j]
    partial = j < row.size
    jj = j[partial]
    bound[partial] += (rem_cap[partial] - cw[jj]) * p[jj] / w[jj]
    return bound


def _enumerate_np(weights, profits, capacity, depth, threshold, order, max_states):
    codes = np.zeros(1, dtype=np.uint64)
    wsum = np.zeros(1, dtype=np.int64)
    psum = np.zeros(1, dtype=np.int64)
    frontier_limit = 8 * max_states
    for d in range(depth):
        w_d = weights[d]
        p_d = profits[d]
        take = wsum + w_d <= capacity
        codes = np.concatenate((codes << np.uint64(1), (codes[take] << np.uint64(1)) | np.uint64(1)))
        wsum = np.concatenate((wsum, wsum[take] + w_d))
        psum = np.concatenate((psum, psum[take] + p_d))
        bound = _fractional_bound_np((capacity - wsum).astype(np.float64), d + 1, order, weights, profits)
        keep = np.floor(psum + bound + 1e-9) > threshold
        codes, wsum, psum = codes[keep], wsum[keep], psum[keep]
        if codes.size > frontier_limit:
            return codes[:0], wsum[:0], psum[:0], -1
    keep = psum > threshold
    codes, wsum, psum = codes[keep], wsum[keep], psum[keep]
    if codes.size > max_states:
        return codes[:0], wsum[:0], psum[:0], -1
    srt = np.argsort(codes, kind="stable")
    return codes[srt], wsum[srt], psum[srt], codes.size


def _step_product_np(codes, nbits, start, stop, weights, capacity, ref, a_match, a_flip):
    out = np.ones(codes.size, dtype=np.float64)
    wsum = np.zeros(codes.size, dtype=np.int64)
    for i in range(stop):
        bit = ((codes >> np.uint64(nbits - 1 - i)) & np.uint64(1)).astype(np.int64)
        if i >= start:
            fits = wsum + weights[i] <= capacity
            fit_factor = np.where(bit == ref[i], a_match, a_flip)
            nofit_factor = np.where(bit == 0, 1.0, 0.0)
            out *= np.where(fits, fit_factor, nofit_factor)
        wsum += weights[i] * bit
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


def _enumerate_loop(weights, profits, capacity, depth, threshold, order, max_states):
    size = 1024
    codes = np.empty(size, dtype=np.uint64)
    wout = np.empty(size, dtype=np.int64)
    pout = np.empty(size, dtype=np.int64)
    count = 0
    # explicit DFS stack; child 0 is pushed last so it is expanded first
    st_level = np.empty(2 * depth + 2, dtype=np.int64)
    st_code = np.empty(2 * depth + 2, dtype=np.uint64)
    st_w = np.empty(2 * depth + 2, dtype=np.int64)
    st_p = np.empty(2 * depth + 2, dtype=np.int64)
    top = 0
    st_level[0] = 0
    st_code[0] = 0
    st_w[0] = 0
    st_p[0] = 0
    top = 1
    while top > 0:
        top -= 1
        level = st_level[top]
        code = st_code[top]
        w = st_w[top]
        p = st_p[top]
        # fractional bound on the remaining prefix items
        rem = capacity - w
        bound = 0.0
        for t in range(depth - level):
            item = order[level, t]
            if weights[item] <= rem:
                rem -= weights[item]
                bound += profits[item]
            else:
                bound += rem * profits[item] / weights[item]
                break
        if np.floor(p + bound + 1e-9) <= threshold:
            continue
        if level == depth:
            if count >= max_states:
                return codes[:0], wout[:0], pout[:0], -1
            if count == size:
                size *= 2
                c2 = np.empty(size, dtype=np.uint64)
                w2 = np.empty(size, dtype=np.int64)
                p2 = np.empty(size, dtype=np.int64)
                c2[:count] = codes[:count]
                w2[:count] = wout[:count]
                p2[:count] = pout[:count]
                codes, wout, pout = c2, w2, p2
            codes[count] = code
            wout[count] = w
            pout[count] = p
            count += 1
            continue
        child = code << np.uint64(1)
        if w + weights[level] <= capacity:
            st_level[top] = level + 1
            st_code[top] = child | np.uint64(1)
            st_w[top] = w + weights[level]
            st_p[top] = p + profits[level]
            top += 1
        st_level[top] = level + 1
        st_code[top] = child
        st_w[top] = w
        st_p[top] = p
        top += 1
    return codes[:count].copy(), wout[:count].copy(), pout[:count].copy(), count


def _step_product_loop(codes, nbits, start, stop, weights, capacity, ref, a_match, a_flip):
    out = np.empty(codes.size, dtype=np.float64)
    for s in range(codes.size):
        code = codes[s]
        w = 0
        prod = 1.0
        for i in range(stop):
            bit = (code >> np.uint64(nbits - 1 - i)) & np.uint64(1)
            if i >= start:
                if w + weights[i] <= capacity:
                    if bit == ref[i]:
                        prod *= a_match
                    else:
                        prod *= a_flip
                elif bit == 1:
                    prod = 0.0
            if bit == 1:
                w += weights[i]
        out[s] = prod
    return out


if HAVE_NUMBA:
    _enumerate_nb = numba.njit(cache=True, nogil=True)(_enumerate_loop)
    _step_product_nb = numba.njit(cache=True, nogil=True)(_step_product_loop)
else:  # pragma: no cover
    _enumerate_nb = _enumerate_loop
    _step_product_nb = _step_product_loop

BACKENDS = {
    "numpy": (_enumerate_np, _step_product_np),
    "numba": (_enumerate_nb, _step_product_nb),
}


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def enumerate_prefixes(weights, profits, capacity, depth, threshold, max_states, backend=None):
    """All ``x`` in ``{0,1}^depth`` with prefix weight ``<= capacity`` and prefix profit ``> threshold``.

    Returns ``(codes, weights, profits, count)``; ``count == -1`` signals that
    ``max_states`` was exceeded.
    """
    w = np.ascontiguousarray(weights, dtype=np.int64)
    p = np.ascontiguousarray(profits, dtype=np.int64)
    order = bound_orders(w, p, depth)
    fn = BACKENDS[backend or backend_name()][0]
    return fn(w, p, np.int64(capacity), int(depth), np.int64(threshold), order, int(max_states))


def step_product(codes, nbits, start, stop, weights, capacity, ref, a_match, a_flip, backend=None):
    """Product of QTG step factors over items ``start..stop-1`` for each code."""
    fn = BACKENDS[backend or backend_name()][1]
    return fn(
        np.ascontiguousarray(codes, dtype=np.uint64),
        int(nbits),
        int(start),
        int(stop),
        np.ascontiguousarray(weights, dtype=np.int64),
        np.int64(capacity),
        np.ascontiguousarray(ref, dtype=np.uint64),
        float(a_match),
        float(a_flip),
    )
