"""Numba kernels for ensemble evolution of the majority-rule dynamics.

States for a block of realizations live in a node-major (N, B) uint8 array so
the per-node neighbor gather vectorizes across realizations. Parallelism is
over nodes (step) or realizations (lift); every parallel iteration writes a
disjoint slice, so results are independent of the worker-thread count.
"""
from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange


def set_threads(n: int | None) -> int:
    """Cap worker threads used by the kernels; returns the effective count."""
    limit = numba.config.NUMBA_NUM_THREADS
    eff = limit if n is None else max(1, min(int(n), limit))
    numba.set_num_threads(eff)
    return eff


@njit(parallel=True, cache=True)
def majority_step_block(indptr, indices, degrees, x, u, eps, out):
    """One synchronous update for all realizations of a block.

    x, u, out: (N, B) node-major; x/out uint8, u float32 uniforms.
    """
    n_nodes, n_real = x.shape
    p_major = np.float32(1.0 - eps)
    p_minor = np.float32(eps)
    zero = np.float32(0.0)
    for i in prange(n_nodes):
        sigma = np.zeros(n_real, dtype=np.int16)
        for jj in range(indptr[i], indptr[i + 1]):
            xj = x[indices[jj]]
            for b in range(n_real):
                sigma[b] += xj[b]
        k = degrees[i]
        xi = x[i]
        ui = u[i]
        oi = out[i]
        for b in range(n_real):
            s = sigma[b]
            if 2 * s > k:
                p_act = p_major
            elif s >= 1:
                p_act = p_minor
            elif xi[b] == 1:
                p_act = p_minor
            else:
                p_act = zero
            oi[b] = 1 if ui[b] < p_act else 0
    return out


@njit(parallel=True, cache=True)
def lift_block(class_starts, class_nodes, m_counts, keys, out):
    """Activate, per realization and degree class, the m nodes with the
    smallest random keys (uniform sampling without replacement).

    m_counts: (B, C) int64; keys: (B, N) float32; out: (B, N) uint8, zeroed.
    """
    n_real, n_classes = m_counts.shape
    for b in prange(n_real):
        kb = keys[b]
        ob = out[b]
        for c in range(n_classes):
            lo = class_starts[c]
            hi = class_starts[c + 1]
            size = hi - lo
            m = m_counts[b, c]
            if m <= 0:
                continue
            if m >= size:
                for t in range(lo, hi):
                    ob[class_nodes[t]] = 1
                continue
            vals = np.empty(size, dtype=np.float32)
            for t in range(size):
                vals[t] = kb[class_nodes[lo + t]]
            kth = np.partition(vals, m - 1)[m - 1]
            cnt = 0
            for t in range(lo, hi):
                node = class_nodes[t]
                if kb[node] <= kth and cnt < m:
                    ob[node] = 1
                    cnt += 1
    return out
