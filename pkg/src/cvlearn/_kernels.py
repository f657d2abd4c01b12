"""Compiled inner loops for resampled slice evaluation.

Sums are produced per fixed-size block and reduced by the caller in block
order, so the floating-point result does not depend on the thread count.
"""

import numpy as np
from numba import njit, prange

BLOCK = 1 << 15
LANES = 16


@njit(cache=True, parallel=True)
def _grid_block_sums(proj, idx, start, step, count, block):
    # sums[blk, k] = sum_i exp(2i (start + k step) proj[idx[i]]) over the block;
    # LANES samples advance together so the phase recurrence vectorises
    n = idx.shape[0]
    nblk = (n + block - 1) // block
    out = np.zeros((nblk, count), dtype=np.complex128)
    for blk in prange(nblk):
        lo = blk * block
        hi = min(lo + block, n)
        acc_re = np.zeros((count, LANES))
        acc_im = np.zeros((count, LANES))
        z_re = np.empty(LANES)
        z_im = np.empty(LANES)
        w_re = np.empty(LANES)
        w_im = np.empty(LANES)
        for base in range(lo, hi, LANES):
            m = min(LANES, hi - base)
            for j in range(LANES):
                if j < m:
                    p = 2.0 * proj[idx[base + j]]
                    z_re[j] = np.cos(start * p)
                    z_im[j] = np.sin(start * p)
                    w_re[j] = np.cos(step * p)
                    w_im[j] = np.sin(step * p)
                else:
                    z_re[j] = 0.0
                    z_im[j] = 0.0
                    w_re[j] = 0.0
                    w_im[j] = 0.0
            for k in range(count):
                for j in range(LANES):
                    acc_re[k, j] += z_re[j]
                    acc_im[k, j] += z_im[j]
                    t = z_re[j] * w_re[j] - z_im[j] * w_im[j]
                    z_im[j] = z_re[j] * w_im[j] + z_im[j] * w_re[j]
                    z_re[j] = t
        for k in range(count):
            s_re = 0.0
            s_im = 0.0
            for j in range(LANES):
                s_re += acc_re[k, j]
                s_im += acc_im[k, j]
            out[blk, k] = s_re + 1j * s_im
    return out


def grid_phase_sums(proj, idx, start, step, count):
    """Sum of ``exp(2i b proj[idx])`` for ``b = start + k*step``, k < count."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    proj = np.ascontiguousarray(proj, dtype=np.float64)
    blocks = _grid_block_sums(proj, idx, float(start), float(step), int(count), BLOCK)
    return blocks.sum(axis=0)


@njit(cache=True, parallel=True)
def _point_block_sums(proj, idx, block):
    n = idx.shape[0]
    nblk = (n + block - 1) // block
    out_re = np.zeros(nblk)
    out_im = np.zeros(nblk)
    for blk in prange(nblk):
        lo = blk * block
        hi = min(lo + block, n)
        s_re = 0.0
        s_im = 0.0
        for i in range(lo, hi):
            p = 2.0 * proj[idx[i]]
            s_re += np.cos(p)
            s_im += np.sin(p)
        out_re[blk] = s_re
        out_im[blk] = s_im
    return out_re, out_im


def point_phase_sum(proj, idx):
    """Sum of ``exp(2i proj[idx])``."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    proj = np.ascontiguousarray(proj, dtype=np.float64)
    re, im = _point_block_sums(proj, idx, BLOCK)
    return complex(re.sum(), im.sum())
