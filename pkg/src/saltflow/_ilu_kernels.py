"""Numba kernels for ILU(0) factorization and triangular solves on CSR.

These are the innermost loops of the smoother; everything else in the
solver stack is plain numpy/scipy.  Rows must have sorted column
indices and a structurally present diagonal.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def ilu0_factorize(n, indptr, indices, data, diag_pos):
    """In-place ILU(0) (IKJ order, zero fill).

    ``data`` is overwritten with the combined L (unit diagonal, strictly
    lower part) and U factors on the original sparsity pattern.  Returns
    the row index of the first zero pivot, or -1 on success.
    """
    for i in range(n):
        r0 = indptr[i]
        r1 = indptr[i + 1]
        for kk in range(r0, r1):
            k = indices[kk]
            if k >= i:
                break
            akk = data[diag_pos[k]]
            if akk == 0.0:
                return k
            factor = data[kk] / akk
            data[kk] = factor
            # row_i -= factor * upper(row_k), restricted to row_i's pattern
            jj = diag_pos[k] + 1
            pos = kk + 1
            k_end = indptr[k + 1]
            while jj < k_end and pos < r1:
                j = indices[jj]
                cj = indices[pos]
                if cj < j:
                    pos += 1
                elif cj > j:
                    jj += 1
                else:
                    data[pos] -= factor * data[jj]
                    pos += 1
                    jj += 1
        if data[diag_pos[i]] == 0.0:
            return i
    return -1


@numba.njit(cache=True)
def ilu0_solve(n, indptr, indices, data, diag_pos, b, x):
    """Solve L U x = b with the factors produced by :func:`ilu0_factorize`."""
    for i in range(n):
        s = b[i]
        for kk in range(indptr[i], diag_pos[i]):
            s -= data[kk] * x[indices[kk]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for kk in range(diag_pos[i] + 1, indptr[i + 1]):
            s -= data[kk] * x[indices[kk]]
        x[i] = s / data[diag_pos[i]]


@numba.njit(cache=True)
def _diag_positions_kernel(indptr, indices, n, diag_pos):
    for i in range(n):
        lo = indptr[i]
        hi = indptr[i + 1]
        while lo < hi:
            mid = (lo + hi) // 2
            if indices[mid] < i:
                lo = mid + 1
            else:
                hi = mid
        if lo == indptr[i + 1] or indices[lo] != i:
            return i
        diag_pos[i] = lo
    return -1


def diagonal_positions(indptr, indices, n):
    """Position of each row's diagonal entry; raises if one is missing."""
    diag_pos = np.empty(n, dtype=np.int64)
    bad = _diag_positions_kernel(indptr, indices, n, diag_pos)
    if bad >= 0:
        raise ValueError(f"matrix lacks a structural diagonal entry in row {bad}")
    return diag_pos
