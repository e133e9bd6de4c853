# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled LCS-length kernel over int32 token-id arrays.

The O(n*m) dynamic program dominates schema comparison on large documents;
this mirrors schemaloom._lcs_py exactly and is selected at import when built.
"""

import numpy as np

cimport numpy as cnp


def lcs_length_ids(cnp.int32_t[::1] a, cnp.int32_t[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    cdef cnp.ndarray[cnp.int32_t, ndim=1] prev_np = np.zeros(m + 1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] curr_np = np.zeros(m + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] prev = prev_np
    cdef cnp.int32_t[::1] curr = curr_np
    cdef cnp.int32_t[::1] tmp
    cdef Py_ssize_t i, j
    cdef cnp.int32_t ai
    for i in range(n):
        ai = a[i]
        for j in range(m):
            if ai == b[j]:
                curr[j + 1] = prev[j] + 1
            elif curr[j] >= prev[j + 1]:
                curr[j + 1] = curr[j]
            else:
                curr[j + 1] = prev[j + 1]
        tmp = prev
        prev = curr
        curr = tmp
    return prev[m]
