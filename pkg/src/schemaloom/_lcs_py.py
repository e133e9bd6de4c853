"""Pure-Python LCS-length kernel; fallback when the compiled one is absent."""

from __future__ import annotations


def lcs_length_ids(a, b) -> int:
    """LCS length between two sequences of token ids (row-rolling DP)."""
    a = list(a)
    b = list(b)
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ai in a:
        curr = [0]
        append = curr.append
        for j, bj in enumerate(b):
            if ai == bj:
                append(prev[j] + 1)
            else:
                left = curr[j]
                up = prev[j + 1]
                append(left if left >= up else up)
        prev = curr
    return prev[-1]
