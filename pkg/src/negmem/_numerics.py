"""Compensated summation helpers."""
from __future__ import annotations

import numpy as np


def neumaier_cumsum(x) -> np.ndarray:
    """Running sums of a 1-D array with Neumaier compensation."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    s = 0.0
    c = 0.0
    for i, v in enumerate(x.tolist()):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


def compensated_rowsum(x) -> np.ndarray:
    """Compensated sum of each row of a 2-D array (1-D input gives a scalar).

    Pairwise reduction where every pairwise addition is an error-free
    TwoSum; the rounding errors are summed separately and added back at the
    end, giving roughly twice-working-precision accuracy.  Each row's result
    depends only on that row.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(compensated_rowsum(x[None, :])[0])
    s = x
    err = np.zeros(x.shape[0])
    while s.shape[1] > 1:
        if s.shape[1] % 2:
            s = np.concatenate([s, np.zeros((s.shape[0], 1))], axis=1)
        a = s[:, 0::2]
        b = s[:, 1::2]
        t = a + b
        bv = t - a
        err += ((a - (t - bv)) + (b - bv)).sum(axis=1)
        s = t
    if s.shape[1] == 0:
        return err
    return s[:, 0] + err
