"""Compiled kernels that run the growth process on the external profile only.

Given the current tree, the next node lands on level ``k`` with probability
``U_k / alpha``, and the profile then moves by ``U_k += beta, U_{k+1} += m``.
Depths, path lengths and the martingale are functions of this chain, so the
Monte Carlo experiments never need per-node bookkeeping.

Two equivalent samplers:

* integer ``beta``: a flat array of external slots, one entry per unit of
  weight holding the level it inserts into; O(1) per step.
* real ``beta``: a linear scan of the level weights; O(height) per step.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_LEVELS = 1024


@njit(cache=True, nogil=True)
def _setup(beta, m, n_max, slot_mode):
    if slot_mode:
        cap = int((beta + m) * n_max + m + 2)
        slots = np.empty(cap, np.int32)
        for j in range(int(m)):
            slots[j] = 1
    else:
        slots = np.empty(0, np.int32)
    U = np.zeros(_LEVELS)
    U[1] = m
    return slots, U


@njit(cache=True, nogil=True, inline="always")
def _draw(rng, beta, m, alpha, slots, U, slot_mode):
    """Sample the insertion level and update the chain; returns the level."""
    if slot_mode:
        a = int(alpha)
        idx = int(rng.random() * alpha)
        if idx >= a:
            idx = a - 1
        k = slots[idx]
        if beta < 0:
            slots[idx] = k + 1
            for j in range(int(m) - 1):
                slots[a + j] = k + 1
        else:
            b = int(beta)
            for j in range(b):
                slots[a + j] = k
            slots[a + b] = k + 1
    else:
        t = rng.random() * alpha
        k = 1
        acc = U[1]
        while acc <= t and k < _LEVELS - 2:
            k += 1
            acc += U[k]
        # Floating-point slack can overrun into empty levels; walk back.
        while U[k] <= 0.0 and k > 1:
            k -= 1
    U[k] += beta
    U[k + 1] += m
    return k


@njit(cache=True, nogil=True)
def chain_marks(rng, beta, m, n_max, marks, slot_mode):
    """Depth D_n and path length P_n at the sorted sizes ``marks``."""
    slots, U = _setup(beta, m, n_max, slot_mode)
    out_d = np.zeros(marks.shape[0], np.int64)
    out_p = np.zeros(marks.shape[0], np.int64)
    j = 0
    while j < marks.shape[0] and marks[j] == 1:
        j += 1
    alpha = m
    P = 0
    for n in range(2, n_max + 1):
        k = _draw(rng, beta, m, alpha, slots, U, slot_mode)
        alpha += beta + m
        P += k
        while j < marks.shape[0] and marks[j] == n:
            out_d[j] = k
            out_p[j] = P
            j += 1
    return out_d, out_p


@njit(cache=True, nogil=True)
def chain_profiles(rng, beta, m, n_max, marks, slot_mode):
    """External profile snapshots U_k(n) at the sorted sizes ``marks``."""
    slots, U = _setup(beta, m, n_max, slot_mode)
    out = np.zeros((marks.shape[0], _LEVELS))
    out_p = np.zeros(marks.shape[0], np.int64)
    j = 0
    while j < marks.shape[0] and marks[j] == 1:
        out[j, :] = U
        j += 1
    alpha = m
    P = 0
    for n in range(2, n_max + 1):
        k = _draw(rng, beta, m, alpha, slots, U, slot_mode)
        alpha += beta + m
        P += k
        while j < marks.shape[0] and marks[j] == n:
            out[j, :] = U
            out_p[j] = P
            j += 1
    return out, out_p


@njit(cache=True, nogil=True)
def chain_depths(rng, beta, m, n, replicas, slot_mode):
    """``replicas`` independent draws of D_n from one stream."""
    out = np.zeros(replicas, np.int64)
    for r in range(replicas):
        slots, U = _setup(beta, m, n, slot_mode)
        alpha = m
        k = 0
        for i in range(2, n + 1):
            k = _draw(rng, beta, m, alpha, slots, U, slot_mode)
            alpha += beta + m
        out[r] = k
    return out


@njit(cache=True, nogil=True)
def chain_diagnostics(rng, beta, m, n_max, mean_p, norm, s2, marks, c1_start,
                      c1_thresh, slot_mode):
    """Martingale-condition accumulators along one run.

    Returns arrays indexed like ``marks``:

    * ``cv``: running sum of E[X_i^2 | F_{i-1}] up to i = mark
    * ``l2``: running sum of X_i^4 / s_i^4 up to i = mark
    * ``S``: martingale value at the mark

    and ``c1[a] = sum_{i >= c1_start[a]} X_i^2 1{|X_i| >= c1_thresh[a]}``.
    The conditional variance uses E[X_i^2 | F_{i-1}] =
    ((beta+m)/alpha_i)^2 Var(D_i | F_{i-1}) with the conditional moments of
    D_i read from running sums of k U_k and k^2 U_k.
    """
    slots, U = _setup(beta, m, n_max, slot_mode)
    nm = marks.shape[0]
    out_cv = np.zeros(nm)
    out_l2 = np.zeros(nm)
    out_s = np.zeros(nm)
    c1 = np.zeros(c1_start.shape[0])
    j = 0
    while j < nm and marks[j] == 1:
        j += 1
    alpha = m
    step = beta + m
    sum1 = m * 1.0  # sum_k k U_k
    sum2 = m * 1.0  # sum_k k^2 U_k
    P = 0
    s_prev = 0.0
    cv = 0.0
    l2 = 0.0
    for n in range(2, n_max + 1):
        mean_d = sum1 / alpha
        var_cond = sum2 / alpha - mean_d * mean_d
        if var_cond < 0.0:
            var_cond = 0.0
        k = _draw(rng, beta, m, alpha, slots, U, slot_mode)
        sum1 += beta * k + m * (k + 1)
        sum2 += beta * k * k + m * (k + 1) * (k + 1)
        alpha += step
        g = step / alpha
        cv += g * g * var_cond
        P += k
        s = (P - mean_p[n]) / norm[n]
        x = s - s_prev
        s_prev = s
        x2 = x * x
        l2 += x2 * x2 / (s2[n] * s2[n])
        for a in range(c1_start.shape[0]):
            if n >= c1_start[a] and abs(x) >= c1_thresh[a]:
                c1[a] += x2
        while j < nm and marks[j] == n:
            out_cv[j] = cv
            out_l2[j] = l2
            out_s[j] = s
            j += 1
    return out_cv, out_l2, out_s, c1
