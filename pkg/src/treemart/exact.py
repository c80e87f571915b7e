"""Exact and asymptotic moments of the insertion depth and the path length.

The depth ``D_n`` of the n-th node is a sum of independent Bernoulli
variables with success probabilities ``m / alpha_i``, ``i = 1, ..., n-1``.
Everything here is built on that representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .model import ModelParams, alpha, digamma, trigamma

DEPTH_PMF_CAP = 10_000
_PMF_FLOOR = 1e-18


@dataclass(frozen=True)
class Pmf:
    """Finite probability mass function with sorted, distinct support."""

    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs differ in length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support values must be distinct")
        if np.any(self.probs < 0):
            raise ValueError("negative probability")
        total = float(np.sum(self.probs))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}")

    @classmethod
    def from_dict(cls, table: dict) -> "Pmf":
        keys = sorted(table)
        return cls(tuple(keys), np.array([table[k] for k in keys], dtype=float))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs.tolist()))

    def mean(self) -> float:
        return float(np.dot(np.asarray(self.support, dtype=float), self.probs))

    def variance(self) -> float:
        x = np.asarray(self.support, dtype=float)
        mu = np.dot(x, self.probs)
        return float(np.dot((x - mu) ** 2, self.probs))

    def moment(self, p: float, central: bool = False) -> float:
        x = np.asarray(self.support, dtype=float)
        if central:
            x = x - np.dot(x, self.probs)
        return float(np.dot(np.abs(x) ** p, self.probs))


@dataclass(frozen=True)
class MomentTable:
    n: int
    depth_mean: float
    depth_var: float
    path_mean: float
    path_var: float


def _alphas(params: ModelParams, upto: int) -> np.ndarray:
    """alpha_1, ..., alpha_upto."""
    i = np.arange(1, upto + 1, dtype=float)
    return params.step * i - params.beta


def bernoulli_probs(params: ModelParams, n: int) -> np.ndarray:
    """Success probabilities m / alpha_i of the n-1 ancestor indicators of node n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return params.m / _alphas(params, n - 1)


def depth_mean(params: ModelParams, n: int) -> float:
    return math.fsum(bernoulli_probs(params, n))


def depth_variance(params: ModelParams, n: int) -> float:
    p = bernoulli_probs(params, n)
    return math.fsum(p * (1.0 - p))


def depth_pmf(params: ModelParams, n: int, cap: int = DEPTH_PMF_CAP) -> Pmf:
    """Poisson-binomial law of D_n by convolution over the Bernoulli factors."""
    if n > cap:
        raise ValueError(f"n = {n} exceeds the depth_pmf cap {cap}")
    probs = bernoulli_probs(params, n)
    pmf = np.ones(1)
    offset = 0  # support value of pmf[0]
    for p in probs:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] += pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
        lo, hi = 0, len(pmf)
        while lo < hi - 1 and pmf[lo] < _PMF_FLOOR:
            lo += 1
        while hi - 1 > lo and pmf[hi - 1] < _PMF_FLOOR:
            hi -= 1
        offset += lo
        pmf = pmf[lo:hi]
    pmf = pmf / pmf.sum()
    keep = pmf > 0
    support = tuple(int(k) for k in np.arange(offset, offset + len(pmf))[keep])
    return Pmf(support, pmf[keep])


def mean_path(params: ModelParams, n: int) -> float:
    """E[P_n] from the closed form with the harmonic-type sum of 1/alpha_i."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0.0
    harmonic = math.fsum(1.0 / _alphas(params, n - 1))
    m, step = params.m, params.step
    return m * alpha(params, n) / step * harmonic - m * (n - 1) / step


def external_path_mean(params: ModelParams, n: int) -> float:
    """mu_n = E[E_n] = (beta + m) E[P_n] + n m."""
    return params.step * mean_path(params, n) + n * params.m


def var_path(params: ModelParams, n: int) -> float:
    """Var(P_n) via the single-sum representation (compensated summation)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = bernoulli_probs(params, n)
    var_d = np.concatenate(([0.0], np.cumsum(p * (1.0 - p))))  # Var(D_1..D_n)
    i = np.arange(1, n + 1, dtype=float)
    c = params.shift
    terms = var_d / ((i - c) * (i - c + 1.0))
    return (n - c) * (n + params.theta) * math.fsum(terms)


def moment_table(params: ModelParams, n: int) -> MomentTable:
    return MomentTable(
        n=n,
        depth_mean=depth_mean(params, n),
        depth_var=depth_variance(params, n),
        path_mean=mean_path(params, n),
        path_var=var_path(params, n),
    )


# -- arrays over a whole trajectory -----------------------------------------


@lru_cache(maxsize=16)
def _arrays(params: ModelParams, upto: int):
    """Index-aligned arrays for k = 0..upto: E[D_k], Var(D_k), E[P_k], Var(P_k).

    Entry 0 is zero by convention (empty tree).
    """
    a = _alphas(params, max(upto, 1))
    p = params.m / a
    depth_mu = np.zeros(upto + 1)
    depth_var = np.zeros(upto + 1)
    if upto >= 2:
        depth_mu[2:] = np.cumsum(p[: upto - 1])
        depth_var[2:] = np.cumsum((p * (1.0 - p))[: upto - 1])
    k = np.arange(upto + 1, dtype=float)
    c = params.shift
    path_mu = np.zeros(upto + 1)
    if upto >= 2:
        inv = np.concatenate(([0.0, 0.0], np.cumsum(1.0 / a[: upto - 1])))
        path_mu[2:] = (params.m * (params.step * k[2:] - params.beta) / params.step * inv[2:]
                       - params.m * (k[2:] - 1.0) / params.step)
    path_var = np.zeros(upto + 1)
    if upto >= 1:
        terms = depth_var[1:] / ((k[1:] - c) * (k[1:] - c + 1.0))
        path_var[1:] = (k[1:] - c) * (k[1:] + params.theta) * np.cumsum(terms)
    for arr in (depth_mu, depth_var, path_mu, path_var):
        arr.setflags(write=False)
    return depth_mu, depth_var, path_mu, path_var


def depth_mean_array(params: ModelParams, upto: int) -> np.ndarray:
    return _arrays(params, upto)[0]


def depth_var_array(params: ModelParams, upto: int) -> np.ndarray:
    return _arrays(params, upto)[1]


def path_mean_array(params: ModelParams, upto: int) -> np.ndarray:
    """E[P_k] for k = 0..upto (running sum, O(upto) total)."""
    return _arrays(params, upto)[2]


def path_var_array(params: ModelParams, upto: int) -> np.ndarray:
    return _arrays(params, upto)[3]


def normaliser_array(params: ModelParams, upto: int) -> np.ndarray:
    """k - beta/(beta+m) for k = 0..upto; entry 0 set to 1 so S_0 = 0 is safe."""
    k = np.arange(upto + 1, dtype=float) - params.shift
    k[0] = 1.0
    return k


def martingale_var_array(params: ModelParams, upto: int) -> np.ndarray:
    """Var(S_k) for k = 0..upto."""
    return path_var_array(params, upto) / normaliser_array(params, upto) ** 2


# -- asymptotics ------------------------------------------------------------


def mean_expansion(params: ModelParams) -> tuple[float, float]:
    """Coefficients (a, b) in E[P_n] = a n log n + b n + O(log n)."""
    theta = params.theta
    return theta, -theta * (1.0 + digamma(theta))


def variance_constant(params: ModelParams) -> float:
    """sigma^2 in Var(P_n) = sigma^2 n^2 + o(n^2); also Var(S) for the limit S."""
    theta = params.theta
    return 1.0 + theta * (1.0 - theta * trigamma(theta))


@njit(cache=True)
def _tail_second_moments(beta, m, n, horizon):
    # Compensated running sums of Var(D_i), the Var(P_i) series, and E[X_i^2].
    step = beta + m
    c = beta / step
    theta = m / step
    var_d = 0.0
    var_d_err = 0.0
    series = 0.0
    series_err = 0.0
    var_p_prev = 0.0  # Var(P_{i-1})
    total = 0.0
    total_err = 0.0
    last = 0.0
    for i in range(1, horizon + 1):
        fi = float(i)
        if i >= 2:
            a_prev = step * (fi - 1.0) - beta
            p = m / a_prev
            y = p * (1.0 - p) - var_d_err
            t = var_d + y
            var_d_err = (t - var_d) - y
            var_d = t
        a_i = step * fi - beta
        if i >= n:
            if i >= 2:
                norm_prev = fi - 1.0 - c
                var_s_prev = var_p_prev / (norm_prev * norm_prev)
            else:
                var_s_prev = 0.0
            g = step / a_i
            ex2 = g * g * (var_d - var_s_prev)
            last = ex2
            y = ex2 - total_err
            t = total + y
            total_err = (t - total) - y
            total = t
        y = var_d / ((fi - c) * (fi - c + 1.0)) - series_err
        t = series + y
        series_err = (t - series) - y
        series = t
        var_p_prev = (fi - c) * (fi + theta) * series
    return total, last


def increment_second_moment(params: ModelParams, i: int) -> float:
    """E[X_i^2] = ((beta+m)/alpha_i)^2 (Var(D_i) - Var(S_{i-1}))."""
    if i < 1:
        raise ValueError("i must be >= 1")
    if i == 1:
        return 0.0
    var_s_prev = var_path(params, i - 1) / (i - 1 - params.shift) ** 2
    g = params.step / alpha(params, i)
    return g * g * (depth_variance(params, i) - var_s_prev)


def s_squared(params: ModelParams, n: int, horizon: int) -> tuple[float, float]:
    """(sum_{i=n}^{horizon} E[X_i^2], theta log(n) / n)."""
    if not 2 <= n <= horizon:
        raise ValueError("need 2 <= n <= horizon")
    truncated, _ = _tail_second_moments(params.beta, float(params.m), n, horizon)
    return truncated, params.theta * math.log(n) / n


def tail_variance(params: ModelParams, n: int) -> float:
    """Untruncated s_n^2 = Var(S) - Var(S_{n-1}), using the exact limit variance."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return variance_constant(params)
    return variance_constant(params) - var_path(params, n - 1) / (n - 1 - params.shift) ** 2


def bernstein_depth_tail(params: ModelParams, n: int, t: float) -> float:
    """Upper bound on P(|D_n - E D_n| >= t)."""
    if not t > 0:
        raise ValueError("t must be positive")
    return 2.0 * math.exp(-t * t / (2.0 * depth_mean(params, n) + t))


def path_tail_bound(params: ModelParams, n: int, t: float) -> float:
    """Upper bound on P(|P_n - E P_n| >= t) via a union over the depths."""
    if not t > 0:
        raise ValueError("t must be positive")
    return 2.0 * n * math.exp(-t * t / (2.0 * n * n * depth_mean(params, n) + t * n))
