"""Exhaustive enumeration of weighted growth histories for small trees.

A history is the sequence of parent choices ``(c_2, ..., c_n)`` with nodes
labelled by insertion order.  Isomorphic shapes are kept apart because the
filtration is generated by the labelled history.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import exact, profile_poly
from .exact import Pmf
from .model import ModelParams, alpha
from .tree_sim import TreeState

MAX_N = 8


@dataclass(frozen=True)
class History:
    parent_choices: tuple
    probability: float
    depths: tuple          # D_1, ..., D_n
    path_lengths: tuple    # P_1, ..., P_n
    martingale: tuple      # S_1, ..., S_n
    internal_profile: tuple
    external_profile: tuple  # U_0(n), U_1(n), ...

    @property
    def n(self) -> int:
        return len(self.depths)

    @property
    def path_length(self) -> int:
        return self.path_lengths[-1]

    def ancestors(self, node: int) -> set:
        """Nodes on the path from the root to ``node`` (excluding ``node``)."""
        out = set()
        v = node
        while v != 1:
            v = self.parent_choices[v - 2]
            out.add(v)
        return out


def _check_n(n: int, cap: int = MAX_N) -> None:
    if not 1 <= n <= cap:
        raise ValueError(f"enumeration supports 1 <= n <= {cap}, got n = {n}")


def _children(params: ModelParams, outdeg: list):
    """Positive-weight parent choices with their weights."""
    for v, d in enumerate(outdeg, start=1):
        w = params.beta * d + params.m
        if w > 0:
            yield v, w


def _walk(params, n):
    """Depth-first over histories; yields (choices, probability, depths)."""
    stack = [((), 1.0, (0,), [0])]
    while stack:
        choices, prob, depths, outdeg = stack.pop()
        if len(depths) == n:
            yield choices, prob, depths
            continue
        total = alpha(params, len(depths))
        for v, w in _children(params, outdeg):
            deg = outdeg.copy()
            deg[v - 1] += 1
            deg.append(0)
            stack.append((choices + (v,), prob * w / total, depths + (depths[v - 1] + 1,), deg))


def _summarise(params, choices, prob, depths):
    paths = tuple(itertools.accumulate(depths))
    s = tuple(
        (p - exact.mean_path(params, k)) / (k - params.shift)
        for k, p in enumerate(paths, start=1)
    )
    height = max(depths)
    internal = [0] * (height + 1)
    for d in depths:
        internal[d] += 1
    external = [0.0] * (height + 2)
    for k in range(1, height + 2):
        x_k = internal[k] if k <= height else 0
        external[k] = params.beta * x_k + params.m * internal[k - 1]
    return History(choices, prob, depths, paths, s, tuple(internal), tuple(external))


def enumerate_histories(params: ModelParams, n: int) -> list[History]:
    """Every positive-probability history of length n, each exactly once."""
    _check_n(n)
    out = [_summarise(params, *h) for h in _walk(params, n)]
    out.sort(key=lambda h: h.parent_choices)
    return out


def _statistic(h: History, statistic: str):
    if statistic == "path_length":
        return h.path_length
    if statistic == "depth_of_last":
        return h.depths[-1]
    if statistic == "profile_vector":
        return h.internal_profile
    if statistic == "external_profile":
        # (U_1(n), U_2(n), ...) with trailing zeros dropped
        ext = list(h.external_profile[1:])
        while ext and ext[-1] == 0:
            ext.pop()
        return tuple(ext)
    raise ValueError(f"unknown statistic {statistic!r}")


def exact_distribution(params: ModelParams, n: int, statistic: str = "path_length") -> Pmf:
    """Exact law of a statistic of T_n.

    ``statistic`` is one of ``path_length``, ``depth_of_last``,
    ``profile_vector`` (internal profile) or ``external_profile``.
    """
    table: dict = {}
    for h in enumerate_histories(params, n):
        key = _statistic(h, statistic)
        table[key] = table.get(key, 0.0) + h.probability
    return Pmf.from_dict(table)


def _one_step(params: ModelParams, prefix: History):
    """The histories extending ``prefix`` by one insertion, with conditional probabilities."""
    outdeg = [0] * prefix.n
    for v in prefix.parent_choices:
        outdeg[v - 1] += 1
    total = alpha(params, prefix.n)
    for v, w in _children(params, outdeg):
        depths = prefix.depths + (prefix.depths[v - 1] + 1,)
        child = _summarise(params, prefix.parent_choices + (v,), prefix.probability * w / total, depths)
        yield w / total, child


def check_martingale_property(params: ModelParams, n: int) -> float:
    """max over prefixes h of |E[S_n | h] - S_{n-1}(h)|."""
    _check_n(n, 7)
    if n < 2:
        raise ValueError("n must be >= 2")
    worst = 0.0
    for prefix in enumerate_histories(params, n - 1):
        cond = sum(q * child.martingale[-1] for q, child in _one_step(params, prefix))
        worst = max(worst, abs(cond - prefix.martingale[-1]))
    return worst


def total_variation(p: Pmf, q: Pmf) -> float:
    a, b = p.as_dict(), q.as_dict()
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


def check_depth_bernoulli_law(params: ModelParams, n: int) -> float:
    """Total variation between the enumerated law of D_n and the Poisson-binomial."""
    _check_n(n)
    return total_variation(exact_distribution(params, n, "depth_of_last"), exact.depth_pmf(params, n))


def state_of(params: ModelParams, h: History) -> TreeState:
    return TreeState.from_parents(params, h.parent_choices)


def check_conditional_variance_identity(params: ModelParams, n: int) -> float:
    """max over prefixes of |alpha_n^2 (beta+m)^-2 E[X_n^2 | h] - RHS(h)|.

    The left side enumerates the n-th insertion directly; the right side is
    Var(D_n) + M''_{n-1}(1) + S_{n-1} - S_{n-1}^2 from the profile polynomial.
    """
    _check_n(n, 7)
    if n < 2:
        raise ValueError("n must be >= 2")
    scale = alpha(params, n) ** 2 / params.step ** 2
    var_d = exact.depth_variance(params, n)
    worst = 0.0
    for prefix in enumerate_histories(params, n - 1):
        s_prev = prefix.martingale[-1]
        lhs = scale * sum(q * (child.martingale[-1] - s_prev) ** 2
                          for q, child in _one_step(params, prefix))
        bundle = profile_poly.derivatives_at_one(state_of(params, prefix), params)
        rhs = var_d + bundle.Mpp1 + s_prev - s_prev ** 2
        worst = max(worst, abs(lhs - rhs))
    return worst


def check_profile_recursion(params: ModelParams, n: int, z: complex) -> float:
    """max over prefixes of |E[W_n(z) | h] - (alpha_{n-1} + beta + m z)/alpha_{n-1} W_{n-1}(z)|."""
    _check_n(n, 7)
    if n < 2:
        raise ValueError("n must be >= 2")
    a_prev = alpha(params, n - 1)
    factor = (a_prev + params.beta + params.m * z) / a_prev
    worst = 0.0
    for prefix in enumerate_histories(params, n - 1):
        w_prev = profile_poly.profile_polynomial(np.asarray(prefix.external_profile), z)
        cond = sum(q * profile_poly.profile_polynomial(np.asarray(child.external_profile), z)
                   for q, child in _one_step(params, prefix))
        worst = max(worst, abs(cond - factor * w_prev))
    return worst


def probability_mass(params: ModelParams, n: int) -> float:
    return sum(h.probability for h in enumerate_histories(params, n))


def ancestor_independence_deviation(params: ModelParams, n: int) -> float:
    """Largest gap between the joint law of (1{A_i,n}, 1{A_j,n}) and the product
    of Bernoulli(m/alpha_i), Bernoulli(m/alpha_j), over all i < j < n."""
    _check_n(n, 7)
    histories = enumerate_histories(params, n)
    anc = [h.ancestors(n) for h in histories]
    probs = np.array([h.probability for h in histories])
    worst = 0.0
    for i in range(1, n):
        for j in range(i + 1, n):
            pi = params.m / alpha(params, i)
            pj = params.m / alpha(params, j)
            for a, b in itertools.product((0, 1), repeat=2):
                mask = np.array([(i in s) == bool(a) and (j in s) == bool(b) for s in anc])
                joint = probs[mask].sum()
                product = (pi if a else 1 - pi) * (pj if b else 1 - pj)
                worst = max(worst, abs(joint - product))
    return worst
