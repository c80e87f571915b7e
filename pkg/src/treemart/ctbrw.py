"""Continuous-time branching random walk embedding of the tree process.

Individuals sit at integer positions, die at unit rate, and are replaced by
offspring: ``beta + 1`` at the same position and one at ``x + 1`` when
``beta >= 0, m = 1``; ``m`` at ``x + 1`` when ``beta = -1``.  At the n-th
death time the occupancy ``rho(k)`` matches the external profile
``U_{k+1}(n+1)`` in distribution.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import oracle
from .model import ModelParams, alpha
from .tree_sim import ReplicaSeed


class InsufficientReplicas(ValueError):
    pass


@dataclass
class CTState:
    occupancy: Counter
    alive_total: int
    death_times: list = field(default_factory=list)
    clock: float = 0.0

    def occupancy_vector(self) -> tuple:
        """(rho(0), rho(1), ...) up to the highest occupied position."""
        if not self.occupancy:
            return ()
        top = max(k for k, c in self.occupancy.items() if c > 0)
        return tuple(self.occupancy.get(k, 0) for k in range(top + 1))

    @property
    def height(self) -> int:
        return max(k for k, c in self.occupancy.items() if c > 0)


def _require_integer(params: ModelParams) -> None:
    if not params.integer_beta:
        raise ValueError(f"the embedding needs integer beta, got {params.beta}")


def initial_count(params: ModelParams) -> int:
    return params.m if params.beta == -1 else 1


def simulate(params: ModelParams, n_deaths: int, seed=0) -> CTState:
    """Run the embedding until ``n_deaths`` deaths.

    ``seed`` is an int, a :class:`ReplicaSeed` or a ``numpy`` Generator.
    """
    _require_integer(params)
    if n_deaths < 0:
        raise ValueError("n_deaths must be non-negative")
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = (seed if isinstance(seed, ReplicaSeed) else ReplicaSeed(int(seed))).generator()

    beta, m = int(params.beta), params.m
    positions = [0] * initial_count(params)
    clock = 0.0
    taus = []
    uniforms = rng.random(2 * n_deaths)
    for i in range(n_deaths):
        alive = len(positions)
        clock += -math.log1p(-uniforms[2 * i]) / alive
        taus.append(clock)
        j = int(uniforms[2 * i + 1] * alive)
        x = positions[j]
        if beta == -1:
            positions[j] = x + 1
            positions.extend([x + 1] * (m - 1))
        else:
            positions.extend([x] * beta)
            positions.append(x + 1)
        assert len(positions) == alpha(params, i + 2)
    return CTState(Counter(positions), len(positions), taus, clock)


def exact_occupancy_law(params: ModelParams, n_deaths: int):
    """Law of (U_{k+1}(n+1))_k from the enumeration oracle, as a dict."""
    return oracle.exact_distribution(params, n_deaths + 1, "external_profile").as_dict()


def coupling_statistic(params: ModelParams, n: int, replicas: int, seed: int = 0) -> float:
    """Chi-square p-value of the simulated occupancy after ``n`` deaths against
    the exact external-profile law.  Cells with expected count below 5 are pooled."""
    _require_integer(params)
    if n > 6:
        raise ValueError("n <= 6 keeps the state space enumerable")
    law = exact_occupancy_law(params, n)
    rng = ReplicaSeed(seed).generator()
    counts = Counter(simulate(params, n, rng).occupancy_vector() for _ in range(replicas))
    unknown = set(counts) - set(law)
    if unknown:
        return 0.0
    keys = sorted(law, key=lambda k: -law[k])
    expected = np.array([law[k] * replicas for k in keys])
    observed = np.array([counts.get(k, 0) for k in keys], dtype=float)
    big = expected >= 5
    if not big.any():
        raise InsufficientReplicas("no cell reaches an expected count of 5")
    exp_cells = list(expected[big])
    obs_cells = list(observed[big])
    if (~big).any():
        exp_cells.append(expected[~big].sum())
        obs_cells.append(observed[~big].sum())
        if exp_cells[-1] < 5:
            # fold the pooled remainder into the smallest large cell
            exp_cells[-2] += exp_cells.pop()
            obs_cells[-2] += obs_cells.pop()
    if len(exp_cells) < 2:
        return 1.0
    return float(stats.chisquare(obs_cells, exp_cells).pvalue)


def scaled_waiting_times(params: ModelParams, k: int, replicas: int, seed: int = 0) -> np.ndarray:
    """k-th inter-death time times the alive count just before it (Exp(1) in law)."""
    rng = ReplicaSeed(seed).generator()
    out = np.empty(replicas)
    pre = alpha(params, k)  # alive before the k-th death
    for r in range(replicas):
        st = simulate(params, k, rng)
        gap = st.death_times[-1] - (st.death_times[-2] if k > 1 else 0.0)
        out[r] = gap * pre
    return out


def skeleton_correlation(params: ModelParams, n: int, replicas: int, seed: int = 0) -> float:
    """Sample correlation between tau_n and the occupancy height after n deaths."""
    rng = ReplicaSeed(seed).generator()
    taus = np.empty(replicas)
    heights = np.empty(replicas)
    for r in range(replicas):
        st = simulate(params, n, rng)
        taus[r] = st.death_times[-1]
        heights[r] = st.height
    if heights.std() == 0 or taus.std() == 0:
        return 0.0
    return float(np.corrcoef(taus, heights)[0, 1])
