"""Sequential growth of linear recursive trees.

Parents are drawn with probability proportional to ``beta * outdegree + m``
through a Fenwick (binary indexed) tree over the per-node weights, so one
insertion costs O(log n).  Saturated m-ary nodes keep a zero weight in the
index and are never returned by the search.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import exact
from .model import ModelParams, alpha

MAX_NODES = 10_000_000
LEAN_THRESHOLD = 100_000
_LEVELS0 = 64


class ResourceLimit(ValueError):
    pass


@dataclass(frozen=True)
class ReplicaSeed:
    """Deterministic substream ``PCG64(SeedSequence(master, spawn_key=(index,)))``."""

    master_seed: int
    replica_index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.replica_index,))
        return np.random.Generator(np.random.PCG64(seq))


# -- Fenwick kernels ---------------------------------------------------------


@njit(cache=True, nogil=True)
def _fen_add(fen, i, delta):
    size = fen.shape[0] - 1
    while i <= size:
        fen[i] += delta
        i += i & (-i)


@njit(cache=True, nogil=True)
def _fen_prefix(fen, i):
    s = 0.0
    while i > 0:
        s += fen[i]
        i -= i & (-i)
    return s


@njit(cache=True, nogil=True)
def _fen_search(fen, target, top_bit):
    """Smallest index whose prefix sum strictly exceeds ``target``."""
    size = fen.shape[0] - 1
    pos = 0
    step = top_bit
    while step > 0:
        nxt = pos + step
        if nxt <= size and fen[nxt] <= target:
            pos = nxt
            target -= fen[nxt]
        step >>= 1
    return pos + 1


@njit(cache=True, nogil=True)
def _pick_parent(fen, outdeg, n, beta, m, total, u):
    top = 1
    while top * 2 <= fen.shape[0] - 1:
        top *= 2
    v = _fen_search(fen, u * total, top)
    # Rounding can push the target onto the zero-weight tail; step back.
    if v > n:
        v = n
    while v > 1 and beta * outdeg[v] + m <= 0.0:
        v -= 1
    return v


@njit(cache=True, nogil=True)
def _grow_kernel(rng, beta, m, n_target, parent, depth, outdeg, fen, X, U,
                 ints, reals, mean_p, norm, record_every, out_idx, out_d, out_p,
                 out_s, out_x, out_w1, out_wp1, track):
    """Insert nodes until ``n_target`` or until the level arrays fill up.

    ``ints = [n, P, n_records, max_depth]``, ``reals = [E, total, S_prev]``.
    Returns the number of nodes after the call.
    """
    n = ints[0]
    P = ints[1]
    rec = ints[2]
    max_depth = ints[3]
    E = reals[0]
    total = reals[1]
    s_prev = reals[2]
    levels = U.shape[0]
    step = beta + m
    while n < n_target:
        if max_depth + 3 >= levels:
            break
        u = rng.random()
        v = _pick_parent(fen, outdeg, n, beta, m, total, u)
        n += 1
        d = depth[v] + 1
        parent[n] = v
        depth[n] = d
        outdeg[v] += 1
        _fen_add(fen, v, beta)
        _fen_add(fen, n, float(m))
        X[d] += 1
        U[d] += beta
        U[d + 1] += m
        if d > max_depth:
            max_depth = d
        P += d
        E += step * d + m
        total += step
        s = (P - mean_p[n]) / norm[n]
        x = s - s_prev
        s_prev = s
        if record_every[n]:
            out_idx[rec] = n
            out_d[rec] = d
            out_p[rec] = P
            out_s[rec] = s
            out_x[rec] = x
            if track:
                w1 = 0.0
                wp1 = 0.0
                for k in range(1, max_depth + 2):
                    w1 += U[k]
                    wp1 += k * U[k]
                out_w1[rec] = w1
                out_wp1[rec] = wp1
            rec += 1
    ints[0] = n
    ints[1] = P
    ints[2] = rec
    ints[3] = max_depth
    reals[0] = E
    reals[1] = total
    reals[2] = s_prev
    return n


# -- state ------------------------------------------------------------------


@dataclass
class TreeState:
    """Mutable growth state.  Node 1 is the root; ``parent[1] = 0``.

    Arrays are 1-based over nodes and 0-based over levels; ``capacity`` is
    the number of node slots allocated.
    """

    params: ModelParams
    n: int
    parent: np.ndarray
    depth: np.ndarray
    outdegree: np.ndarray
    internal_profile: np.ndarray
    external_profile: np.ndarray
    path_length: int
    external_path_length: float
    weight_index: np.ndarray
    total_weight: float
    max_depth: int = 0
    last_depth: int = 0

    @property
    def capacity(self) -> int:
        return self.parent.shape[0] - 1

    def copy(self) -> "TreeState":
        return TreeState(
            self.params, self.n, self.parent.copy(), self.depth.copy(),
            self.outdegree.copy(), self.internal_profile.copy(),
            self.external_profile.copy(), self.path_length,
            self.external_path_length, self.weight_index.copy(),
            self.total_weight, self.max_depth, self.last_depth,
        )

    def node_weights(self) -> np.ndarray:
        """Per-node attachment weights, nodes 1..n."""
        return self.params.beta * self.outdegree[1:self.n + 1] + self.params.m

    @property
    def martingale(self) -> float:
        """S_n = (P_n - E[P_n]) / (n - beta/(beta+m))."""
        return (self.path_length - exact.mean_path(self.params, self.n)) / (self.n - self.params.shift)

    def _reserve(self, nodes: int, levels: int | None = None) -> None:
        if nodes > self.capacity:
            new = max(nodes, 2 * self.capacity)
            self.parent = _grow_array(self.parent, new + 1)
            self.depth = _grow_array(self.depth, new + 1)
            self.outdegree = _grow_array(self.outdegree, new + 1)
            self.weight_index = _rebuild_fenwick(self.node_weights(), new)
        if levels is not None and levels > self.external_profile.shape[0]:
            self.internal_profile = _grow_array(self.internal_profile, levels)
            self.external_profile = _grow_array(self.external_profile, levels)

    @classmethod
    def from_parents(cls, params: ModelParams, parents) -> "TreeState":
        """Rebuild the state for a given insertion history.

        ``parents[j]`` is the parent of node ``j + 2``; node indices are
        insertion order starting at 1 for the root.
        """
        state = init_state(params, capacity=len(parents) + 1)
        for v in parents:
            _attach(state, int(v))
        return state


def _grow_array(arr: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


def _rebuild_fenwick(weights: np.ndarray, capacity: int) -> np.ndarray:
    fen = np.zeros(capacity + 1)
    fen[1:len(weights) + 1] = weights
    for i in range(1, capacity + 1):
        j = i + (i & -i)
        if j <= capacity:
            fen[j] += fen[i]
    return fen


def init_state(params: ModelParams, capacity: int = 16) -> TreeState:
    """The single-node tree T_1."""
    capacity = max(capacity, 1)
    parent = np.zeros(capacity + 1, dtype=np.int64)
    depth = np.zeros(capacity + 1, dtype=np.int64)
    outdeg = np.zeros(capacity + 1, dtype=np.int64)
    fen = np.zeros(capacity + 1)
    _fen_add(fen, 1, float(params.m))
    X = np.zeros(_LEVELS0, dtype=np.int64)
    U = np.zeros(_LEVELS0)
    X[0] = 1
    U[1] = params.m
    return TreeState(params, 1, parent, depth, outdeg, X, U, 0, float(params.m),
                     fen, alpha(params, 1))


def _attach(state: TreeState, v: int) -> int:
    """Attach a new node below ``v`` (no sampling); returns its depth."""
    params = state.params
    if not 1 <= v <= state.n:
        raise ValueError(f"parent {v} not in tree of size {state.n}")
    if params.beta * state.outdegree[v] + params.m <= 0:
        raise ValueError(f"node {v} is saturated")
    state._reserve(state.n + 1, state.max_depth + 4)
    n = state.n + 1
    d = int(state.depth[v]) + 1
    state.parent[n] = v
    state.depth[n] = d
    state.outdegree[v] += 1
    _fen_add(state.weight_index, v, params.beta)
    _fen_add(state.weight_index, n, float(params.m))
    state.internal_profile[d] += 1
    state.external_profile[d] += params.beta
    state.external_profile[d + 1] += params.m
    state.max_depth = max(state.max_depth, d)
    state.path_length += d
    state.external_path_length += params.step * d + params.m
    state.total_weight += params.step
    state.n = n
    state.last_depth = d
    return d


def insert_step(state: TreeState, rng: np.random.Generator) -> tuple[TreeState, int]:
    """Insert one node in place; returns ``(state, D_n)``."""
    state._reserve(state.n + 1, state.max_depth + 4)
    v = _pick_parent(state.weight_index, state.outdegree, state.n, state.params.beta,
                     float(state.params.m), state.total_weight, rng.random())
    return state, _attach(state, int(v))


def parent_probabilities(state: TreeState) -> np.ndarray:
    """P(parent = v | current tree) for v = 1..n, read off the Fenwick index."""
    prefix = np.array([_fen_prefix(state.weight_index, i) for i in range(state.n + 1)])
    return np.diff(prefix) / state.total_weight


# -- trajectories -------------------------------------------------------------


@dataclass
class Trajectory:
    """Per-step records ``(n, D_n, P_n, S_n, X_n)`` of one growth run."""

    params: ModelParams
    seed: ReplicaSeed | None
    n: np.ndarray
    D: np.ndarray
    P: np.ndarray
    S: np.ndarray
    X: np.ndarray
    W1: np.ndarray | None = None
    Wp1: np.ndarray | None = None
    state: TreeState | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.n)

    def to_csv(self, fh=None) -> str | None:
        """Write ``n,D,P,S,X`` with 17 significant digits for floats."""
        buf = io.StringIO() if fh is None else fh
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "D", "P", "S", "X"])
        for row in zip(self.n.tolist(), self.D.tolist(), self.P.tolist(),
                       self.S.tolist(), self.X.tolist()):
            writer.writerow([row[0], row[1], row[2], f"{row[3]:.17g}", f"{row[4]:.17g}"])
        return buf.getvalue() if fh is None else None


def grow(params: ModelParams, n: int, seed: ReplicaSeed | int = 0, checkpoints=None,
         mode: str = "auto", track_profile: bool = False) -> Trajectory:
    """Grow T_1, ..., T_n and record the martingale trajectory.

    ``mode`` is ``"full"`` (every step), ``"lean"`` (only ``checkpoints``)
    or ``"auto"`` (full below ``LEAN_THRESHOLD`` nodes).  With
    ``track_profile`` the values ``W_k(1)`` and ``W_k'(1)`` are computed from
    the external profile at every recorded step.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_NODES:
        raise ResourceLimit(f"n = {n} exceeds the configured maximum {MAX_NODES}")
    if not isinstance(seed, ReplicaSeed):
        seed = ReplicaSeed(int(seed))
    if mode == "auto":
        mode = "full" if n < LEAN_THRESHOLD else "lean"
    if mode not in ("full", "lean"):
        raise ValueError(f"unknown mode {mode!r}")

    record = np.zeros(n + 1, dtype=np.bool_)
    if mode == "full":
        record[1:] = True
    if checkpoints is not None:
        cps = np.asarray(list(checkpoints), dtype=np.int64)
        if cps.size and (cps.min() < 1 or cps.max() > n):
            raise ValueError("checkpoints must lie in [1, n]")
        record[cps] = True
    n_rec = int(record.sum())

    mean_p = exact.path_mean_array(params, n)
    norm = exact.normaliser_array(params, n)
    out_idx = np.zeros(n_rec, dtype=np.int64)
    out_d = np.zeros(n_rec, dtype=np.int64)
    out_p = np.zeros(n_rec, dtype=np.int64)
    out_s = np.zeros(n_rec)
    out_x = np.zeros(n_rec)
    out_w1 = np.zeros(n_rec if track_profile else 0)
    out_wp1 = np.zeros(n_rec if track_profile else 0)
    rec = 0
    if record[1]:
        out_idx[0] = 1
        if track_profile:
            out_w1[0] = params.m
            out_wp1[0] = params.m
        rec = 1

    state = init_state(params, capacity=n)
    rng = seed.generator()
    ints = np.array([1, 0, rec, 0], dtype=np.int64)
    reals = np.array([state.external_path_length, state.total_weight, 0.0])
    while ints[0] < n:
        _grow_kernel(rng, params.beta, float(params.m), n, state.parent, state.depth,
                     state.outdegree, state.weight_index, state.internal_profile,
                     state.external_profile, ints, reals, mean_p, norm, record,
                     out_idx, out_d, out_p, out_s, out_x, out_w1, out_wp1, track_profile)
        if ints[0] < n:
            state._reserve(n, 2 * state.external_profile.shape[0])
    state.n = int(ints[0])
    state.path_length = int(ints[1])
    state.max_depth = int(ints[3])
    state.external_path_length = float(reals[0])
    state.total_weight = float(reals[1])
    state.last_depth = int(state.depth[state.n])
    return Trajectory(params, seed, out_idx, out_d, out_p, out_s, out_x,
                      out_w1 if track_profile else None,
                      out_wp1 if track_profile else None, state)


def increment_check(before: TreeState, after: TreeState) -> float:
    """|X_n - (beta+m)/alpha_n (D_n - E[D_n] - S_{n-1})| for consecutive states."""
    if after.n != before.n + 1:
        raise ValueError("states are not consecutive")
    params = after.params
    n = after.n
    s_prev = before.martingale if before.n > 1 else 0.0
    x = after.martingale - s_prev
    d = after.last_depth
    predicted = params.step / alpha(params, n) * (d - exact.depth_mean(params, n) - s_prev)
    return abs(x - predicted)
