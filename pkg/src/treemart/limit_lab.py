"""Monte Carlo experiments for the martingale tail sum S_n - S.

The limit S is replaced by S_N at a finite horizon N.  The replacement adds
variance ``s_N^2`` to ``s_n^2``, roughly a relative ``(n log N)/(N log n)``,
so configurations are rejected unless that ratio is at most 1%.

Replicas are independent substreams ``ReplicaSeed(master_seed, r)`` and are
reduced in replica-index order, so results do not depend on scheduling.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import special, stats

from . import _chain, exact
from .model import ModelParams, make_params
from .tree_sim import ReplicaSeed

PROXY_GUARD = 0.01
LIL_MIN_CHECKPOINT = math.exp(math.e)


class ConfigError(ValueError):
    pass


def resolve_threads(threads: int | None = None) -> int:
    if threads:
        return int(threads)
    env = os.environ.get("TREEMART_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    n: int
    horizon: int
    replicas: int
    master_seed: int = 0
    checkpoints: tuple = ()
    moment_orders: tuple = (2, 3, 4, 6)
    threads: int | None = None

    def proxy_ratio(self) -> float:
        """(n log N) / (N log n), the relative variance added by using S_N for S."""
        return self.n * math.log(self.horizon) / (self.horizon * math.log(self.n))

    def validate(self) -> "ExperimentConfig":
        if self.n < 3:
            raise ConfigError("n must be at least 3 so that log n > 1")
        if self.replicas < 1:
            raise ConfigError("replicas must be positive")
        if self.horizon <= self.n or self.proxy_ratio() > PROXY_GUARD:
            raise ConfigError(
                f"horizon {self.horizon} too small for n = {self.n}: "
                f"proxy ratio {self.proxy_ratio():.4f} > {PROXY_GUARD}"
            )
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = {"tag": self.model.tag, "beta": self.model.beta, "m": self.model.m}
        d["checkpoints"] = list(self.checkpoints)
        d["moment_orders"] = list(self.moment_orders)
        d.pop("threads")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        model = make_params(d["model"]["beta"], d["model"]["m"])
        return cls(model, d["n"], d["horizon"], d["replicas"], d["master_seed"],
                   tuple(d.get("checkpoints", ())), tuple(d.get("moment_orders", (2, 3, 4, 6))))


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    summary: dict
    arrays: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self, include_metadata: bool = True) -> dict:
        out = {
            "config": self.config.to_dict(),
            "summary": self.summary,
            "arrays": {k: np.asarray(v).tolist() for k, v in self.arrays.items()},
        }
        if include_metadata:
            out["metadata"] = self.metadata
        return out

    def to_json(self, include_metadata: bool = True) -> str:
        return json.dumps(self.to_dict(include_metadata), indent=2, sort_keys=True)

    def stem(self, kind: str) -> str:
        c = self.config
        return f"{kind}_{c.model.tag}_n{c.n}_N{c.horizon}_seed{c.master_seed}"

    def save(self, directory, kind: str, sample_key: str | None = None) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{self.stem(kind)}.json"
        path.write_text(self.to_json())
        if sample_key is not None:
            values = np.asarray(self.arrays[sample_key])
            lines = [sample_key] + [f"{v:.17g}" for v in values]
            (directory / f"{self.stem(kind)}.csv").write_text("\n".join(lines) + "\n")
        return path


# -- replica engine -------------------------------------------------------------


def map_replicas(fn, replicas: int, threads: int | None = None, order=None) -> list:
    """Evaluate ``fn(r)`` for every replica and return results indexed by ``r``.

    ``order`` permutes the submission order only; the output is always in
    replica-index order.
    """
    order = range(replicas) if order is None else list(order)
    results = [None] * replicas
    workers = resolve_threads(threads)
    if workers <= 1:
        for r in order:
            results[r] = fn(r)
        return results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {r: pool.submit(fn, r) for r in order}
        for r, fut in futures.items():
            results[r] = fut.result()
    return results


def run_marks(params: ModelParams, horizon: int, marks, seed: int, replica: int):
    """(D, P) of one replica at the sorted sizes ``marks``."""
    rng = ReplicaSeed(seed, replica).generator()
    marks = np.asarray(marks, dtype=np.int64)
    return _chain.chain_marks(rng, params.beta, float(params.m), int(horizon), marks,
                              params.integer_beta)


def martingale_values(params: ModelParams, marks, P) -> np.ndarray:
    marks = np.asarray(marks, dtype=np.int64)
    upto = int(marks.max())
    mean_p = exact.path_mean_array(params, upto)
    norm = exact.normaliser_array(params, upto)
    return (np.asarray(P, dtype=float) - mean_p[marks]) / norm[marks]


def tail_sums(config: ExperimentConfig, marks, order=None) -> np.ndarray:
    """S_k - S_N for every replica (rows) and every k in ``marks`` (columns)."""
    params = config.model
    marks = np.asarray(sorted(set(marks) | {config.horizon}), dtype=np.int64)

    def one(r):
        _, P = run_marks(params, config.horizon, marks, config.master_seed, r)
        s = martingale_values(params, marks, P)
        return s[:-1] - s[-1]

    return np.vstack(map_replicas(one, config.replicas, config.threads, order))


# -- CLT and moments --------------------------------------------------------------


def clt_prefactor(params: ModelParams, n: int) -> float:
    return math.sqrt(params.step / params.m) * math.sqrt(n / math.log(n))


def clt_sample(config: ExperimentConfig, order=None) -> np.ndarray:
    """Z = sqrt((beta+m)/m) sqrt(n / log n) (S_n - S_N), one value per replica."""
    config.validate()
    tails = tail_sums(config, [config.n], order)[:, 0]
    return clt_prefactor(config.model, config.n) * tails


def std_normal_cdf(x):
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def ks_statistic(samples, cdf=std_normal_cdf) -> float:
    """Two-sided sup |F_hat - F|."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("empty sample")
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_pvalue(d: float, n: int) -> float:
    return float(stats.kstwo.sf(d, n))


def normal_abs_moment(p: float) -> float:
    """E|N|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)."""
    return 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


def moment_estimate(config: ExperimentConfig, p: float, samples=None) -> float:
    """Empirical E|Z|^p of the CLT-scaled tail sum; its target is E|N|^p."""
    if samples is None:
        samples = clt_sample(config)
    return float(np.mean(np.abs(samples) ** p))


def in_theorem_scope(params: ModelParams) -> bool:
    """Moment convergence is established for integer beta only."""
    return params.integer_beta


def run_clt(config: ExperimentConfig, order=None) -> ExperimentReport:
    start = time.perf_counter()
    z = clt_sample(config, order)
    d = ks_statistic(z)
    moments = {str(p): moment_estimate(config, p, z) for p in config.moment_orders}
    summary = {
        "ks_distance": d,
        "p_value": ks_pvalue(d, len(z)),
        "mean": float(z.mean()),
        "sd": float(z.std(ddof=1)),
        "moment_estimates": moments,
        "moment_targets": {str(p): normal_abs_moment(p) for p in config.moment_orders},
        "proxy_ratio": config.proxy_ratio(),
        "theorem_scope": in_theorem_scope(config.model),
    }
    report = ExperimentReport(config, summary, {"samples": z})
    report.metadata["wall_time"] = time.perf_counter() - start
    return report


# -- law of the iterated logarithm ---------------------------------------------------


def lil_prefactor(params: ModelParams, n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return np.sqrt(params.step / (2 * params.m)) * np.sqrt(n / (np.log(n) * np.log(np.log(n))))


@dataclass
class LilResult:
    checkpoints: np.ndarray
    scaled: np.ndarray        # replicas x checkpoints
    running_max: np.ndarray
    running_min: np.ndarray

    @property
    def final_max(self) -> np.ndarray:
        return self.running_max[:, -1]

    @property
    def final_min(self) -> np.ndarray:
        return self.running_min[:, -1]

    @property
    def pooled_max(self) -> float:
        """Replica average of the running maximum."""
        return float(self.final_max.mean())

    @property
    def pooled_min(self) -> float:
        return float(self.final_min.mean())


def lil_trajectory(config: ExperimentConfig, order=None) -> LilResult:
    """Running extremes of sqrt((beta+m)/(2m)) sqrt(n/(log n log log n)) (S_n - S_N)."""
    cps = np.asarray(sorted(config.checkpoints), dtype=np.int64)
    if cps.size == 0:
        raise ConfigError("no checkpoints")
    if cps[0] < LIL_MIN_CHECKPOINT:
        raise ConfigError(f"checkpoints must be >= e^e ~ {LIL_MIN_CHECKPOINT:.2f}")
    if cps[-1] > config.horizon / 100:
        raise ConfigError("checkpoints must not exceed horizon / 100")
    tails = tail_sums(config, cps, order)
    scaled = tails * lil_prefactor(config.model, cps)[None, :]
    return LilResult(cps, scaled, np.maximum.accumulate(scaled, axis=1),
                     np.minimum.accumulate(scaled, axis=1))


# -- martingale-condition diagnostics -----------------------------------------------


def condition_diagnostics(params: ModelParams, n: int, horizon: int, replicas: int,
                          seed: int = 0, eps_grid=(0.25, 0.5, 1.0), l2_marks=None,
                          p_orders=(4, 6), s_marks=None, threads=None) -> dict:
    """Numerical checks of the martingale limit theorem's conditions.

    * ``r_n``: s_n^{-2} sum_{i=n}^{N} E[X_i^2 | F_{i-1}], normalised by the
      exact truncated s_n^2 = sum_{i=n}^{N} E[X_i^2]; ``r_n_closed`` uses
      theta log(n)/n instead.
    * ``c1``: s_n^{-2} sum_{i=n}^{N} E[X_i^2 1{|X_i| >= eps s_n}] per eps.
    * ``l2_partial``: partial sums of s_i^{-4} E[X_i^4] at ``l2_marks``.
    * ``abs_moments``: E|S_k|^p at ``s_marks`` for each p.
    """
    if not 2 <= n < horizon:
        raise ConfigError("need 2 <= n < horizon")
    l2_marks = sorted(l2_marks or [n, horizon])
    s_marks = sorted(s_marks or [n, horizon])
    marks = np.asarray(sorted({n - 1, horizon, *l2_marks, *s_marks}), dtype=np.int64)
    mean_p = exact.path_mean_array(params, horizon)
    norm = exact.normaliser_array(params, horizon)
    var_s = exact.martingale_var_array(params, horizon)
    sigma2 = exact.variance_constant(params)
    s2_inf = np.empty(horizon + 1)
    s2_inf[0] = sigma2
    s2_inf[1:] = sigma2 - var_s[:-1]  # s_i^2 = Var(S) - Var(S_{i-1})
    s2_trunc, _ = exact.s_squared(params, n, horizon)
    s2_closed = params.theta * math.log(n) / n
    eps = np.asarray(eps_grid, dtype=float)
    c1_start = np.full(len(eps), n, dtype=np.int64)
    c1_thresh = eps * math.sqrt(s2_trunc)

    def one(r):
        rng = ReplicaSeed(seed, r).generator()
        return _chain.chain_diagnostics(rng, params.beta, float(params.m), horizon, mean_p,
                                        norm, s2_inf, marks, c1_start, c1_thresh,
                                        params.integer_beta)

    results = map_replicas(one, replicas, threads)
    idx = {int(k): j for j, k in enumerate(marks)}
    cv_tail = np.array([res[0][idx[horizon]] - res[0][idx[n - 1]] for res in results])
    c1 = np.array([res[3] for res in results]).mean(axis=0) / s2_trunc
    l2 = np.array([[res[1][idx[k]] for k in l2_marks] for res in results]).mean(axis=0)
    s_vals = np.array([[res[2][idx[k]] for k in s_marks] for res in results])
    abs_moments = {str(p): np.mean(np.abs(s_vals) ** p, axis=0).tolist() for p in p_orders}
    return {
        "n": n,
        "horizon": horizon,
        "replicas": replicas,
        "r_n": float(np.mean(cv_tail) / s2_trunc),
        "r_n_per_replica": (cv_tail / s2_trunc).tolist(),
        "r_n_closed": float(np.mean(cv_tail) / s2_closed),
        "s2_truncated": s2_trunc,
        "s2_closed": s2_closed,
        "truncation_ratio": exact.tail_variance(params, horizon + 1) / exact.tail_variance(params, n),
        "c1": dict(zip(map(str, eps.tolist()), c1.tolist())),
        "l2_marks": list(l2_marks),
        "l2_partial": l2.tolist(),
        "s_marks": list(s_marks),
        "abs_moments": abs_moments,
    }


# -- depth tails -------------------------------------------------------------------


def sample_depths(params: ModelParams, n: int, samples: int, seed: int = 0) -> np.ndarray:
    """Independent draws of D_n from full growth runs."""
    rng = ReplicaSeed(seed).generator()
    return _chain.chain_depths(rng, params.beta, float(params.m), int(n), int(samples),
                               params.integer_beta)


def depth_tail_check(params: ModelParams, n: int, ts, samples: int, seed: int = 0) -> list[dict]:
    """Empirical P(|D_n - E D_n| >= t) against the Bernstein bound, per t."""
    d = sample_depths(params, n, samples, seed)
    mu = exact.depth_mean(params, n)
    rows = []
    for t in ts:
        freq = float(np.mean(np.abs(d - mu) >= t))
        se = math.sqrt(freq * (1 - freq) / samples)
        bound = exact.bernstein_depth_tail(params, n, t)
        rows.append({"t": float(t), "frequency": freq, "se": se, "bound": bound,
                     "ok": freq <= bound + 3 * se})
    return rows
