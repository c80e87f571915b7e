"""Profile polynomial W_n(z), its mean C_n(z) and the martingale M_n(z) = W_n / C_n.

At ``z = 1`` the derivatives tie the profile to the path length:
``W_n(1) = alpha_n``, ``W_n'(1) = E_n = (beta+m) P_n + n m`` and
``M_n'(1) = S_n``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import _chain, exact
from .model import ModelParams, alpha
from .tree_sim import ReplicaSeed, TreeState

DEFAULT_RADIUS = 0.1


class DegenerateNormaliser(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class ProfileEval:
    n: int
    z: complex
    W: complex
    C: complex

    @property
    def M(self) -> complex:
        return self.W / self.C


@dataclass(frozen=True)
class DerivativeBundle:
    W1: float
    Wp1: float
    Wpp1: float
    C1: float
    Cp1: float
    Cpp1: float
    Mp1: float
    Mpp1: float


def profile_polynomial(U, z):
    """sum_k U[k] z^k by Horner's rule; ``z`` may be an array."""
    U = np.asarray(U, dtype=float)
    nz = np.flatnonzero(U)
    top = nz[-1] if nz.size else 0
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for k in range(top, -1, -1):
        acc = acc * z + U[k]
    return acc[()] if acc.ndim == 0 else acc


def eval_W(state: TreeState, z):
    return profile_polynomial(state.external_profile, z)


def _log_C(params: ModelParams, n: int, z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0):
        raise ValueError("C_n(z) is evaluated on the right half-plane Re(z) > 0 only")
    a = exact._alphas(params, n - 1)
    # Each factor (alpha_j + beta + m z)/alpha_j has positive real part when
    # Re(z) > 0, so principal logarithms can be summed.
    out = np.log(params.m * z)
    if n > 1:
        zz = z.reshape(-1)
        logs = np.log1p((params.beta + params.m * zz[:, None]) / a[None, :]).sum(axis=1)
        out = out + logs.reshape(z.shape)
    return out


def eval_C(params: ModelParams, n: int, z):
    """C_n(z) = E[W_n(z)] = m z prod_{j<n} (alpha_j + beta + m z) / alpha_j."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.exp(_log_C(params, n, z))
    return out[()] if np.ndim(out) == 0 else out


def eval_M(state: TreeState, z):
    C = eval_C(state.params, state.n, z)
    if np.any(np.abs(C) < 1e-300):
        raise DegenerateNormaliser("normaliser C_n(z) vanishes numerically")
    return eval_W(state, z) / C


def evaluate(state: TreeState, z: complex) -> ProfileEval:
    return ProfileEval(state.n, complex(z), complex(eval_W(state, z)), complex(eval_C(state.params, state.n, z)))


def _profile_sums(U: np.ndarray) -> tuple[float, float, float]:
    k = np.arange(len(U), dtype=float)
    return float(U.sum()), float(np.dot(k, U)), float(np.dot(k * (k - 1.0), U))


def derivatives_at_one(state: TreeState, params: ModelParams | None = None) -> DerivativeBundle:
    """W, C, M and their first two derivatives at z = 1."""
    params = state.params if params is None else params
    n = state.n
    W1, Wp1, Wpp1 = _profile_sums(state.external_profile)
    a_n = alpha(params, n)
    # log C_n(z) = log(m z) + sum_{i=2}^{n} log(alpha_{i-1} + beta + m z) - const, and
    # alpha_{i-1} + beta + m = alpha_i, so its derivatives at 1 are sums over m/alpha_i.
    p = params.m / exact._alphas(params, n)
    dlog = math.fsum(p)
    d2log = -math.fsum(p * p)
    C1 = a_n
    Cp1 = C1 * dlog
    Cpp1 = C1 * (d2log + dlog * dlog)
    Mp1 = (Wp1 * C1 - Cp1 * W1) / C1 ** 2
    Mpp1 = ((Wpp1 * C1 - Cpp1 * W1) * C1 - 2.0 * Cp1 * (Wp1 * C1 - Cp1 * W1)) / C1 ** 3
    return DerivativeBundle(W1, Wp1, Wpp1, C1, Cp1, Cpp1, Mp1, Mpp1)


def conditional_depth_moments(state: TreeState) -> tuple[float, float]:
    """(E[D_{n+1} | F_n], E[D_{n+1}^2 | F_n]) from the external profile."""
    W1, Wp1, Wpp1 = _profile_sums(state.external_profile)
    return Wp1 / W1, (Wpp1 + Wp1) / W1


def conditional_increment_variance(state: TreeState, params: ModelParams | None = None) -> float:
    """E[X_{n+1}^2 | F_n] for a state of size n.

    Uses (beta+m)^2 / alpha_{n+1}^2 (Var(D_{n+1}) + M_n''(1) + S_n - S_n^2).
    """
    params = state.params if params is None else params
    n = state.n
    b = derivatives_at_one(state, params)
    s = b.Mp1
    inner = exact.depth_variance(params, n + 1) + b.Mpp1 + s - s * s
    return params.step ** 2 / alpha(params, n + 1) ** 2 * inner


def identity_residuals(trajectory) -> tuple[float, float]:
    """Largest |W_k(1) - alpha_k| and |W_k'(1) - (beta+m) P_k - k m| along a
    trajectory grown with ``track_profile=True``."""
    if trajectory.W1 is None:
        raise ValueError("trajectory was grown without profile tracking")
    params = trajectory.params
    n = trajectory.n.astype(float)
    r1 = np.abs(trajectory.W1 - (params.step * n - params.beta)).max()
    r2 = np.abs(trajectory.Wp1 - (params.step * trajectory.P + n * params.m)).max()
    return float(r1), float(r2)


# -- Monte Carlo diagnostics ---------------------------------------------------


def _profiles(params, sizes, seed, replica):
    rng = ReplicaSeed(seed, replica).generator()
    marks = np.asarray(sorted(sizes), dtype=np.int64)
    U, _ = _chain.chain_profiles(rng, params.beta, float(params.m), int(marks[-1]), marks,
                                 params.integer_beta)
    return marks, U


def lp_on_circle(params: ModelParams, sizes, p: float, radius: float = 0.05,
                 replicas: int = 200, seed: int = 0, points: int = 16) -> np.ndarray:
    """Monte Carlo sup over the circle |z - 1| = radius of E|M_n(z)|^p, per size."""
    z = 1.0 + radius * np.exp(2j * np.pi * np.arange(points) / points)
    marks = np.asarray(sorted(sizes), dtype=np.int64)
    C = np.array([eval_C(params, int(n), z) for n in marks])
    acc = np.zeros((len(marks), points))
    for r in range(replicas):
        _, U = _profiles(params, marks, seed, r)
        for j in range(len(marks)):
            acc[j] += np.abs(profile_polynomial(U[j], z) / C[j]) ** p
    return (acc / replicas).max(axis=1)


def second_derivative_path(params: ModelParams, sizes, seed: int = 0) -> np.ndarray:
    """M_n''(1) along a single run at the given sizes."""
    marks, U = _profiles(params, sizes, seed, 0)
    out = []
    for j, n in enumerate(marks):
        W1, Wp1, Wpp1 = _profile_sums(U[j])
        p = params.m / exact._alphas(params, int(n))
        dlog, d2log = math.fsum(p), -math.fsum(p * p)
        C1 = alpha(params, int(n))
        Cp1, Cpp1 = C1 * dlog, C1 * (d2log + dlog * dlog)
        out.append(((Wpp1 * C1 - Cpp1 * W1) * C1 - 2 * Cp1 * (Wp1 * C1 - Cp1 * W1)) / C1 ** 3)
    return np.array(out)


def mean_M(params: ModelParams, n: int, z: complex, replicas: int, seed: int = 0):
    """(sample mean, standard error) of M_n(z) over independent runs."""
    C = eval_C(params, n, z)
    vals = np.empty(replicas, dtype=complex)
    for r in range(replicas):
        _, U = _profiles(params, [n], seed, r)
        vals[r] = profile_polynomial(U[0], z) / C
    return vals.mean(), vals.std(ddof=1) / math.sqrt(replicas)


def profile_csv(state: TreeState, zs, fh=None) -> str | None:
    """CSV rows ``n,re_z,im_z,re_W,im_W,re_M,im_M``."""
    buf = io.StringIO() if fh is None else fh
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "re_z", "im_z", "re_W", "im_W", "re_M", "im_M"])
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    W = np.atleast_1d(eval_W(state, zs))
    M = W / np.atleast_1d(eval_C(state.params, state.n, zs))
    for z, w, mz in zip(zs, W, M):
        writer.writerow([state.n] + [f"{v:.17g}" for v in (z.real, z.imag, w.real, w.imag, mz.real, mz.imag)])
    return buf.getvalue() if fh is None else None
