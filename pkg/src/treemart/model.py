"""Model parameters for linear recursive trees and the special functions
needed by the asymptotic constants.

A node ``v`` with outdegree ``d`` attracts the next insertion with weight
``beta * d + m``.  Two regimes are supported:

* ``beta >= 0, m = 1``  (recursive tree, plane-oriented tree, p-oriented trees)
* ``beta = -1, m >= 2`` (m-ary trees; the binary search tree is ``m = 2``)
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class InvalidParams(ValueError):
    """Raised when ``(beta, m)`` is not one of the supported combinations."""


class SaturationError(ValueError):
    """Raised when an m-ary node is asked for more than ``m`` children."""


@dataclass(frozen=True)
class ModelParams:
    beta: float
    m: int

    def __post_init__(self):
        beta, m = self.beta, self.m
        if isinstance(m, bool) or int(m) != m or m < 1:
            raise InvalidParams(f"m must be a positive integer, got {m!r}")
        if not math.isfinite(beta):
            raise InvalidParams(f"beta must be finite, got {beta!r}")
        object.__setattr__(self, "beta", float(beta))
        object.__setattr__(self, "m", int(m))
        if not ((beta >= 0 and m == 1) or (beta == -1 and m >= 2)):
            raise InvalidParams(
                f"unsupported combination beta={beta}, m={m}: need beta >= 0 with m = 1, "
                "or beta = -1 with m >= 2"
            )

    @property
    def theta(self) -> float:
        """m / (beta + m): coefficient of ``n log n`` in the mean path length."""
        return self.m / (self.beta + self.m)

    @property
    def step(self) -> float:
        """beta + m, the growth of the total weight per insertion."""
        return self.beta + self.m

    @property
    def shift(self) -> float:
        """beta / (beta + m); the martingale is normalised by ``n - shift``."""
        return self.beta / (self.beta + self.m)

    @property
    def integer_beta(self) -> bool:
        return float(self.beta).is_integer()

    @property
    def tag(self) -> str:
        for name, preset in PRESETS.items():
            if preset == self:
                return name
        if self.beta == -1:
            return f"mary-{self.m}"
        if self.integer_beta:
            return f"p-oriented-{int(self.beta)}"
        return f"custom-{self.beta:g}-{self.m}"


def make_params(beta: float, m: int) -> ModelParams:
    """Validated constructor; raises :class:`InvalidParams`."""
    return ModelParams(beta, m)


BST = ModelParams(-1.0, 2)
RT = ModelParams(0.0, 1)
PORT = ModelParams(1.0, 1)

PRESETS = {"bst": BST, "rt": RT, "port": PORT}


def p_oriented(p: int) -> ModelParams:
    return ModelParams(float(p), 1)


def mary(m: int) -> ModelParams:
    return ModelParams(-1.0, m)


_MODEL_RE = re.compile(
    r"^(?:(?P<preset>bst|rt|port)"
    r"|p-oriented:(?P<p>\d+)"
    r"|mary:(?P<mary>\d+)"
    r"|custom:(?P<beta>[-+0-9.eE]+),(?P<m>\d+))$"
)


def parse_model(text: str) -> ModelParams:
    """Parse ``bst | rt | port | p-oriented:<p> | mary:<m> | custom:<beta>,<m>``."""
    match = _MODEL_RE.match(text.strip().lower())
    if match is None:
        raise InvalidParams(f"unrecognised model selector {text!r}")
    if match["preset"]:
        return PRESETS[match["preset"]]
    if match["p"]:
        return p_oriented(int(match["p"]))
    if match["mary"]:
        return mary(int(match["mary"]))
    try:
        beta = float(match["beta"])
    except ValueError as exc:
        raise InvalidParams(f"bad beta in {text!r}") from exc
    return make_params(beta, int(match["m"]))


def alpha(params: ModelParams, n: int) -> float:
    """Total attachment weight of a tree with ``n`` nodes (1 when ``n = 0``)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1.0
    return params.step * n - params.beta


def attachment_weight(params: ModelParams, outdegree: int) -> float:
    if outdegree < 0:
        raise ValueError("outdegree must be non-negative")
    if params.beta == -1 and outdegree > params.m:
        raise SaturationError(f"outdegree {outdegree} exceeds m = {params.m}")
    return params.beta * outdegree + params.m


# Asymptotic series coefficients, valid once the argument is shifted past 10.
_DIGAMMA_COEFFS = (
    1.0 / 12,
    -1.0 / 120,
    1.0 / 252,
    -1.0 / 240,
    1.0 / 132,
    -691.0 / 32760,
    1.0 / 12,
)
_TRIGAMMA_COEFFS = (
    1.0 / 6,
    -1.0 / 30,
    1.0 / 42,
    -1.0 / 30,
    5.0 / 66,
    -691.0 / 2730,
    7.0 / 6,
)
_SHIFT_TO = 10.0


def digamma(x: float) -> float:
    """Logarithmic derivative of the Gamma function for real ``x > 0``."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"digamma defined here only for x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT_TO:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for c in reversed(_DIGAMMA_COEFFS):
        series = series * inv2 + c
    return acc + math.log(x) - 0.5 / x - series * inv2


def trigamma(x: float) -> float:
    """Derivative of :func:`digamma` for real ``x > 0``."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"trigamma defined here only for x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT_TO:
        acc += 1.0 / (x * x)
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for c in reversed(_TRIGAMMA_COEFFS):
        series = series * inv2 + c
    return acc + 1.0 / x + 0.5 * inv2 + series * inv2 / x
