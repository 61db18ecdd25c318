"""Distribution primitives: beta, gamma and point-mass confidence distributions.

Quantiles are exact (inverse regularized incomplete beta/gamma); sampling is
driven by counter-based Philox streams keyed by ``(master_seed, stream_id)`` so
that every draw is reproducible regardless of evaluation order or worker count.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

__all__ = [
    "ConfDist",
    "RngStream",
    "beta",
    "gamma",
    "pointmass",
    "quantile",
    "cdf",
    "draw",
    "empirical_quantile",
    "binom_draw",
    "derive_stream_id",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ConfDist:
    """A closed-form confidence distribution.

    ``kind`` is ``"beta"`` (``a``, ``b`` shapes), ``"gamma"`` (``a`` shape,
    ``b`` scale) or ``"point"`` (mass at ``a``). Use the :func:`beta`,
    :func:`gamma` and :func:`pointmass` constructors, which fold the
    degenerate parameterizations into point masses.
    """

    kind: str
    a: float
    b: float = 0.0

    @property
    def is_point(self) -> bool:
        return self.kind == "point"

    def mean(self) -> float:
        if self.kind == "point":
            return self.a
        if self.kind == "beta":
            return self.a / (self.a + self.b)
        return self.a * self.b


def beta(a: float, b: float) -> ConfDist:
    """Beta(a, b); Beta(0, b) is a point mass at 0 and Beta(a, 0) at 1."""
    a = float(a)
    b = float(b)
    if not (a >= 0 and b >= 0) or math.isinf(a) or math.isinf(b):
        raise ValueError(f"beta parameters must be finite and nonnegative, got ({a}, {b})")
    if a == 0 and b == 0:
        raise ValueError("Beta(0, 0) is undefined")
    if a == 0:
        return ConfDist("point", 0.0)
    if b == 0:
        return ConfDist("point", 1.0)
    return ConfDist("beta", a, b)


def gamma(shape: float, scale: float) -> ConfDist:
    """Gamma(shape, scale); a zero shape is a point mass at 0."""
    shape = float(shape)
    scale = float(scale)
    if not shape >= 0 or math.isinf(shape):
        raise ValueError(f"gamma shape must be finite and nonnegative, got {shape}")
    if shape == 0:
        return ConfDist("point", 0.0)
    if not (scale > 0) or math.isinf(scale):
        raise ValueError(f"gamma scale must be positive, got {scale}")
    return ConfDist("gamma", shape, scale)


def pointmass(v: float) -> ConfDist:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"point mass location must be finite, got {v}")
    return ConfDist("point", v)


def _check(d: ConfDist) -> None:
    if d.kind == "point":
        if not math.isfinite(d.a):
            raise ValueError(f"malformed point mass {d!r}")
    elif d.kind == "beta":
        if not (d.a > 0 and d.b > 0 and math.isfinite(d.a) and math.isfinite(d.b)):
            raise ValueError(f"malformed beta distribution {d!r}")
    elif d.kind == "gamma":
        if not (d.a > 0 and d.b > 0 and math.isfinite(d.a) and math.isfinite(d.b)):
            raise ValueError(f"malformed gamma distribution {d!r}")
    else:
        raise ValueError(f"unknown distribution kind {d.kind!r}")


def quantile(d: ConfDist, p: float) -> float:
    """Exact ``p``-th quantile of ``d`` for ``0 < p < 1``."""
    if not 0 < p < 1:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    _check(d)
    if d.kind == "point":
        return d.a
    if d.kind == "beta":
        return float(special.betaincinv(d.a, d.b, p))
    return float(special.gammaincinv(d.a, p) * d.b)


def cdf(d: ConfDist, x: float) -> float:
    _check(d)
    if d.kind == "point":
        return 1.0 if x >= d.a else 0.0
    if d.kind == "beta":
        return float(special.betainc(d.a, d.b, min(max(x, 0.0), 1.0)))
    return float(special.gammainc(d.a, max(x, 0.0) / d.b))


def derive_stream_id(*keys: object) -> int:
    """Fold an arbitrary tuple of keys into a 64-bit stream id.

    Uses BLAKE2b over the keys' ``repr`` so ids are stable across processes
    and platforms (unlike the builtin ``hash``).
    """
    h = hashlib.blake2b(repr(keys).encode("utf-8"), digest_size=8)
    return struct.unpack("<Q", h.digest())[0]


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a reproducible random stream.

    The generator is a Philox counter-based bit generator keyed by
    ``(master_seed, stream_id)``; distinct ids give independent streams.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def child(self, *keys: object) -> "RngStream":
        """Stream for a named sub-task; independent of sibling children."""
        return RngStream(self.master_seed, derive_stream_id(int(self.stream_id), *keys))

    def generator(self) -> np.random.Generator:
        key = np.array([int(self.master_seed), int(self.stream_id)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


def draw(d: ConfDist, m: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """``m`` independent variates from ``d``."""
    if m < 1:
        raise ValueError(f"sample size must be positive, got {m}")
    _check(d)
    if d.kind == "point":
        return np.full(m, d.a)
    gen = _as_generator(rng)
    if d.kind == "beta":
        return gen.beta(d.a, d.b, size=m)
    return gen.gamma(d.a, d.b, size=m)


def _order_index(n: int, p: float) -> int:
    # 1-based ceil(p*n); the small slack keeps exact products such as
    # 0.975*1000 from being pushed up a rank by rounding error.
    k = math.ceil(p * n - 1e-9)
    return min(max(k, 1), n)


def empirical_quantile(xs: Sequence[float] | np.ndarray, p: float) -> float:
    """Order statistic at rank ``ceil(p * len(xs))`` (inverse empirical CDF).

    >>> empirical_quantile([1, 2, 3, 4], 0.5)
    2.0
    """
    arr = np.asarray(xs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("empirical_quantile needs a nonempty 1-d sequence")
    if not 0 < p < 1:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    k = _order_index(arr.size, p) - 1
    return float(np.partition(arr, k)[k])


def binom_draw(n: int, theta: float, rng: RngStream | np.random.Generator) -> int:
    if not 0 <= theta <= 1:
        raise ValueError(f"binomial probability must lie in [0, 1], got {theta}")
    if n < 0:
        raise ValueError(f"binomial size must be nonnegative, got {n}")
    if theta == 0 or n == 0:
        return 0
    if theta == 1:
        return int(n)
    return int(_as_generator(rng).binomial(n, theta))
