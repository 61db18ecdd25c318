"""Lower/upper confidence distributions for binomial and weighted-sample data."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .distkit import ConfDist, beta, gamma, pointmass

__all__ = [
    "BinomialCount",
    "StratifiedSample",
    "WeightSumError",
    "WsMoments",
    "KGEffective",
    "binom_lower_cd",
    "binom_upper_cd",
    "ws_moments",
    "ws_poisson_cds",
    "kg_effective",
    "kg_cds",
]

WEIGHT_SUM_TOL = 1e-9
WEIGHT_RENORM_TOL = 1e-6


class WeightSumError(ValueError):
    """Stratum weights do not sum to one within the renormalization band."""


@dataclass(frozen=True)
class BinomialCount:
    x: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one trial, got n={self.n}")
        if not 0 <= self.x <= self.n:
            raise ValueError(f"successes must lie in [0, n], got x={self.x}, n={self.n}")


@dataclass(frozen=True, eq=False, init=False)
class StratifiedSample:
    """Per-stratum normalized weights ``w``, sizes ``n`` and positive counts ``x``.

    Weights summing to one within 1e-9 are accepted as given; within 1e-6 they
    are rescaled (with a ``UserWarning``); anything further off raises
    :class:`WeightSumError`.
    """

    w: np.ndarray
    n: np.ndarray
    x: np.ndarray
    notes: tuple[str, ...]

    def __init__(self, w: Sequence[float], n: Sequence[int], x: Sequence[int]):
        w = np.asarray(w, dtype=float).ravel()
        n = np.asarray(n, dtype=np.int64).ravel()
        x = np.asarray(x, dtype=np.int64).ravel()
        if w.size == 0:
            raise ValueError("a stratified sample needs at least one stratum")
        if not (w.size == n.size == x.size):
            raise ValueError("w, n and x must have equal lengths")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("stratum weights must be positive and finite")
        if np.any(n < 1):
            raise ValueError("every stratum needs n >= 1")
        if np.any(x < 0) or np.any(x > n):
            raise ValueError("stratum counts must satisfy 0 <= x <= n")
        notes: list[str] = []
        s = float(np.sum(w))
        dev = abs(s - 1.0)
        if dev > WEIGHT_RENORM_TOL * max(1.0, s):
            raise WeightSumError(f"stratum weights sum to {s!r}, not 1")
        if dev > WEIGHT_SUM_TOL:
            msg = f"stratum weights summed to {s!r}; renormalized"
            warnings.warn(msg, UserWarning, stacklevel=2)
            notes.append(msg)
            w = w / s
        for arr in (w, n, x):
            arr.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "notes", tuple(notes))

    @classmethod
    def single(cls, x: int, n: int) -> "StratifiedSample":
        return cls([1.0], [n], [x])

    @property
    def K(self) -> int:
        return int(self.w.size)

    @property
    def theta_hat(self) -> np.ndarray:
        return self.x / self.n

    def __repr__(self):
        return f"StratifiedSample(K={self.K}, n_total={int(self.n.sum())}, x_total={int(self.x.sum())})"


def binom_lower_cd(c: BinomialCount) -> ConfDist:
    """Beta(x, n - x + 1); a point mass at 0 when x = 0."""
    return beta(c.x, c.n - c.x + 1)


def binom_upper_cd(c: BinomialCount) -> ConfDist:
    """Beta(x + 1, n - x); a point mass at 1 when x = n."""
    return beta(c.x + 1, c.n - c.x)


class WsMoments(NamedTuple):
    y: float
    v: float
    y_star: float
    v_star: float


def ws_moments(s: StratifiedSample) -> WsMoments:
    """Weighted-sum-of-Poissons moments with the continuity bump for the upper limit."""
    r = s.w / s.n
    y = float(np.sum(r * s.x))
    v = float(np.sum(r * r * s.x))
    rmax = float(np.max(r))
    return WsMoments(y, v, y + rmax, v + rmax * rmax)


def ws_poisson_cds(s: StratifiedSample) -> tuple[ConfDist, ConfDist]:
    """Gamma lower/upper confidence distributions matched to (y, v) and (y*, v*)."""
    y, v, ys, vs = ws_moments(s)
    lower = pointmass(0.0) if y == 0 else gamma(y * y / v, v / y)
    upper = gamma(ys * ys / vs, vs / ys)
    return lower, upper


class KGEffective(NamedTuple):
    n_eff: float
    x_eff: float


def kg_effective(s: StratifiedSample) -> KGEffective:
    """Effective sample size and count for the weighted proportion."""
    th = s.theta_hat
    pbar = float(np.sum(s.w * th))
    d = float(np.sum(s.w * s.w / s.n * th))
    if d > 0:
        n_eff = pbar * (1.0 - pbar) / d
    else:
        n_eff = float(np.sum(s.n))
    return KGEffective(n_eff, n_eff * pbar)


def kg_cds(s: StratifiedSample) -> tuple[ConfDist, ConfDist]:
    """Clopper-Pearson style beta distributions at the effective count.

    When every sampled unit is positive the effective size collapses to 0 and
    both parameters degenerate; the pair is then (point 0, point 1) and a
    ``UserWarning`` is issued.
    """
    n_eff, x_eff = kg_effective(s)
    if n_eff <= 0:
        warnings.warn(
            "effective sample size is 0 (all sampled units positive); "
            "using the uninformative pair (0, 1)",
            UserWarning,
            stacklevel=2,
        )
        return pointmass(0.0), pointmass(1.0)
    # n_eff - x_eff = n_eff * (1 - pbar) can lose its last bits; keep it >= 0.
    rest = max(n_eff - x_eff, 0.0)
    return beta(x_eff, rest + 1.0), beta(x_eff + 1.0, rest)
