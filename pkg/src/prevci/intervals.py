"""Confidence interval procedures for prevalence.

Simple random samples: :func:`clopper_pearson`, :func:`meld_srs_sesp`,
:func:`lang_reiczigel`. Weighted samples with a perfect assay:
:func:`ws_poisson_interval`, :func:`dpac_interval`, :func:`kg_interval`.
Weighted samples with an imperfect assay: :func:`wprev_sesp_poisson`,
:func:`wprev_sesp_binomial`.

The melded intervals take Monte Carlo quantiles of ``g`` applied to draws
from independent confidence distributions. Every (bound, component) pair
gets its own random stream, so a bound depends only on the seed and the
sample count, never on evaluation order or on ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from .confdist import (
    BinomialCount,
    StratifiedSample,
    binom_lower_cd,
    binom_upper_cd,
    kg_cds,
    kg_effective,
    ws_poisson_cds,
)
from .distkit import ConfDist, RngStream, derive_stream_id, draw, empirical_quantile, quantile
from .estimate import AssayCalibration, g

__all__ = [
    "Interval",
    "MCConfig",
    "DegenerateAssayError",
    "clopper_pearson",
    "meld",
    "meld_srs_sesp",
    "lang_reiczigel",
    "ws_poisson_interval",
    "dpac_interval",
    "kg_interval",
    "wprev_sesp_poisson",
    "wprev_sesp_binomial",
]

DEFAULT_MC_SAMPLES = 100_000


class DegenerateAssayError(ValueError):
    """Adjusted sensitivity does not exceed adjusted false-positive rate."""


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    alpha: float
    method: str
    diagnostics: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise ValueError(f"invalid interval bounds ({self.lower}, {self.upper})")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __contains__(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings for the melded intervals."""

    samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1000:
            raise ValueError(f"need at least 1000 Monte Carlo samples, got {self.samples}")
        RngStream(self.seed)  # validates the 64-bit range

    def stream(self, *keys: object) -> RngStream:
        return RngStream(self.seed, derive_stream_id(*keys))


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _clip01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def _z(alpha: float) -> float:
    return float(stats.norm.ppf(1 - alpha / 2))


def clopper_pearson(c: BinomialCount, alpha: float = 0.05) -> Interval:
    _check_alpha(alpha)
    lo = quantile(binom_lower_cd(c), alpha / 2)
    hi = quantile(binom_upper_cd(c), 1 - alpha / 2)
    return Interval(lo, hi, alpha, "cp")


def _melded_draws(cds: tuple[ConfDist, ConfDist, ConfDist], bound: str, mc: MCConfig) -> np.ndarray:
    prev, neg, pos = cds
    samples = mc.samples
    t = draw(prev, samples, mc.stream("meld", bound, "prevalence"))
    if prev.kind == "gamma":
        # gamma support is unbounded; g is defined on [0, 1]
        np.minimum(t, 1.0, out=t)
    n = draw(neg, samples, mc.stream("meld", bound, "phi_n"))
    p = draw(pos, samples, mc.stream("meld", bound, "phi_p"))
    return g(t, n, p)


def meld(
    lower_cds: tuple[ConfDist, ConfDist, ConfDist],
    upper_cds: tuple[ConfDist, ConfDist, ConfDist],
    alpha: float,
    mc: MCConfig,
    method: str = "meld",
) -> Interval:
    """Melded interval from (prevalence, phi_n, phi_p) confidence distributions.

    ``lower_cds`` should hold the lower distribution for prevalence and the
    upper ones for both assay rates (``g`` decreases in them); ``upper_cds``
    the reverse.
    """
    _check_alpha(alpha)
    lo_draws = _melded_draws(lower_cds, "lower", mc)
    hi_draws = _melded_draws(upper_cds, "upper", mc)
    lo = empirical_quantile(lo_draws, alpha / 2)
    hi = empirical_quantile(hi_draws, 1 - alpha / 2)
    return Interval(lo, hi, alpha, method, {"mc_samples": mc.samples, "seed": mc.seed})


def meld_srs_sesp(c: BinomialCount, a: AssayCalibration, alpha: float = 0.05, mc: MCConfig | None = None) -> Interval:
    """Melded interval for a simple random sample tested with an imperfect assay."""
    mc = mc or MCConfig()
    lower = (binom_lower_cd(c), binom_upper_cd(a.negatives), binom_upper_cd(a.positives))
    upper = (binom_upper_cd(c), binom_lower_cd(a.negatives), binom_lower_cd(a.positives))
    return meld(lower, upper, alpha, mc, "meld-srs")


LR_VARIANCE_FORMS = ("source", "complement", "literal")


def lang_reiczigel(
    c: BinomialCount,
    a: AssayCalibration,
    alpha: float = 0.05,
    variance: str = "source",
) -> Interval:
    """Adjusted Wald interval for true prevalence with estimated Se/Sp.

    Counts are shifted before use: controls get +1 positive and +2 trials,
    and the survey proportion becomes ``(x + z^2/2) / (n + z^2)``. The
    interval is ``b + d_beta +/- z * sqrt(var)`` clipped to [0, 1].

    ``variance`` selects the variance expression:

    ``"source"`` (default)
        apparent-prevalence binomial term over ``n + z^2``, control terms
        over the shifted control sizes, specificity term weighted by
        ``(1 - b)^2``.
    ``"complement"``
        binomial term ``b (1 - b) / n`` and unshifted control sizes, with
        ``(1 - b)^2`` on the specificity term.
    ``"literal"``
        as ``"complement"`` but with ``(1 + b)^2`` on the specificity term.

    The last two undercover badly in simulation and are kept for
    comparison only. A negative variance (possible when the adjusted
    prevalence falls below zero) is floored at 0.
    """
    _check_alpha(alpha)
    if variance not in LR_VARIANCE_FORMS:
        raise ValueError(f"variance must be one of {LR_VARIANCE_FORMS}, got {variance!r}")
    z = _z(alpha)
    z2 = z * z
    mp2 = a.m_p + 2
    mn2 = a.m_n + 2
    phi_p = (a.c_p + 1) / mp2
    phi_n = 1 - ((a.m_n - a.c_n) + 1) / mn2
    denom = phi_p - phi_n
    if not denom > 0:
        raise DegenerateAssayError(
            f"adjusted sensitivity {phi_p:.6g} does not exceed adjusted false-positive rate {phi_n:.6g}"
        )
    app = (c.x + z2 / 2) / (c.n + z2)
    b = (app - phi_n) / denom
    sp_term = phi_p * (1 - phi_p)
    sn_term = (1 - phi_n) * phi_n
    d_beta = 2 * z2 * (b * sp_term / mp2 - (1 - b) * sn_term / mn2)
    if variance == "source":
        num = app * (1 - app) / (c.n + z2) + b * b * sp_term / mp2 + (1 - b) ** 2 * sn_term / mn2
    else:
        spec_coef = (1 + b) ** 2 if variance == "literal" else (1 - b) ** 2
        num = b * (1 - b) / c.n + b * b * sp_term / a.m_p + spec_coef * sn_term / a.m_n
    var = num / denom**2
    warns = []
    if var < 0:
        warns.append(f"negative variance {var:.3g} floored at 0")
        var = 0.0
    half = z * math.sqrt(var)
    center = b + d_beta
    lo = _clip01(center - half)
    hi = _clip01(center + half)
    return Interval(lo, hi, alpha, "lr", {"variance_form": variance, "warnings": warns})


def ws_poisson_interval(s: StratifiedSample, alpha: float = 0.05) -> Interval:
    """Gamma interval for a weighted sum of Poisson rates."""
    _check_alpha(alpha)
    lower, upper = ws_poisson_cds(s)
    lo = quantile(lower, alpha / 2)
    hi = min(1.0, quantile(upper, 1 - alpha / 2))
    return Interval(min(lo, 1.0), hi, alpha, "wspoisson")


def dpac_interval(s: StratifiedSample, alpha: float = 0.05) -> Interval:
    """Agresti-Coull style interval at the survey effective sample size."""
    _check_alpha(alpha)
    z = _z(alpha)
    c = z * z / 2
    n_eff, x_eff = kg_effective(s)
    n_t = n_eff + 2 * c
    p_t = (x_eff + c) / n_t
    half = z * math.sqrt(p_t * (1 - p_t) / n_t)
    return Interval(_clip01(p_t - half), _clip01(p_t + half), alpha, "dpac", {"n_eff": n_eff})


def kg_interval(s: StratifiedSample, alpha: float = 0.05) -> Interval:
    """Clopper-Pearson style beta interval (KG) at the effective sample size."""
    _check_alpha(alpha)
    lower, upper = kg_cds(s)
    n_eff, _ = kg_effective(s)
    return Interval(quantile(lower, alpha / 2), quantile(upper, 1 - alpha / 2), alpha, "kg", {"n_eff": n_eff})


def wprev_sesp_poisson(s: StratifiedSample, a: AssayCalibration, alpha: float = 0.05, mc: MCConfig | None = None) -> Interval:
    """Melded interval: gamma prevalence distributions with beta assay distributions."""
    mc = mc or MCConfig()
    g_lo, g_hi = ws_poisson_cds(s)
    lower = (g_lo, binom_upper_cd(a.negatives), binom_upper_cd(a.positives))
    upper = (g_hi, binom_lower_cd(a.negatives), binom_lower_cd(a.positives))
    return meld(lower, upper, alpha, mc, "wprev-poisson")


def wprev_sesp_binomial(s: StratifiedSample, a: AssayCalibration, alpha: float = 0.05, mc: MCConfig | None = None) -> Interval:
    """Melded interval: effective-size beta prevalence distributions with beta assay distributions."""
    mc = mc or MCConfig()
    b_lo, b_hi = kg_cds(s)
    lower = (b_lo, binom_upper_cd(a.negatives), binom_upper_cd(a.positives))
    upper = (b_hi, binom_lower_cd(a.negatives), binom_lower_cd(a.positives))
    return meld(lower, upper, alpha, mc, "wprev-binomial")
