"""Point estimators and the misclassification correction map ``g``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .confdist import BinomialCount, StratifiedSample

__all__ = [
    "AssayCalibration",
    "PrevalenceEstimate",
    "g",
    "apparent_prevalence",
    "beta_star_plugin",
]


@dataclass(frozen=True)
class AssayCalibration:
    """Control-sample counts for the assay.

    ``c_n`` of ``m_n`` negative controls tested positive (so ``c_n / m_n``
    estimates one minus specificity) and ``c_p`` of ``m_p`` positive controls
    tested positive (sensitivity).
    """

    c_n: int
    m_n: int
    c_p: int
    m_p: int

    def __post_init__(self):
        if self.m_n < 1 or self.m_p < 1:
            raise ValueError("control sample sizes must be at least 1")
        if not 0 <= self.c_n <= self.m_n:
            raise ValueError(f"c_n must lie in [0, m_n], got {self.c_n}/{self.m_n}")
        if not 0 <= self.c_p <= self.m_p:
            raise ValueError(f"c_p must lie in [0, m_p], got {self.c_p}/{self.m_p}")

    @classmethod
    def perfect(cls, m: int = 1) -> "AssayCalibration":
        return cls(0, m, m, m)

    @property
    def phi_n_hat(self) -> float:
        return self.c_n / self.m_n

    @property
    def phi_p_hat(self) -> float:
        return self.c_p / self.m_p

    @property
    def negatives(self) -> BinomialCount:
        return BinomialCount(self.c_n, self.m_n)

    @property
    def positives(self) -> BinomialCount:
        return BinomialCount(self.c_p, self.m_p)


@dataclass(frozen=True)
class PrevalenceEstimate:
    apparent: float
    corrected: float
    method: str = "plugin"


def g(theta_hat, phi_n_hat, phi_p_hat):
    """Misclassification-corrected prevalence.

    Piecewise: 1 when ``phi_n < phi_p < theta``; ``(theta - phi_n) /
    (phi_p - phi_n)`` when ``phi_p >= theta >= phi_n`` (with 0/0 taken as 0);
    0 otherwise. Broadcasts over numpy arrays; scalar inputs give a float.

    >>> g(0.10, 0.02, 0.98)
    0.08333333333333334
    """
    th = np.asarray(theta_hat, dtype=float)
    pn = np.asarray(phi_n_hat, dtype=float)
    pp = np.asarray(phi_p_hat, dtype=float)
    th, pn, pp = np.broadcast_arrays(th, pn, pp)
    out = np.zeros(th.shape)
    mid = (pp >= th) & (th >= pn)
    denom = pp - pn
    ok = mid & (denom > 0)
    np.divide(th - pn, denom, out=out, where=ok)
    out[(pn < pp) & (pp < th)] = 1.0
    # rounding in the ratio may step a hair past 1
    np.clip(out, 0.0, 1.0, out=out)
    if out.ndim == 0:
        return float(out)
    return out


def apparent_prevalence(s: StratifiedSample) -> float:
    """Weighted mean of the stratum positive fractions."""
    return float(np.sum(s.w * s.theta_hat))


def beta_star_plugin(s: StratifiedSample, a: AssayCalibration) -> PrevalenceEstimate:
    app = apparent_prevalence(s)
    return PrevalenceEstimate(app, g(app, a.phi_n_hat, a.phi_p_hat))
