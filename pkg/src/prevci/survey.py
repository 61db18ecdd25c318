"""Per-individual survey weights under the multinomial/Poisson sampling model.

Every estimator here works from the *expectation-one* weights
``e_i = 1 / (n N p_i)``, which make the prevalence estimate a weighted sum of
Poisson-like indicators. When a frame carries raw weights instead of
selection probabilities, ``e_i`` is the raw weight rescaled to sum to 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .confdist import StratifiedSample

__all__ = [
    "SurveyFrame",
    "expectation_one_weights",
    "normalized_weights",
    "traditional_weights",
    "beta_hat_multinomial",
    "var_multinomial",
    "var_poisson",
]


@dataclass(frozen=True, eq=False, init=False)
class SurveyFrame:
    """Sampled individuals with a binary outcome.

    Exactly one of ``weight_raw`` and ``selection_prob`` is given.
    ``population_size`` is required with selection probabilities.
    """

    y: np.ndarray
    weight_raw: Optional[np.ndarray]
    selection_prob: Optional[np.ndarray]
    population_size: Optional[int]

    def __init__(
        self,
        y: Sequence[int],
        weight_raw: Sequence[float] | None = None,
        selection_prob: Sequence[float] | None = None,
        population_size: int | None = None,
    ):
        y = np.asarray(y, dtype=np.int64).ravel()
        if y.size == 0:
            raise ValueError("a survey frame needs at least one record")
        if np.any((y != 0) & (y != 1)):
            raise ValueError("outcomes must be 0 or 1")
        if (weight_raw is None) == (selection_prob is None):
            raise ValueError("give exactly one of weight_raw and selection_prob")
        if weight_raw is not None:
            weight_raw = np.asarray(weight_raw, dtype=float).ravel()
            if weight_raw.size != y.size:
                raise ValueError("weight_raw and y must have equal lengths")
            if not np.all(np.isfinite(weight_raw)) or np.any(weight_raw <= 0):
                raise ValueError("raw weights must be positive and finite")
        else:
            selection_prob = np.asarray(selection_prob, dtype=float).ravel()
            if selection_prob.size != y.size:
                raise ValueError("selection_prob and y must have equal lengths")
            if np.any(~(selection_prob > 0)) or np.any(selection_prob > 1):
                raise ValueError("selection probabilities must lie in (0, 1]")
            if population_size is None:
                raise ValueError("population_size is required with selection probabilities")
            if population_size < 1:
                raise ValueError("population_size must be positive")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "weight_raw", weight_raw)
        object.__setattr__(self, "selection_prob", selection_prob)
        object.__setattr__(self, "population_size", population_size)

    @property
    def n(self) -> int:
        return int(self.y.size)


def expectation_one_weights(f: SurveyFrame) -> np.ndarray:
    """``1 / (n N p_i)``, or the rescaled raw weights."""
    if f.selection_prob is not None:
        return 1.0 / (f.n * f.population_size * f.selection_prob)
    return f.weight_raw / np.sum(f.weight_raw)


def traditional_weights(f: SurveyFrame, scaled: bool = False) -> np.ndarray:
    """Population-count weights ``1 / (n p_i)``; ``scaled`` forces their sum to N.

    Diagnostic only, no interval uses them.
    """
    if f.selection_prob is None:
        raise ValueError("traditional weights need selection probabilities")
    w = 1.0 / (f.n * f.selection_prob)
    if scaled:
        w = f.population_size * w / np.sum(w)
    return w


def normalized_weights(f: SurveyFrame) -> StratifiedSample:
    """One stratum of size 1 per individual with weights summing exactly to 1."""
    e = expectation_one_weights(f)
    return StratifiedSample(e / np.sum(e), np.ones(f.n, dtype=np.int64), f.y)


def beta_hat_multinomial(f: SurveyFrame) -> float:
    return float(np.sum(expectation_one_weights(f) * f.y))


def var_multinomial(f: SurveyFrame) -> float:
    """With-replacement variance estimate ``sum((y_i/(N p_i) - beta_hat)^2) / (n(n-1))``."""
    n = f.n
    if n < 2:
        raise ValueError("the multinomial variance needs at least two records")
    e = expectation_one_weights(f)
    b = float(np.sum(e * f.y))
    return float(np.sum((n * e * f.y - b) ** 2) / (n * (n - 1)))


def var_poisson(f: SurveyFrame) -> float:
    """Poisson-model variance estimate ``sum(y_i / (n N p_i)^2)``."""
    e = expectation_one_weights(f)
    return float(np.sum(e * e * f.y))
