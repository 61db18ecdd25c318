"""Confidence intervals for prevalence from surveys with imperfect assays."""

from .confdist import BinomialCount, StratifiedSample
from .distkit import ConfDist, RngStream
from .estimate import AssayCalibration, apparent_prevalence, beta_star_plugin, g
from .intervals import (
    Interval,
    MCConfig,
    clopper_pearson,
    dpac_interval,
    kg_interval,
    lang_reiczigel,
    meld_srs_sesp,
    wprev_sesp_binomial,
    wprev_sesp_poisson,
    ws_poisson_interval,
)
from .survey import SurveyFrame, normalized_weights

__version__ = "0.1.0"

__all__ = [
    "AssayCalibration",
    "BinomialCount",
    "ConfDist",
    "Interval",
    "MCConfig",
    "RngStream",
    "StratifiedSample",
    "SurveyFrame",
    "apparent_prevalence",
    "beta_star_plugin",
    "clopper_pearson",
    "dpac_interval",
    "g",
    "kg_interval",
    "lang_reiczigel",
    "meld_srs_sesp",
    "normalized_weights",
    "wprev_sesp_binomial",
    "wprev_sesp_poisson",
    "ws_poisson_interval",
]
