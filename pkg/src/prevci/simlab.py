"""Coverage simulations for the prevalence interval methods.

A scenario fixes the true prevalence, the sampling layout, how the weights
vary and where the positives sit, plus the assay's sensitivity and
specificity. Each replicate draws stratum counts and control-sample counts,
computes every requested interval and classifies it against the truth.

All randomness comes from streams keyed by ``(seed, purpose, weight set,
replicate)``, so results are bit-identical for any worker count and adding a
method never perturbs the simulated data.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from .confdist import BinomialCount, StratifiedSample
from .distkit import RngStream, derive_stream_id
from .estimate import AssayCalibration
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

__all__ = [
    "InfeasibleScenarioError",
    "ScenarioSpec",
    "MethodMetrics",
    "SimResult",
    "METHODS",
    "gen_weights",
    "weight_cv",
    "assign_prevalence",
    "simulate_replicates",
    "scenario_strata",
    "run_scenario",
    "run_study",
]

PLACEMENTS = ("highest", "lowest", "uniform", "random")

COVERED, LOWER_ERROR, UPPER_ERROR, FAILED = 0, 1, 2, 3


class InfeasibleScenarioError(ValueError):
    """The requested weights or prevalence placement cannot be realized."""


def _srs_only(fn):
    def run(s: StratifiedSample, a: AssayCalibration, alpha: float, mc: MCConfig) -> Interval:
        if s.K != 1:
            raise ValueError("method requires a simple random sample (one stratum)")
        return fn(BinomialCount(int(s.x[0]), int(s.n[0])), a, alpha, mc)

    return run


METHODS: dict[str, Callable[[StratifiedSample, AssayCalibration, float, MCConfig], Interval]] = {
    "cp": _srs_only(lambda c, a, alpha, mc: clopper_pearson(c, alpha)),
    "meld-srs": _srs_only(meld_srs_sesp),
    "lr": _srs_only(lambda c, a, alpha, mc: lang_reiczigel(c, a, alpha)),
    "wspoisson": lambda s, a, alpha, mc: ws_poisson_interval(s, alpha),
    "dpac": lambda s, a, alpha, mc: dpac_interval(s, alpha),
    "kg": lambda s, a, alpha, mc: kg_interval(s, alpha),
    "wprev-poisson": wprev_sesp_poisson,
    "wprev-binomial": wprev_sesp_binomial,
}


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario.

    ``cv_target`` is the coefficient of variation of the stratum weights. With
    ``weight_sets > 1`` the weight sets span an even grid of targets over
    ``[0, cv_target]``. ``placement`` chooses which strata carry the
    prevalence: the ``highest`` or ``lowest`` weights, ``uniform`` (evenly
    spaced by weight rank) or ``random`` (a seeded random subset).
    """

    prevalence: float
    n_strata: int
    stratum_size: int
    cv_target: float = 0.0
    nonzero_fraction: float = 1.0
    placement: str = "highest"
    sensitivity: float = 1.0
    specificity: float = 1.0
    m_p: int = 60
    m_n: int = 300
    alpha: float = 0.05
    replicates: int = 1000
    seed: int = 0
    methods: tuple[str, ...] = ("wspoisson",)
    mc_samples: int = 10_000
    weight_sets: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if not 0 <= self.prevalence <= 1:
            raise ValueError("prevalence must lie in [0, 1]")
        if self.n_strata < 1 or self.stratum_size < 1:
            raise ValueError("n_strata and stratum_size must be positive")
        if not 0 < self.nonzero_fraction <= 1:
            raise ValueError("nonzero_fraction must lie in (0, 1]")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")
        for name in ("sensitivity", "specificity"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.m_p < 1 or self.m_n < 1:
            raise ValueError("control sample sizes must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.replicates < 1 or self.weight_sets < 1:
            raise ValueError("replicates and weight_sets must be positive")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ValueError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
        RngStream(self.seed)
        MCConfig(self.mc_samples, 0)
        if self.cv_target < 0:
            raise ValueError("cv_target must be nonnegative")
        if self.n_strata == 1 and self.cv_target > 0:
            raise InfeasibleScenarioError("a single stratum has no weight variation")
        if self.n_strata > 1 and self.cv_target**2 >= self.n_strata - 1:
            raise InfeasibleScenarioError(
                f"cv_target {self.cv_target} needs cv^2 < n_strata - 1 = {self.n_strata - 1}"
            )

    @property
    def phi_n(self) -> float:
        return 1.0 - self.specificity

    def cv_grid(self) -> np.ndarray:
        if self.weight_sets == 1:
            return np.array([self.cv_target])
        return np.linspace(0.0, self.cv_target, self.weight_sets)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        """Strict constructor: unknown keys raise ``KeyError``."""
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise KeyError(f"unknown scenario keys: {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


@dataclass(frozen=True)
class MethodMetrics:
    covered: int
    lower_errors: int
    upper_errors: int
    failures: int
    mean_width: float
    failure_messages: tuple[str, ...] = ()

    @property
    def n_ok(self) -> int:
        return self.covered + self.lower_errors + self.upper_errors

    def _frac(self, k: int) -> float:
        return k / self.n_ok if self.n_ok else math.nan

    @property
    def coverage(self) -> float:
        return self._frac(self.covered)

    @property
    def lower_error(self) -> float:
        return self._frac(self.lower_errors)

    @property
    def upper_error(self) -> float:
        return self._frac(self.upper_errors)

    @property
    def mc_se(self) -> float:
        """Monte Carlo standard error of the coverage estimate."""
        c = self.coverage
        return math.sqrt(c * (1 - c) / self.n_ok) if self.n_ok else math.nan


@dataclass(frozen=True)
class SimResult:
    weight_set: int
    cv_target: float
    cv_actual: float
    seed: int
    replicates: int
    methods: dict[str, MethodMetrics] = field(default_factory=dict)

    def __getitem__(self, method: str) -> MethodMetrics:
        return self.methods[method]


def gen_weights(K: int, v: float, rng: RngStream | np.random.Generator) -> np.ndarray:
    """``K`` normalized weights whose coefficient of variation is about ``v``.

    Draws from Beta(a, (K-1) a) with ``a = (K - 1 - v^2) / (K v^2)``, whose
    mean is 1/K and CV is exactly ``v``, then rescales to sum 1.
    """
    if K < 2:
        raise ValueError("need at least two weights")
    if v < 0:
        raise ValueError("cv target must be nonnegative")
    if v == 0:
        return np.full(K, 1.0 / K)
    if v * v >= K - 1:
        raise InfeasibleScenarioError(f"cv {v} is infeasible for {K} weights (needs cv^2 < {K - 1})")
    with np.errstate(over="ignore", divide="ignore"):
        a = np.float64(K - 1 - v * v) / np.float64(K * v * v)
    if not np.isfinite(a):
        # v^2 underflows; the Beta law has collapsed onto 1/K
        return np.full(K, 1.0 / K)
    b = (K - 1) * a
    gen = rng if isinstance(rng, np.random.Generator) else rng.generator()
    w = gen.beta(a, b, size=K)
    # tiny shapes can underflow to exactly 0; weights must stay positive
    np.maximum(w, np.finfo(float).tiny, out=w)
    return w / np.sum(w)


def weight_cv(w: Sequence[float]) -> float:
    """Coefficient of variation (population standard deviation over mean)."""
    w = np.asarray(w, dtype=float)
    return float(np.std(w) / np.mean(w))


def assign_prevalence(
    weights: Sequence[float],
    p: float,
    fraction: float,
    placement: str,
    rng: RngStream | np.random.Generator | None = None,
) -> np.ndarray:
    """Per-stratum prevalences with ``sum(w * theta) == p`` on a chosen subset.

    ``ceil(fraction * K)`` strata get the common value ``p / sum(w_selected)``
    and the rest get 0.
    """
    w = np.asarray(weights, dtype=float)
    K = w.size
    k = min(max(math.ceil(fraction * K - 1e-9), 1), K)
    if placement not in PLACEMENTS:
        raise ValueError(f"unknown placement {placement!r}")
    ascending = np.argsort(w, kind="stable")
    if placement == "highest":
        sel = ascending[::-1][:k]
    elif placement == "lowest":
        sel = ascending[:k]
    elif placement == "uniform":
        ranks = np.floor((np.arange(k) + 0.5) * K / k).astype(int)
        sel = ascending[ranks]
    else:
        if rng is None:
            raise ValueError("random placement needs an rng")
        gen = rng if isinstance(rng, np.random.Generator) else rng.generator()
        sel = gen.choice(K, size=k, replace=False)
    theta = np.zeros(K)
    if k == K:
        theta[:] = p
        return theta
    common = p / float(np.sum(w[sel]))
    if common > 1 + 1e-12:
        raise InfeasibleScenarioError(
            f"placing prevalence {p} on {k} {placement} strata needs theta={common:.4g} > 1"
        )
    theta[sel] = min(common, 1.0)
    return theta


def _classify(iv: Interval, truth: float) -> int:
    if iv.lower > truth:
        return LOWER_ERROR
    if iv.upper < truth:
        return UPPER_ERROR
    return COVERED


def _replicate_block(args) -> tuple[np.ndarray, np.ndarray, list[list[str]]]:
    (w, theta, sizes, truth, sens, phi_n, m_p, m_n, alpha, mc_samples, methods, seed, set_idx, reps) = args
    status = np.empty((len(reps), len(methods)), dtype=np.int8)
    width = np.full((len(reps), len(methods)), np.nan)
    errors: list[list[str]] = [[] for _ in methods]
    apparent = theta * sens + (1 - theta) * phi_n
    for i, r in enumerate(reps):
        gen = RngStream(seed, derive_stream_id("data", set_idx, r)).generator()
        x = gen.binomial(sizes, apparent)
        c_p = int(gen.binomial(m_p, sens))
        c_n = int(gen.binomial(m_n, phi_n))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = StratifiedSample(w, sizes, x)
        calib = AssayCalibration(c_n, m_n, c_p, m_p)
        mc = MCConfig(mc_samples, derive_stream_id("mc", seed, set_idx, r))
        for j, m in enumerate(methods):
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    iv = METHODS[m](s, calib, alpha, mc)
            except Exception as exc:  # recorded per method, never dropped
                status[i, j] = FAILED
                errors[j].append(f"replicate {r}: {type(exc).__name__}: {exc}")
                continue
            status[i, j] = _classify(iv, truth)
            width[i, j] = iv.width
    return status, width, errors


def simulate_replicates(
    weights: Sequence[float],
    thetas: Sequence[float],
    sizes: Sequence[int],
    *,
    truth: float,
    methods: Iterable[str],
    sensitivity: float = 1.0,
    specificity: float = 1.0,
    m_p: int = 60,
    m_n: int = 300,
    alpha: float = 0.05,
    replicates: int = 1000,
    seed: int = 0,
    mc_samples: int = 10_000,
    weight_set: int = 0,
    workers: int = 1,
    chunk: int = 50,
) -> dict[str, MethodMetrics]:
    """Simulate ``replicates`` data sets for fixed strata and score each method.

    Strata are put in a canonical order (by weight, prevalence, size) before
    any draws, so the result does not depend on how the caller ordered them.
    """
    methods = tuple(methods)
    w = np.asarray(weights, dtype=float)
    theta = np.asarray(thetas, dtype=float)
    n = np.broadcast_to(np.asarray(sizes, dtype=np.int64), w.shape).copy()
    order = np.lexsort((n, theta, w))
    w, theta, n = w[order], theta[order], n[order]
    common = (w, theta, n, truth, sensitivity, 1.0 - specificity, m_p, m_n, alpha, mc_samples, methods, seed, weight_set)
    blocks = [tuple(range(s, min(s + chunk, replicates))) for s in range(0, replicates, chunk)]
    jobs = [common + (b,) for b in blocks]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_replicate_block, jobs))
    else:
        results = [_replicate_block(j) for j in jobs]
    status = np.concatenate([r[0] for r in results])
    width = np.concatenate([r[1] for r in results])
    out = {}
    for j, m in enumerate(methods):
        st = status[:, j]
        ok = st != FAILED
        msgs = tuple(msg for r in results for msg in r[2][j])
        out[m] = MethodMetrics(
            covered=int(np.sum(st == COVERED)),
            lower_errors=int(np.sum(st == LOWER_ERROR)),
            upper_errors=int(np.sum(st == UPPER_ERROR)),
            failures=int(np.sum(~ok)),
            mean_width=math.fsum(width[ok, j]) / int(np.sum(ok)) if ok.any() else math.nan,
            failure_messages=msgs,
        )
    return out


def scenario_strata(spec: ScenarioSpec, weight_set: int = 0, cv: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Weights and per-stratum prevalences for one weight set of ``spec``."""
    cv = spec.cv_grid()[weight_set] if cv is None else cv
    stream = RngStream(spec.seed, derive_stream_id("weights", weight_set))
    K = spec.n_strata
    w = np.ones(1) if K == 1 else gen_weights(K, float(cv), stream)
    theta = assign_prevalence(
        w, spec.prevalence, spec.nonzero_fraction, spec.placement,
        RngStream(spec.seed, derive_stream_id("placement", weight_set)),
    )
    return w, theta


def run_scenario(
    spec: ScenarioSpec,
    methods: Iterable[str] | None = None,
    *,
    weight_set: int = 0,
    workers: int = 1,
) -> SimResult:
    """Coverage, error and width metrics for one weight set of ``spec``."""
    methods = tuple(methods) if methods is not None else spec.methods
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}")
    cv = float(spec.cv_grid()[weight_set])
    w, theta = scenario_strata(spec, weight_set, cv)
    metrics = simulate_replicates(
        w, theta, spec.stratum_size,
        truth=spec.prevalence,
        methods=methods,
        sensitivity=spec.sensitivity,
        specificity=spec.specificity,
        m_p=spec.m_p,
        m_n=spec.m_n,
        alpha=spec.alpha,
        replicates=spec.replicates,
        seed=spec.seed,
        mc_samples=spec.mc_samples,
        weight_set=weight_set,
        workers=workers,
    )
    cv_actual = weight_cv(w) if w.size > 1 else 0.0
    return SimResult(weight_set, cv, cv_actual, spec.seed, spec.replicates, metrics)


def run_study(spec: ScenarioSpec, *, workers: int = 1) -> list[SimResult]:
    return [run_scenario(spec, weight_set=i, workers=workers) for i in range(spec.weight_sets)]
