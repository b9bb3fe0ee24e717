"""Tests of practically sufficient follow-up across covariate levels.

For each level the statistic is the smoothed Grenander density at the largest
observed time minus ``epsilon * F(y_max) / (tau - y_max)``; small values are
evidence of sufficient follow-up. Method 1 rejects the overall null only when
every level rejects. Method 2 picks the level whose bootstrap statistic has
the largest upper quantile and uses that level's decision.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_fraction, check_positive_int, split_target
from .bootstrap import BootstrapConfig, BootstrapDraws, bootstrap_distributions, prepare_sampler
from .exceptions import ConfigError
from .monotone import LevelFit, fit_level
from .survival import SurvivalDataset, partition


def order_statistic_quantile(values, q):
    """q-quantile as the ceil(q*B)-th smallest value (ceil(0) -> 1)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    B = v.shape[0]
    # guard against q*B landing a hair above an integer in floating point
    k = max(1, math.ceil(round(q * B, 9)))
    return float(v[min(k, B) - 1])


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # not a pytest class

    epsilon: float = 0.01
    tau: float = math.inf
    alpha: float = 0.05
    gamma: float = 0.025
    a_x: float = 0.0
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)

    def __post_init__(self):
        check_fraction(self.epsilon, "epsilon")
        check_fraction(self.alpha, "alpha")
        check_fraction(self.gamma, "gamma")
        if not (isinstance(self.tau, (int, float)) and self.tau > 0):
            raise ConfigError("tau must be a positive number")
        if self.a_x < 0:
            raise ConfigError("a_x must be non-negative")


@dataclass
class LevelResult:
    level: int
    label: str
    n_x: int
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    upper_quantile: float
    f_hat: float
    f_hat_boot: float
    F_hat_at_ymax: float
    y_max: float
    y_max_uncensored: float
    bandwidth: float
    bandwidth_boot: float
    bootstrap_retries: int = 0


@dataclass
class TestReport:
    __test__ = False

    levels: list
    method1_reject: bool
    method1_p: float
    method2_selected_level: int
    method2_reject: bool
    method2_p: float

    @property
    def method2_selected_label(self):
        return self.levels[self.method2_selected_level].label

    def to_dict(self):
        d = asdict(self)
        d["method2_selected_label"] = self.method2_selected_label
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            levels=[LevelResult(**lv) for lv in d["levels"]],
            method1_reject=d["method1_reject"],
            method1_p=d["method1_p"],
            method2_selected_level=d["method2_selected_level"],
            method2_reject=d["method2_reject"],
            method2_p=d["method2_p"],
        )


def statistic(fit: LevelFit, epsilon, tau):
    """Penalised endpoint density: f_hat(y_max) - epsilon * F_hat(y_max) / (tau - y_max)."""
    if not tau > fit.y_max:
        raise ConfigError("tau must exceed the largest observed time")
    return fit.f_hat - epsilon * fit.F_at_ymax / (tau - fit.y_max)


def p_value(stat, d_star):
    d_star = np.asarray(d_star)
    return (1.0 + np.count_nonzero(d_star <= stat)) / (d_star.shape[0] + 1.0)


def individual_test(level, fit: LevelFit, config: TestConfig, draws: BootstrapDraws,
                    label=None) -> LevelResult:
    stat = statistic(fit, config.epsilon, config.tau)
    d_star = draws.D_star[level]
    p = p_value(stat, d_star)
    return LevelResult(
        level=int(level),
        label=str(level) if label is None else label,
        n_x=fit.n_x,
        statistic=float(stat),
        critical_value=order_statistic_quantile(d_star, config.alpha),
        p_value=float(p),
        reject=bool(p < config.alpha),
        upper_quantile=order_statistic_quantile(draws.T_star[level], 1.0 - config.gamma),
        f_hat=float(fit.f_hat),
        f_hat_boot=float(fit.f_hat_boot),
        F_hat_at_ymax=fit.F_at_ymax,
        y_max=fit.y_max,
        y_max_uncensored=fit.y_max_uncensored,
        bandwidth=fit.bandwidths.b_x,
        bandwidth_boot=fit.bandwidths.b0_x,
        bootstrap_retries=int(draws.retries.get(level, 0)),
    )


def method1(results):
    """Intersection-union combination: (reject, p) = (all reject, max p)."""
    return all(r.reject for r in results), max(r.p_value for r in results)


def select_level(results):
    """Index into ``results`` of the largest upper bootstrap quantile; ties go to the first."""
    best = 0
    for i, r in enumerate(results):
        if r.upper_quantile > results[best].upper_quantile:
            best = i
    return best


def method2(results):
    """(selected index, reject, p) of the selected level's individual test."""
    i = select_level(results)
    return i, results[i].reject, results[i].p_value


def fit_levels(dataset: SurvivalDataset, a_x=0.0, levels=None):
    groups = partition(dataset)
    if levels is None:
        levels = sorted(groups)
    fits = {}
    for lev in levels:
        idx = groups[lev]
        fits[lev] = fit_level(dataset.time[idx], dataset.event[idx], a_x)
    return fits


def run_tests(dataset: SurvivalDataset, config: TestConfig, workers=1,
              case=0, replication=0, levels=None) -> TestReport:
    """Individual tests for every level plus the Method 1 and Method 2 verdicts."""
    fits = fit_levels(dataset, config.a_x, levels)
    for lev, fit in fits.items():
        if not config.tau > fit.y_max:
            raise ConfigError(
                f"tau={config.tau} must exceed the largest observed time "
                f"{fit.y_max} of level {dataset.labels[lev]!r}")
    samplers = {lev: prepare_sampler(fit, config.bootstrap.grid_size)
                for lev, fit in fits.items()}
    draws = bootstrap_distributions(samplers, config.bootstrap, config.epsilon, config.tau,
                                    case=case, replication=replication, workers=workers)
    results = [individual_test(lev, fits[lev], config, draws, dataset.labels[lev])
               for lev in sorted(fits)]
    m1_reject, m1_p = method1(results)
    sel, m2_reject, m2_p = method2(results)
    return TestReport(results, m1_reject, m1_p, sel, m2_reject, m2_p)


class SufficientFollowUpTest(BaseEstimator):
    """Bootstrap test of practically sufficient follow-up over categorical covariates.

    The null hypothesis is that follow-up is insufficient for at least one
    covariate level, i.e. the ``(1 - epsilon)``-quantile of the uncured
    event-time distribution reaches past the end of study for some level.

    Parameters
    ----------
    epsilon : float, default=0.01
        Tolerated probability of an event after the end of study.
    tau : float
        Time after which events are considered practically impossible. Must
        exceed every level's largest observed time.
    alpha : float, default=0.05
        Significance level.
    gamma : float, default=0.025
        Upper-quantile level used to select the least favourable covariate level.
    a_x : float, default=0
        Start of the region where the uncured density is nonincreasing.
    n_bootstrap : int, default=500
    random_state : int, default=0
    grid_size : int, default=512
    n_jobs : int, default=1
        Worker processes; results do not depend on it.

    Attributes
    ----------
    report_ : TestReport
    levels_ : list of CovariateLevel
    reject_ : bool
        Method 2 decision (the recommended procedure).
    """

    def __init__(self, epsilon=0.01, tau=None, alpha=0.05, gamma=0.025, a_x=0.0,
                 n_bootstrap=500, random_state=0, grid_size=512, n_jobs=1):
        self.epsilon = epsilon
        self.tau = tau
        self.alpha = alpha
        self.gamma = gamma
        self.a_x = a_x
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state
        self.grid_size = grid_size
        self.n_jobs = n_jobs

    def _config(self):
        if self.tau is None:
            raise ConfigError("tau is required")
        check_positive_int(self.n_jobs, "n_jobs")
        return TestConfig(
            epsilon=self.epsilon, tau=float(self.tau), alpha=self.alpha, gamma=self.gamma,
            a_x=float(self.a_x),
            bootstrap=BootstrapConfig(self.n_bootstrap, int(self.random_state),
                                      self.grid_size),
        )

    def fit(self, X, y):
        """Run the tests.

        Parameters
        ----------
        X : array-like of shape (n,) or (n, p)
            Categorical covariates; levels are the distinct rows.
        y : array-like of shape (n, 2) or structured array
            Columns (time, event).
        """
        config = self._config()
        time, event = split_target(y)
        dataset = SurvivalDataset.from_covariates(time, event, X)
        self.dataset_ = dataset
        self.levels_ = dataset.levels
        self.report_ = run_tests(dataset, config, workers=self.n_jobs)
        self.reject_ = self.report_.method2_reject
        return self

    @property
    def p_values_(self):
        return np.array([r.p_value for r in self.report_.levels])
