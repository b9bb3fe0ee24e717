"""Survival data model and conditional Kaplan-Meier estimation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _numeric
from ._validation import check_survival_arrays
from .exceptions import DataError, DegenerateLevel, NoEvents


class CovariateLevel(NamedTuple):
    id: int
    label: str


class Observation(NamedTuple):
    time: float
    event: int
    level: int


@dataclass(frozen=True)
class StepDistribution:
    """Right-continuous nondecreasing step function, zero before the first jump."""

    jump_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if jt.shape != v.shape or jt.ndim != 1:
            raise ValueError("jump_times and values must be 1-d of equal length")
        jt.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls):
        return cls(np.empty(0), np.empty(0))

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.jump_times, t, side="right")
        padded = np.concatenate(([0.0], self.values))
        out = padded[idx]
        return out.item() if out.ndim == 0 else out

    def __len__(self):
        return self.jump_times.shape[0]

    @property
    def sup(self):
        return float(self.values[-1]) if len(self) else 0.0

    def inverse(self, p, fallback=np.inf):
        return generalized_inverse(self, p, fallback)


def generalized_inverse(dist: StepDistribution, p: float, fallback: float = np.inf) -> float:
    """inf{t : dist(t) >= p}, or ``fallback`` when dist never reaches p."""
    if p <= 0:
        return 0.0
    idx = np.searchsorted(dist.values, p, side="left")
    if idx >= len(dist):
        return float(fallback)
    return float(dist.jump_times[idx])


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored observations tagged with a categorical covariate level.

    Parameters
    ----------
    time : array of positive floats
    event : array of {0, 1}; 1 means the event was observed
    level : array of integer level ids in ``0..d-1``
    labels : display label for each level id
    """

    time: np.ndarray
    event: np.ndarray
    level: np.ndarray
    labels: tuple = field(default=("all",))

    def __post_init__(self):
        time, event = check_survival_arrays(self.time, self.event)
        level = np.asarray(self.level)
        if level.shape != time.shape:
            raise DataError("level must have the same length as time")
        if not np.issubdtype(level.dtype, np.integer):
            if not np.all(np.equal(np.mod(level, 1), 0)):
                raise DataError("level ids must be integers")
        level = level.astype(np.int64)
        labels = tuple(str(s) for s in self.labels)
        if len(labels) == 0:
            raise DataError("at least one covariate level is required")
        if level.size and (level.min() < 0 or level.max() >= len(labels)):
            raise DataError("observation refers to an undeclared covariate level")
        for arr in (time, event, level):
            arr.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], labels=None):
        obs = list(observations)
        if labels is None:
            d = max(o.level for o in obs) + 1 if obs else 1
            labels = tuple(str(i) for i in range(d))
        return cls(
            np.array([o.time for o in obs], dtype=np.float64),
            np.array([o.event for o in obs]),
            np.array([o.level for o in obs], dtype=np.int64),
            tuple(labels),
        )

    @classmethod
    def from_covariates(cls, time, event, covariates):
        """Build levels from the cross-product of categorical covariate columns.

        Labels are the ``|``-joined string values; ids follow lexicographic
        label order.
        """
        cov = np.asarray(covariates, dtype=object)
        if cov.ndim == 1:
            cov = cov[:, None]
        keys = ["|".join(str(v) for v in row) for row in cov]
        labels = sorted(set(keys))
        index = {lab: i for i, lab in enumerate(labels)}
        level = np.array([index[k] for k in keys], dtype=np.int64)
        return cls(time, event, level, tuple(labels))

    @property
    def n(self):
        return self.time.shape[0]

    @property
    def n_levels(self):
        return len(self.labels)

    @property
    def levels(self):
        return [CovariateLevel(i, lab) for i, lab in enumerate(self.labels)]

    @property
    def observations(self):
        return [Observation(float(t), int(e), int(x))
                for t, e, x in zip(self.time, self.event, self.level)]

    def subsample(self, level):
        mask = self.level == level
        return self.time[mask], self.event[mask]

    def scaled(self, factor):
        return SurvivalDataset(self.time * factor, self.event, self.level, self.labels)


def partition(dataset: SurvivalDataset) -> dict[int, np.ndarray]:
    """Row indices of each level, in input order.

    Raises DegenerateLevel for a declared level without observations.
    """
    if dataset.n == 0:
        raise DataError("empty dataset")
    groups = {}
    for lev in range(dataset.n_levels):
        idx = np.flatnonzero(dataset.level == lev)
        if idx.size == 0:
            raise DegenerateLevel(lev, dataset.labels[lev])
        groups[lev] = idx
    return groups


def ecdf_sub(time, event, k) -> StepDistribution:
    """Sub-distribution (1/n) #{Y <= t, Delta = k}."""
    time, event = check_survival_arrays(time, event)
    n = time.shape[0]
    sel = np.sort(time[event == bool(k)])
    if sel.size == 0:
        return StepDistribution.zero()
    jt, counts = np.unique(sel, return_counts=True)
    return StepDistribution(jt, np.cumsum(counts) / n)


def ecdf(time) -> StepDistribution:
    time = np.sort(np.asarray(time, dtype=np.float64))
    jt, counts = np.unique(time, return_counts=True)
    return StepDistribution(jt, np.cumsum(counts) / time.shape[0])


def _product_limit(time, event, censoring):
    time, event = check_survival_arrays(time, event)
    order = np.argsort(time, kind="mergesort")
    jt, jv = _numeric.km_steps(time[order], event[order], censoring)
    return StepDistribution(jt, jv)


def km_event(time, event) -> StepDistribution:
    """Kaplan-Meier estimate of the event-time distribution F."""
    time, event = check_survival_arrays(time, event)
    if not event.any():
        raise NoEvents("subsample has no observed events")
    return _product_limit(time, event, False)


def km_censoring(time, event) -> StepDistribution:
    """Kaplan-Meier estimate of the censoring distribution G (events leave first at ties)."""
    return _product_limit(time, event, True)


@dataclass(frozen=True)
class SubSampleSummary:
    n_x: int
    y_max: float
    y_max_uncensored: float
    F_hat: StepDistribution
    G_hat: StepDistribution
    H_hat: StepDistribution
    H1_hat: StepDistribution
    cure_rate_hat: float

    @property
    def censoring_rate(self):
        return 1.0 - self.H1_hat.sup


def summarize(time, event) -> SubSampleSummary:
    time, event = check_survival_arrays(time, event)
    F = km_event(time, event)
    y_max = float(time.max())
    return SubSampleSummary(
        n_x=int(time.shape[0]),
        y_max=y_max,
        y_max_uncensored=float(time[event].max()),
        F_hat=F,
        G_hat=km_censoring(time, event),
        H_hat=ecdf(time),
        H1_hat=ecdf_sub(time, event, 1),
        cure_rate_hat=float(min(max(1.0 - F(y_max), 0.0), 1.0)),
    )


class KaplanMeier(BaseEstimator):
    """Product-limit estimator of the event (or censoring) distribution.

    Parameters
    ----------
    target : {"event", "censoring"}
        Which distribution to estimate.

    Attributes
    ----------
    distribution_ : StepDistribution
    y_max_ : float
    """

    def __init__(self, target="event"):
        self.target = target

    def fit(self, time, event):
        if self.target not in ("event", "censoring"):
            raise ValueError(f"unknown target {self.target!r}")
        time, event = check_survival_arrays(time, event)
        fn = km_event if self.target == "event" else km_censoring
        self.distribution_ = fn(time, event)
        self.y_max_ = float(time.max())
        self.n_samples_ = time.shape[0]
        return self

    def predict(self, t):
        """Estimated cdf at ``t``."""
        check_is_fitted(self, "distribution_")
        return self.distribution_(t)

    def survival_function(self, t):
        return 1.0 - self.predict(t)

    def cure_rate(self):
        check_is_fitted(self, "distribution_")
        return 1.0 - self.distribution_(self.y_max_)
