"""Monte Carlo harness: data-generating settings, scenarios and rejection rates.

Four settings with binary covariates (one, or two combined into four levels)
under a mixture cure model. The end of study for level x is a quantile of the
uncured event-time law, and censoring is ``min(C_tilde, tau_G(x))``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bootstrap import DATA_DOMAIN, DegenerateBootstrap, stream
from .exceptions import ConfigError, DataError
from .procedures import TestConfig, run_tests
from .survival import SurvivalDataset

logger = logging.getLogger(__name__)

QUANTILE_LEVELS = (0.95, 0.975, 0.99, 0.995, 0.999)
TAU_QUANTILE = 0.9999


@dataclass(frozen=True)
class SettingSpec:
    """Data-generating law.

    ``event_law`` entries are ``("exp", rate)`` or ``("weibull", scale, shape)``
    with cdf ``1 - exp(-scale * t**shape)``. ``censoring_law`` entries are
    ``("uniform",)`` (end-of-study mass ``delta_g``) or ``("exp", rate)``.
    """

    setting: int
    labels: tuple
    level_probs: tuple
    uncure_probs: tuple
    event_law: tuple
    censoring_law: tuple
    delta_g: float = 0.01
    params: str = ""

    def __post_init__(self):
        d = len(self.labels)
        for name in ("level_probs", "uncure_probs", "event_law", "censoring_law"):
            if len(getattr(self, name)) != d:
                raise ConfigError(f"{name} must have one entry per level")
        if not math.isclose(sum(self.level_probs), 1.0, abs_tol=1e-9):
            raise ConfigError("level probabilities must sum to one")
        if any(not 0 < p < 1 for p in self.level_probs):
            raise ConfigError("level probabilities must lie in (0, 1)")
        if any(not 0 <= p <= 1 for p in self.uncure_probs):
            raise ConfigError("uncure probabilities must lie in [0, 1]")
        if self.delta_g not in (0.0, 0.01):
            raise ConfigError("delta_g must be 0 or 0.01")

    @property
    def n_levels(self):
        return len(self.labels)


def _logistic(z):
    return 1.0 / (1.0 + math.exp(z))


def _check_rho(rho):
    if not 0 < rho < 1:
        raise ConfigError(f"rho must lie in (0, 1), got {rho}")
    return float(rho)


def _check_p(p):
    p = tuple(float(v) for v in p)
    if len(p) != 2 or any(not 0 < v <= 1 for v in p):
        raise ConfigError("p must give two uncure probabilities in (0, 1]")
    return p


def setting1(rho=0.5, delta_g=0.01):
    """Logistic incidence, Weibull(shape 0.8) latency, uniform censoring."""
    rho = _check_rho(rho)
    sigma, beta, shape = 1.2, -0.9, 0.8
    return SettingSpec(
        setting=1, labels=("0", "1"), level_probs=(1 - rho, rho),
        uncure_probs=tuple(_logistic(0.6 - 1.3 * x) for x in (0, 1)),
        event_law=tuple(("weibull", sigma * math.exp(x * beta), shape) for x in (0, 1)),
        censoring_law=(("uniform",), ("uniform",)), delta_g=delta_g,
        params=f"rho={rho}",
    )


def setting2(rho=0.5, p=(0.7, 0.7)):
    """Exponential latency with rate 5 - 0.5x; exponential censoring with rate 1 + 1.5x."""
    rho = _check_rho(rho)
    p = _check_p(p)
    return SettingSpec(
        setting=2, labels=("0", "1"), level_probs=(1 - rho, rho), uncure_probs=p,
        event_law=tuple(("exp", 5.0 - 0.5 * x) for x in (0, 1)),
        censoring_law=tuple(("exp", 1.0 + 1.5 * x) for x in (0, 1)),
        delta_g=0.0, params=f"rho={rho};p={p[0]},{p[1]}",
    )


def setting3():
    """Two dependent binary covariates giving four levels (x1, x2)."""
    combos = ((0, 0), (0, 1), (1, 0), (1, 1))
    return SettingSpec(
        setting=3, labels=tuple(f"{a}|{b}" for a, b in combos),
        level_probs=(0.36, 0.24, 0.16, 0.24),
        uncure_probs=tuple(_logistic(0.6 - 1.3 * a + 0.3 * b) for a, b in combos),
        event_law=tuple(("exp", 1.0 - 0.25 * a - 0.3 * b) for a, b in combos),
        censoring_law=(("uniform",),) * 4, delta_g=0.01, params="",
    )


def setting4(rho=0.5, p=(0.6, 0.6), delta_g=0.01):
    """Standard exponential latency, uniform censoring."""
    rho = _check_rho(rho)
    p = _check_p(p)
    return SettingSpec(
        setting=4, labels=("0", "1"), level_probs=(1 - rho, rho), uncure_probs=p,
        event_law=(("exp", 1.0), ("exp", 1.0)),
        censoring_law=(("uniform",), ("uniform",)), delta_g=float(delta_g),
        params=f"rho={rho};p={p[0]},{p[1]};deltaG={float(delta_g)}",
    )


def make_setting(setting, rho=0.5, p=None, delta_g=None):
    if setting == 1:
        return setting1(rho, 0.01 if delta_g is None else delta_g)
    if setting == 2:
        return setting2(rho, (0.7, 0.7) if p is None else p)
    if setting == 3:
        return setting3()
    if setting == 4:
        return setting4(rho, (0.6, 0.6) if p is None else p,
                        0.01 if delta_g is None else delta_g)
    raise ConfigError(f"unknown setting {setting!r}")


def uncured_quantile(spec: SettingSpec, level, q):
    """Closed-form q-quantile of the uncured event-time law of a level."""
    if not 0 < q < 1:
        raise ConfigError("q must lie in (0, 1)")
    law = spec.event_law[level]
    if law[0] == "exp":
        return -math.log1p(-q) / law[1]
    _, scale, shape = law
    return (-math.log1p(-q) / scale) ** (1.0 / shape)


def simulation_tau(spec: SettingSpec):
    return max(uncured_quantile(spec, x, TAU_QUANTILE) for x in range(spec.n_levels))


@dataclass(frozen=True)
class CensoringSampler:
    """C = min(C_tilde, tau_G)."""

    kind: str
    tau_g: float
    param: float

    def sample(self, rng, size):
        if self.kind == "uniform":
            c = rng.random(size) * self.param
        else:
            c = rng.exponential(1.0 / self.param, size)
        return np.minimum(c, self.tau_g)

    @property
    def end_mass(self):
        """P(C = tau_G)."""
        if self.kind == "uniform":
            return 1.0 - self.tau_g / self.param
        return math.exp(-self.param * self.tau_g)


def censoring_for_level(spec: SettingSpec, level, tau_g, delta_g=None):
    delta_g = spec.delta_g if delta_g is None else delta_g
    law = spec.censoring_law[level]
    if law[0] == "uniform":
        if delta_g not in (0.0, 0.01):
            raise ConfigError("delta_g must be 0 or 0.01")
        return CensoringSampler("uniform", float(tau_g), float(tau_g) / (1.0 - delta_g))
    return CensoringSampler("exp", float(tau_g), float(law[1]))


@dataclass(frozen=True)
class CaseSpec:
    spec: SettingSpec
    quantiles: tuple
    n: int

    def __post_init__(self):
        if len(self.quantiles) != self.spec.n_levels:
            raise ConfigError("one tau_G quantile level per covariate level is required")
        if any(q not in QUANTILE_LEVELS for q in self.quantiles):
            raise ConfigError(f"quantile levels must come from {QUANTILE_LEVELS}")
        if self.n < 1:
            raise ConfigError("n must be positive")

    @property
    def tau_g(self):
        return tuple(uncured_quantile(self.spec, x, q) for x, q in enumerate(self.quantiles))

    @property
    def scenario(self):
        return classify_scenario(self.quantiles)


def classify_scenario(quantiles):
    """'C' if every level is beyond q_0.99, 'B' if at most one level sits at q_0.975
    and the rest at or beyond q_0.99, 'A' otherwise."""
    qs = list(quantiles)
    if all(q > 0.99 for q in qs):
        return "C"
    if all(q >= 0.99 for q in qs):
        return "B"
    low = [q for q in qs if q < 0.99]
    if len(low) == 1 and low[0] == 0.975:
        return "B"
    return "A"


def generate_dataset(case: CaseSpec, rng) -> SurvivalDataset:
    """Draw n subjects: level, cure status, event time (inf if cured), censoring."""
    spec = case.spec
    n = case.n
    cum = np.cumsum(spec.level_probs)
    cum[-1] = 1.0
    level = np.searchsorted(cum, rng.random(n), side="right")
    time = np.empty(n)
    event = np.empty(n, dtype=bool)
    for x, tau_g in enumerate(case.tau_g):
        idx = np.flatnonzero(level == x)
        m = idx.size
        if m == 0:
            continue
        uncured = rng.random(m) < spec.uncure_probs[x]
        e = rng.random(m)
        t = np.full(m, np.inf)
        law = spec.event_law[x]
        if law[0] == "exp":
            t[uncured] = -np.log1p(-e[uncured]) / law[1]
        else:
            t[uncured] = (-np.log1p(-e[uncured]) / law[1]) ** (1.0 / law[2])
        c = censoring_for_level(spec, x, tau_g).sample(rng, m)
        time[idx] = np.minimum(t, c)
        event[idx] = t <= c
    return SurvivalDataset(time, event, level, spec.labels)


@dataclass
class CaseResult:
    case: CaseSpec
    reps: int
    n_failed: int
    reject_individual: dict
    reject_m1: float
    reject_m2: float
    selection_counts: dict = field(default_factory=dict)

    @property
    def scenario(self):
        return self.case.scenario

    def individual_se(self, level):
        p = self.reject_individual[level]
        return math.sqrt(max(p * (1 - p), 1e-12) / max(self.reps - self.n_failed, 1))


def _replication(args):
    case, config, seed, case_index, rep, test_levels = args
    rng = stream(seed, DATA_DOMAIN, case_index, rep)
    dataset = generate_dataset(case, rng)
    try:
        report = run_tests(dataset, config, case=case_index, replication=rep,
                           levels=test_levels)
    except (DataError, DegenerateBootstrap) as exc:
        logger.debug("replication %d of case %d failed: %s", rep, case_index, exc)
        return rep, None
    decisions = {r.level: r.reject for r in report.levels}
    selected = report.levels[report.method2_selected_level].level
    return rep, (decisions, report.method1_reject, report.method2_reject, selected)


def case_config(case: CaseSpec, base: TestConfig):
    """Per-case test configuration with tau at the largest 99.99% uncured quantile."""
    return replace(base, tau=simulation_tau(case.spec))


def run_case(case: CaseSpec, reps, config: TestConfig, seed, case_index=0, workers=1,
             test_levels=None) -> CaseResult:
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    config = case_config(case, config)
    tasks = [(case, config, seed, case_index, r, test_levels) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_replication, tasks, chunksize=max(1, reps // (4 * workers))))
    else:
        outcomes = [_replication(t) for t in tasks]
    outcomes.sort(key=lambda o: o[0])
    good = [o for _, o in outcomes if o is not None]
    levels = list(range(case.spec.n_levels)) if test_levels is None else list(test_levels)
    n_ok = len(good)
    denom = max(n_ok, 1)
    indiv = {lev: sum(g[0][lev] for g in good) / denom for lev in levels}
    full = test_levels is None or len(levels) == case.spec.n_levels
    m1 = sum(g[1] for g in good) / denom if full else math.nan
    m2 = sum(g[2] for g in good) / denom if full else math.nan
    sel = {lev: sum(1 for g in good if g[3] == lev) for lev in levels}
    return CaseResult(case, reps, reps - n_ok, indiv, m1, m2, sel)


def run_grid(cases, reps, config: TestConfig, seed, workers=1, test_levels=None):
    """Rejection rates for each case; deterministic in ``seed`` for any ``workers``."""
    results = []
    for i, case in enumerate(cases):
        logger.info("case %d/%d: setting %d, quantiles %s, n=%d",
                    i + 1, len(cases), case.spec.setting, case.quantiles, case.n)
        results.append(run_case(case, reps, config, seed, case_index=i, workers=workers,
                                test_levels=test_levels))
    return results


def _fmt(x):
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(round(x, 10))
    return str(x)


def results_to_csv(results) -> str:
    d = max(r.case.spec.n_levels for r in results)
    header = (["setting", "scenario", "tauG_levels", "n", "rho_params"]
              + [f"reject_indiv_{x}" for x in range(d)]
              + ["reject_m1", "reject_m2"]
              + [f"sel_count_{x}" for x in range(d)]
              + ["reps", "n_failed"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in results:
        c = r.case
        row = [c.spec.setting, c.scenario, ";".join(str(q) for q in c.quantiles), c.n,
               c.spec.params]
        row += [_fmt(r.reject_individual[x]) if x in r.reject_individual else ""
                for x in range(d)]
        row += [_fmt(r.reject_m1), _fmt(r.reject_m2)]
        row += [r.selection_counts.get(x, "") for x in range(d)]
        row += [r.reps, r.n_failed]
        w.writerow(row)
    return buf.getvalue()
