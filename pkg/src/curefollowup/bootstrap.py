"""Smoothed bootstrap for the endpoint density statistic.

Event times are redrawn from the KME below ``a_x``, from the clipped smoothed
Grenander density on ``[a_x, y_max]``, and are cured (infinite) with the
remaining probability. Censoring times come from the censoring KME, with its
defect mass placed at ``y_max``. Covariates are held fixed: each level is
resampled with its own size.

Every replicate owns a Philox stream keyed by
``(domain, case, replication, level, replicate, attempt)``, so results do not
depend on how work is split across processes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _numeric
from ._validation import check_positive_int
from .exceptions import ConfigError, DegenerateBootstrap
from .monotone import (
    BOOT_BANDWIDTH_EXPONENT,
    STAT_BANDWIDTH_EXPONENT,
    LevelFit,
    bandwidth_factor,
    smoothed_cdf_grid,
)
from .survival import StepDistribution, generalized_inverse

logger = logging.getLogger(__name__)

CURED = np.inf
MAX_RETRIES = 10
_CHUNK = 50

# Stream domains keep data generation and resampling draws disjoint.
DATA_DOMAIN = 0
BOOT_DOMAIN = 1


def stream(seed, *key):
    """Independent generator for an integer key path under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class BootstrapConfig:
    n_bootstrap: int = 500
    seed: int = 0
    grid_size: int = 512
    max_retries: int = MAX_RETRIES

    def __post_init__(self):
        check_positive_int(self.n_bootstrap, "n_bootstrap", minimum=100)
        check_positive_int(self.grid_size, "grid_size", minimum=256)
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(frozen=True)
class LevelSampler:
    """Flattened sampling tables for one level."""

    n_x: int
    a_x: float
    y_max: float
    f_jumps: np.ndarray
    f_values: np.ndarray
    f_at_a: float
    cdf: np.ndarray
    step: float
    mass: float
    g_jumps: np.ndarray
    g_values: np.ndarray
    f_hat_boot: float

    @property
    def uncure_probability(self):
        return min(self.f_at_a + self.mass, 1.0)


def prepare_sampler(fit: LevelFit, grid_size=512) -> LevelSampler:
    grid = smoothed_cdf_grid(fit.density, fit.bandwidths.b0_x, fit.a_x, fit.y_max,
                             grid_size=grid_size)
    return LevelSampler(
        n_x=fit.n_x,
        a_x=fit.a_x,
        y_max=fit.y_max,
        f_jumps=np.array(fit.F_hat.jump_times),
        f_values=np.array(fit.F_hat.values),
        f_at_a=fit.F_at_a,
        cdf=grid.cdf,
        step=grid.step,
        mass=grid.mass,
        g_jumps=np.array(fit.G_hat.jump_times),
        g_values=np.array(fit.G_hat.values),
        f_hat_boot=max(fit.f_hat_boot, 0.0),
    )


def draw_event_time(u, sampler: LevelSampler):
    """Bootstrap event time for uniform ``u``; ``CURED`` (inf) beyond the uncured mass."""
    return _numeric.draw_event(float(u), sampler.f_jumps, sampler.f_values, sampler.f_at_a,
                               sampler.a_x, sampler.cdf, sampler.step, sampler.mass)


def draw_censoring_time(v, G: StepDistribution, y_max):
    return generalized_inverse(G, v, fallback=y_max)


def draw_bootstrap_subsample(sampler: LevelSampler, rng):
    """One resampled subsample (time, event) of the level's size."""
    uv = rng.random((2, sampler.n_x))
    return _numeric.draw_sample(uv[0], uv[1], sampler.f_jumps, sampler.f_values,
                                sampler.f_at_a, sampler.a_x, sampler.cdf, sampler.step,
                                sampler.mass, sampler.g_jumps, sampler.g_values,
                                sampler.y_max)


@dataclass
class BootstrapDraws:
    """Per-level bootstrap statistics, indexed by level id.

    ``D_star[x][b]`` is the centred endpoint density and ``T_star[x][b]`` the
    penalised statistic of replicate ``b``.
    """

    D_star: dict = field(default_factory=dict)
    T_star: dict = field(default_factory=dict)
    retries: dict = field(default_factory=dict)

    @property
    def levels(self):
        return sorted(self.D_star)


def _replicate_block(sampler, epsilon, tau, seed, key, start, stop, max_retries):
    bw = bandwidth_factor(sampler.n_x, STAT_BANDWIDTH_EXPONENT)
    n_rep = stop - start
    d_out = np.empty(n_rep)
    t_out = np.empty(n_rep)
    retries = 0
    for i, b in enumerate(range(start, stop)):
        for attempt in range(max_retries + 1):
            uv = stream(seed, *key, b, attempt).random((2, sampler.n_x))
            f_star, t_star, _, ok = _numeric.bootstrap_replicate(
                uv[0], uv[1], sampler.f_jumps, sampler.f_values, sampler.f_at_a,
                sampler.a_x, sampler.cdf, sampler.step, sampler.mass,
                sampler.g_jumps, sampler.g_values, sampler.y_max, bw, epsilon, tau)
            if ok:
                break
            retries += 1
        else:
            raise DegenerateBootstrap(
                f"replicate {b} of stream {key} had no events after {max_retries} retries")
        d_out[i] = f_star - sampler.f_hat_boot
        t_out[i] = t_star
    return start, d_out, t_out, retries


def _run_block(args):
    return args[0], _replicate_block(*args[1:])


def level_draws(sampler: LevelSampler, config: BootstrapConfig, epsilon, tau, key=(0, 0, 0)):
    """Bootstrap vectors (D_star, T_star, retries) for one level, computed serially."""
    if not tau > sampler.y_max:
        raise ConfigError("tau must exceed the largest observed time")
    _, d, t, r = _replicate_block(sampler, float(epsilon), float(tau), config.seed,
                                  (BOOT_DOMAIN, *key), 0, config.n_bootstrap,
                                  config.max_retries)
    return d, t, r


def bootstrap_distributions(samplers: dict, config: BootstrapConfig, epsilon, tau,
                            case=0, replication=0, workers=1) -> BootstrapDraws:
    """Bootstrap draws for every level in ``samplers`` (level id -> LevelSampler).

    One pass serves both the critical values and the level selection.
    Work is split into fixed blocks; each block writes into its own slice,
    so the output is identical for any ``workers``.
    """
    for lev, s in samplers.items():
        if not tau > s.y_max:
            raise ConfigError(
                f"tau must exceed the largest observed time (level {lev}: {s.y_max})")
    B = config.n_bootstrap
    tasks = []
    for lev in sorted(samplers):
        key = (BOOT_DOMAIN, case, replication, lev)
        for start in range(0, B, _CHUNK):
            tasks.append((lev, samplers[lev], float(epsilon), float(tau), config.seed, key,
                          start, min(start + _CHUNK, B), config.max_retries))
    draws = BootstrapDraws()
    for lev in samplers:
        draws.D_star[lev] = np.empty(B)
        draws.T_star[lev] = np.empty(B)
        draws.retries[lev] = 0
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, tasks))
    else:
        results = [_run_block(t) for t in tasks]
    for lev, (start, d, t, r) in results:
        draws.D_star[lev][start:start + d.shape[0]] = d
        draws.T_star[lev][start:start + t.shape[0]] = t
        draws.retries[lev] += r
    return draws


def boot_bandwidth_factor(n_x):
    return bandwidth_factor(n_x, BOOT_BANDWIDTH_EXPONENT)
