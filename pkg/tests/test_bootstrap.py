import dataclasses

import numpy as np
import pytest

from curefollowup.bootstrap import (
    CURED,
    BootstrapConfig,
    LevelSampler,
    bootstrap_distributions,
    draw_bootstrap_subsample,
    draw_censoring_time,
    draw_event_time,
    level_draws,
    prepare_sampler,
    stream,
)
from curefollowup.exceptions import ConfigError, DegenerateBootstrap
from curefollowup.monotone import fit_level
from curefollowup.survival import StepDistribution


def _uniform_sampler(c=0.1, L=5.0, n=200, grid_size=512, g_jumps=(), g_values=()):
    """Sampler for a constant clipped density c on [0, L]."""
    grid = np.linspace(0, L, grid_size + 1)
    return LevelSampler(
        n_x=n, a_x=0.0, y_max=L, f_jumps=np.empty(0), f_values=np.empty(0), f_at_a=0.0,
        cdf=c * grid, step=L / grid_size, mass=c * L,
        g_jumps=np.asarray(g_jumps, float), g_values=np.asarray(g_values, float),
        f_hat_boot=c,
    )


def _censored_fit(seed=0, n=400, cure=0.4):
    rng = np.random.default_rng(seed)
    t = np.where(rng.random(n) < cure, np.inf, rng.exponential(1.0, n))
    c = np.minimum(rng.uniform(0, 5, n), 4.0)
    return fit_level(np.minimum(t, c), t <= c)


def test_stream_is_keyed():
    a = stream(1, 0, 2, 3).random(4)
    assert np.array_equal(a, stream(1, 0, 2, 3).random(4))
    assert not np.array_equal(a, stream(1, 0, 2, 4).random(4))
    assert not np.array_equal(a, stream(2, 0, 2, 3).random(4))


def test_config_validation():
    with pytest.raises(ConfigError):
        BootstrapConfig(n_bootstrap=50)
    with pytest.raises(ConfigError):
        BootstrapConfig(grid_size=64)


def test_cure_branch():
    s = _uniform_sampler(c=0.14, L=5.0)
    assert s.uncure_probability == pytest.approx(0.7)
    assert draw_event_time(0.999, s) == CURED


def test_linear_inversion_on_uniform_density():
    s = _uniform_sampler(c=0.1, L=5.0)
    assert draw_event_time(0.1 * 5.0 / 2, s) == pytest.approx(2.5, abs=1e-12)


def test_kme_branch_below_a():
    s = dataclasses.replace(_uniform_sampler(), a_x=1.0, f_jumps=np.array([0.3, 0.8]),
                            f_values=np.array([0.1, 0.2]), f_at_a=0.2)
    assert draw_event_time(0.05, s) == 0.3
    assert draw_event_time(0.15, s) == 0.8


def test_event_draws_follow_grid_cdf():
    fit = _censored_fit()
    s = prepare_sampler(fit)
    u = stream(11, 0).random(100_000)
    t = np.array([draw_event_time(x, s) for x in u])
    inside = t[np.isfinite(t)]
    grid = np.linspace(s.a_x, s.y_max, s.cdf.shape[0])
    emp = np.searchsorted(np.sort(inside), grid, side="right") / inside.size
    assert np.max(np.abs(emp - s.cdf / s.mass)) < 0.01
    # uncured fraction is binomial around F(a) + mass
    p = s.uncure_probability
    assert abs(np.isfinite(t).mean() - p) < 3 * np.sqrt(p * (1 - p) / u.size)


def test_censoring_draws():
    point = StepDistribution(np.array([5.0]), np.array([1.0]))
    assert draw_censoring_time(0.3, point, 9.0) == 5.0
    G = StepDistribution(np.array([1.0, 3.0]), np.array([0.4, 0.8]))
    assert draw_censoring_time(0.1, G, 9.0) == 1.0
    assert draw_censoring_time(0.9, G, 9.0) == 9.0


def test_subsample_without_censoring_or_cure():
    s = _uniform_sampler(c=0.2, L=5.0, g_jumps=[5.0], g_values=[1.0])
    t, e = draw_bootstrap_subsample(s, stream(0, 1))
    assert t.shape == (200,) and e.all()


def test_subsample_all_cured():
    s = _uniform_sampler(c=0.0, L=5.0, g_jumps=[2.0, 5.0], g_values=[0.5, 1.0])
    t, e = draw_bootstrap_subsample(s, stream(0, 1))
    assert not e.any()
    assert set(np.unique(t)) <= {2.0, 5.0}


def test_subsample_uncure_fraction_is_binomial():
    fit = _censored_fit(seed=4)
    s = prepare_sampler(fit)
    # all censoring at y_max: uncured draws show as events, cured ones as censored
    s = dataclasses.replace(s, g_jumps=np.array([s.y_max]), g_values=np.array([1.0]))
    p = s.uncure_probability
    fracs = [draw_bootstrap_subsample(s, stream(9, r))[1].mean() for r in range(200)]
    se = np.sqrt(p * (1 - p) / s.n_x)
    assert abs(np.mean(fracs) - p) < 3 * se / np.sqrt(200) + 1e-12
    assert np.std(fracs) == pytest.approx(se, rel=0.25)


def test_bootstrap_times_never_exceed_y_max():
    fit = _censored_fit(seed=2)
    s = prepare_sampler(fit)
    for r in range(50):
        t, _ = draw_bootstrap_subsample(s, stream(3, r))
        assert t.max() <= s.y_max


def test_draws_are_reproducible_and_worker_independent():
    s = {0: prepare_sampler(_censored_fit(seed=5)), 1: prepare_sampler(_censored_fit(seed=6))}
    cfg = BootstrapConfig(n_bootstrap=120, seed=17)
    one = bootstrap_distributions(s, cfg, 0.01, 50.0, workers=1)
    again = bootstrap_distributions(s, cfg, 0.01, 50.0, workers=1)
    par = bootstrap_distributions(s, cfg, 0.01, 50.0, workers=3)
    for lev in (0, 1):
        assert one.D_star[lev].shape == (120,)
        assert np.array_equal(one.D_star[lev], again.D_star[lev])
        assert one.D_star[lev].tobytes() == par.D_star[lev].tobytes()
        assert np.array_equal(one.T_star[lev], par.T_star[lev])
        assert np.all(np.isfinite(one.D_star[lev]))


def test_bootstrap_requires_tau_beyond_y_max():
    s = {0: prepare_sampler(_censored_fit())}
    with pytest.raises(ConfigError):
        bootstrap_distributions(s, BootstrapConfig(100), 0.01, 1.0)


def test_bootstrap_reproduces_endpoint_bias_for_flat_density():
    # the endpoint estimate is biased downward even for a flat density;
    # the centred bootstrap statistic should carry the same bias
    rng = np.random.default_rng(8)
    true_err = []
    for _ in range(200):
        t = rng.uniform(0, 4, 2000)
        true_err.append(fit_level(t, np.ones_like(t, bool)).f_hat - 0.25)
    true_err = np.array(true_err)
    t = rng.uniform(0, 4, 2000)
    fit = fit_level(t, np.ones_like(t, bool))
    d, _, _ = level_draws(prepare_sampler(fit), BootstrapConfig(400, seed=1), 0.01, 10.0)
    assert true_err.mean() < 0 and d.mean() < 0
    assert abs(d.mean() - true_err.mean()) < true_err.std()
    assert d.std() == pytest.approx(true_err.std(), rel=0.5)


def test_degenerate_bootstrap_after_retries():
    s = _uniform_sampler(c=0.0)
    with pytest.raises(DegenerateBootstrap):
        level_draws(s, BootstrapConfig(100, max_retries=2), 0.01, 10.0)
