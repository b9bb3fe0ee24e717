import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import km_bruteforce, step_eval
from curefollowup.exceptions import DataError, DegenerateLevel, NoEvents
from curefollowup.survival import (
    KaplanMeier,
    Observation,
    StepDistribution,
    SurvivalDataset,
    ecdf,
    ecdf_sub,
    generalized_inverse,
    km_censoring,
    km_event,
    partition,
    summarize,
)


@st.composite
def censored_samples(draw, max_n=50, grid=12):
    """Small censored samples on a coarse grid so ties are frequent."""
    n = draw(st.integers(1, max_n))
    t = draw(st.lists(st.integers(1, grid), min_size=n, max_size=n))
    e = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return np.array(t, float) / 3.0, np.array(e)


def test_partition_groups_in_input_order():
    ds = SurvivalDataset.from_observations(
        [Observation(1.0, 1, 0), Observation(2.0, 0, 1), Observation(3.0, 1, 0),
         Observation(4.0, 1, 1)])
    groups = partition(ds)
    assert list(groups[0]) == [0, 2]
    assert list(groups[1]) == [1, 3]


def test_partition_single_level():
    ds = SurvivalDataset(np.arange(1.0, 6.0), np.ones(5), np.zeros(5, int))
    assert list(partition(ds)) == [0]
    assert len(partition(ds)[0]) == 5


def test_partition_empty_level_is_reported():
    ds = SurvivalDataset(np.array([1.0, 2.0, 3.0]), np.ones(3), np.array([0, 0, 2]),
                         ("a", "b", "c"))
    with pytest.raises(DegenerateLevel) as info:
        partition(ds)
    assert info.value.level == 1


def test_dataset_rejects_nonpositive_times():
    with pytest.raises(DataError):
        SurvivalDataset(np.array([0.0, 1.0]), np.array([1, 1]), np.array([0, 0]))
    with pytest.raises(DataError):
        SurvivalDataset(np.array([1.0]), np.array([2]), np.array([0]))


def test_from_covariates_lexicographic_ids():
    ds = SurvivalDataset.from_covariates(
        [1.0, 2.0, 3.0, 4.0], [1, 0, 1, 1],
        [["b", "x"], ["a", "y"], ["b", "x"], ["a", "x"]])
    assert ds.labels == ("a|x", "a|y", "b|x")
    assert list(ds.level) == [2, 1, 2, 0]


def test_ecdf_sub_counts():
    t, e = np.array([1.0, 2.0, 3.0]), np.array([1, 0, 1])
    h1 = ecdf_sub(t, e, 1)
    assert np.allclose(h1.jump_times, [1, 3]) and np.allclose(h1.values, [1 / 3, 2 / 3])
    h0 = ecdf_sub(t, e, 0)
    assert np.allclose(h0.jump_times, [2]) and np.allclose(h0.values, [1 / 3])
    assert len(ecdf_sub(t, np.ones(3), 0)) == 0


@given(censored_samples())
def test_ecdf_decomposes(sample):
    t, e = sample
    grid = np.linspace(0, 5, 41)
    total = ecdf_sub(t, e, 0)(grid) + ecdf_sub(t, e, 1)(grid)
    assert np.allclose(total, ecdf(t)(grid), atol=1e-14)


def test_km_without_censoring_is_ecdf():
    F = km_event([1.0, 2.0, 3.0], [1, 1, 1])
    assert np.allclose(F.values, [1 / 3, 2 / 3, 1.0], atol=1e-15)


def test_km_hand_example():
    F = km_event([1.0, 2.0, 3.0], [1, 0, 1])
    assert F(1.0) == pytest.approx(1 / 3, abs=1e-15)
    assert F(2.5) == pytest.approx(1 / 3, abs=1e-15)
    assert F(3.0) == pytest.approx(1.0, abs=1e-15)


def test_km_censored_first():
    F = km_event([1.0, 2.0], [0, 1])
    assert F(2.0) == pytest.approx(1.0)
    assert F(1.5) == 0.0


def test_km_tie_rule_event_sees_same_time_censoring():
    # at t=1 the risk set is 2 (the censored subject is still at risk)
    F = km_event([1.0, 1.0], [1, 0])
    assert F(1.0) == pytest.approx(0.5)


def test_km_no_events():
    with pytest.raises(NoEvents):
        km_event([1.0, 2.0], [0, 0])


def test_censoring_km_examples():
    G = km_censoring([1.0, 2.0], [0, 0])
    assert np.allclose(G.values, [0.5, 1.0])
    # event at the tied time leaves first, so the censoring risk set is 1
    assert km_censoring([1.0, 1.0], [1, 0])(1.0) == pytest.approx(1.0)
    assert len(km_censoring([1.0, 2.0], [1, 1])) == 0


@given(censored_samples())
def test_km_matches_bruteforce(sample):
    t, e = sample
    grid = np.unique(np.concatenate([t, t - 1e-9, [0.1, 10.0]]))
    if e.any():
        ot, ov = km_bruteforce(t, e)
        assert np.allclose(km_event(t, e)(grid), step_eval(ot, ov, grid), atol=1e-12, rtol=0)
    ct, cv = km_bruteforce(t, e, censoring=True)
    assert np.allclose(km_censoring(t, e)(grid), step_eval(ct, cv, grid), atol=1e-12, rtol=0)


@given(censored_samples())
def test_km_is_a_subdistribution(sample):
    t, e = sample
    for dist in ([km_event(t, e)] if e.any() else []) + [km_censoring(t, e)]:
        assert np.all(np.diff(dist.values) >= -1e-15)
        assert np.all((dist.values >= 0) & (dist.values <= 1 + 1e-15))
        assert np.all(np.diff(dist.jump_times) > 0)


def test_generalized_inverse():
    d = StepDistribution(np.array([1.0, 2.0]), np.array([0.5, 1.0]))
    assert generalized_inverse(d, 0.5) == 1.0
    assert generalized_inverse(d, 0.51) == 2.0
    short = StepDistribution(np.array([1.0, 2.0]), np.array([0.5, 0.8]))
    assert generalized_inverse(short, 1.0, fallback=7.0) == 7.0


def test_step_distribution_is_right_continuous():
    d = StepDistribution(np.array([1.0, 2.0]), np.array([0.25, 0.75]))
    assert d(0.999) == 0.0
    assert d(1.0) == 0.25
    assert d(2.0) == 0.75
    assert d(100.0) == 0.75


@given(censored_samples())
def test_summary_invariants(sample):
    t, e = sample
    if not e.any():
        return
    s = summarize(t, e)
    assert s.y_max >= s.y_max_uncensored
    assert 0.0 <= s.cure_rate_hat <= 1.0
    assert s.cure_rate_hat == pytest.approx(1.0 - s.F_hat(s.y_max), abs=1e-15)
    assert s.censoring_rate == pytest.approx(1.0 - e.mean())


def test_no_censoring_gives_zero_cure_rate():
    assert summarize([1.0, 2.0, 5.0], [1, 1, 1]).cure_rate_hat == 0.0


def test_kaplan_meier_estimator_api():
    km = KaplanMeier().fit([1.0, 2.0, 3.0, 4.0], [1, 0, 1, 0])
    assert km.get_params() == {"target": "event"}
    assert km.predict(1.0) == pytest.approx(0.25)
    assert km.survival_function(1.0) == pytest.approx(0.75)
    assert 0 < km.cure_rate() < 1
    g = KaplanMeier(target="censoring").fit([1.0, 2.0], [0, 0])
    assert g.predict(2.0) == pytest.approx(1.0)
