from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from hollingjump import presets
from hollingjump.coefficients import LevyMeasureSpec, MarkDistribution
from hollingjump.errors import DomainError
from hollingjump.jumps import (JumpSchedule, RngSpec, build_schedule, sample_event_times,
                               sample_mark, sample_marks, write_schedule_csv)


def test_zero_intensity_gives_no_events():
    assert len(sample_event_times(0.0, 10.0, RngSpec().generator("measure1-times"))) == 0


def test_negative_intensity_rejected():
    with pytest.raises(DomainError):
        sample_event_times(-1.0, 10.0, RngSpec().generator("measure1-times"))


def test_poisson_count_moments():
    counts = np.array([len(sample_event_times(3.0, 10.0, RngSpec(11, k).generator("measure1-times")))
                       for k in range(10_000)])
    assert abs(counts.mean() - 30.0) <= 4 * np.sqrt(30.0 / 10_000)
    assert abs(counts.var(ddof=1) - 30.0) <= 3.0


def test_gaps_are_exponential():
    gaps = np.concatenate([np.diff(np.concatenate([[0.0], sample_event_times(
        3.0, 10.0, RngSpec(12, k).generator("measure1-times"))])) for k in range(400)])
    gaps = gaps[:10_000]
    assert len(gaps) == 10_000
    assert stats.kstest(gaps, "expon", args=(0, 1 / 3.0)).pvalue > 0.01


def test_batched_sampler_covers_long_horizons():
    t = sample_event_times(50.0, 100.0, RngSpec(1).generator("measure1-times"))
    assert np.all(np.diff(t) > 0)
    assert t[-1] < 100.0
    assert abs(len(t) - 5000) < 5 * np.sqrt(5000)


def test_atom_marks():
    g = RngSpec().generator("measure1-marks")
    assert sample_mark(MarkDistribution.atom(1.0), g) == 1.0
    assert np.all(sample_marks(MarkDistribution.atom(0.3), g, 50) == 0.3)


def test_discrete_mark_frequency():
    g = RngSpec(5).generator("measure1-marks")
    z = sample_marks(MarkDistribution.discrete([(0.1, 0.25), (0.2, 0.75)]), g, 100_000)
    assert set(np.unique(z)) == {0.1, 0.2}
    assert abs(np.mean(z == 0.2) - 0.75) <= 0.005


def test_uniform_mark_mean():
    g = RngSpec(6).generator("measure1-marks")
    z = sample_marks(MarkDistribution.uniform(0.0, 1.0), g, 100_000)
    assert abs(z.mean() - 0.5) <= 0.004
    assert z.min() >= 0.0 and z.max() < 1.0


def _two_measures(l1=2.0, l2=1.0):
    spec = presets.baseline()
    return replace(spec, pi1=LevyMeasureSpec(l1, MarkDistribution.uniform(0.0, 1.0)),
                   pi2=LevyMeasureSpec(l2, MarkDistribution.atom(1.0)))


def test_no_measures_empty_schedule():
    assert len(build_schedule(presets.deterministic(), 10.0, RngSpec())) == 0


def test_total_event_count():
    n = len(build_schedule(_two_measures(), 50.0, RngSpec(3)))
    assert abs(n - 150) <= 3 * np.sqrt(150)


def test_superposition_chi_square():
    spec = _two_measures()
    counts = np.array([len(build_schedule(spec, 5.0, RngSpec(8, k))) for k in range(10_000)])
    lam = 15.0
    # tails pooled so every bin expects > 5 counts
    obs = np.array([np.sum(counts <= 5)] + [np.sum(counts == k) for k in range(6, 26)]
                   + [np.sum(counts >= 26)])
    probs = np.concatenate([[stats.poisson.cdf(5, lam)], stats.poisson.pmf(np.arange(6, 26), lam),
                            [stats.poisson.sf(25, lam)]])
    chi2 = stats.chisquare(obs, probs * len(counts))
    assert chi2.pvalue > 0.001


def test_same_rng_same_schedule():
    spec = _two_measures()
    a = build_schedule(spec, 20.0, RngSpec(42, 7))
    b = build_schedule(spec, 20.0, RngSpec(42, 7))
    assert a == b
    assert a != build_schedule(spec, 20.0, RngSpec(42, 8))


def test_measure1_stream_isolated_from_lambda2():
    a = build_schedule(_two_measures(l2=1.0), 20.0, RngSpec(9))
    b = build_schedule(_two_measures(l2=4.0), 20.0, RngSpec(9))
    assert np.array_equal(a.of_measure(1), b.of_measure(1))
    ma = a.marks[a.measure_ids == 1]
    mb = b.marks[b.measure_ids == 1]
    assert np.array_equal(ma, mb)


def test_schedule_ordering_and_range():
    s = build_schedule(_two_measures(5.0, 5.0), 30.0, RngSpec(1))
    assert np.all(np.diff(s.times) > 0)
    assert s.times[0] > 0 and s.times[-1] < 30.0
    assert set(np.unique(s.measure_ids)) == {1, 2}
    for ev in s:
        assert ev.measure_id in (1, 2)


def test_schedule_csv(tmp_path):
    s = build_schedule(_two_measures(), 3.0, RngSpec(2))
    p = tmp_path / "ev.csv"
    write_schedule_csv(s, p, provenance="seed=2")
    lines = p.read_text().splitlines()
    assert lines[0] == "# seed=2"
    assert lines[1] == "time,measure_id,mark"
    assert len(lines) == 2 + len(s)
    assert float(lines[2].split(",")[0]) == s.times[0]


def test_empty_schedule():
    s = JumpSchedule.empty(5.0)
    assert len(s) == 0 and s.horizon == 5.0


def test_rng_spec_bounds():
    with pytest.raises(ValueError):
        RngSpec(-1)
    RngSpec(2 ** 64 - 1, 2 ** 64 - 1).generator("brownian").random()
