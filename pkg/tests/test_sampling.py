from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratqec import _kernels
from stratqec.sampling import (BLOCK, SamplerConfig, SubspaceStats, WeightOutOfRange,
                               binomial_weight_probability, read_stats_csv, sample_baseline,
                               sample_until_errors, sample_weight_w, stats_from_json,
                               stats_to_json, write_histogram_csv, write_stats_csv)


def test_binomial_weights_sum_to_one_and_peak_at_four():
    c, p = 9121, 5e-4
    probs = [binomial_weight_probability(c, p, w) for w in range(c + 1)]
    assert abs(math.fsum(probs) - 1.0) < 1e-9
    assert int(np.argmax(probs)) == 4


@pytest.mark.parametrize("c, p, w", [(10, 0.3, 3), (585, 5e-4, 2), (3145, 1e-3, 0)])
def test_binomial_matches_direct_formula(c, p, w):
    want = math.comb(c, w) * p**w * (1 - p) ** (c - w)
    assert binomial_weight_probability(c, p, w) == pytest.approx(want, rel=1e-12)


def test_binomial_edges():
    assert binomial_weight_probability(5, 0.0, 0) == 1.0
    assert binomial_weight_probability(5, 1.0, 5) == 1.0
    with pytest.raises(WeightOutOfRange):
        binomial_weight_probability(5, 0.1, 6)


def test_draw_fault_rows_distinct_locations():
    rng = np.random.default_rng(0)
    n, w, c = 500, 7, 20
    u = rng.random((n, w))
    paulis = rng.integers(0, 3, (n, w))
    idx = np.empty((n, w), dtype=np.int64)
    _kernels.draw_fault_rows(u, paulis, np.full(n, w, dtype=np.int64), c, idx)
    locs = idx // 3
    assert all(len(set(row)) == w for row in locs.tolist())
    assert locs.min() >= 0 and locs.max() < c
    # every location is about equally likely
    counts = np.bincount(locs.ravel(), minlength=c)
    assert counts.min() > 0.7 * counts.mean()


def test_shot_streams_resume(surface3):
    _, g, dec = surface3
    cfg = SamplerConfig(seed=7)
    whole = sample_weight_w(g, dec, 6, 2500, cfg)
    a = sample_weight_w(g, dec, 6, 1234, cfg)
    b = sample_weight_w(g, dec, 6, 1266, cfg, start_shot=1234)
    assert a.num_logical_errors + b.num_logical_errors == whole.num_logical_errors


def test_thread_count_does_not_change_results(surface3):
    _, g, dec = surface3
    one = sample_weight_w(g, dec, 5, 3000, SamplerConfig(seed=3, threads=1))
    two = sample_weight_w(g, dec, 5, 3000, SamplerConfig(seed=3, threads=2))
    assert one == two


def test_seeds_differ(surface3):
    _, g, dec = surface3
    a = sample_weight_w(g, dec, 8, 2000, SamplerConfig(seed=1))
    b = sample_weight_w(g, dec, 8, 2000, SamplerConfig(seed=2))
    assert a.num_logical_errors != b.num_logical_errors


def test_fault_tolerant_weight_has_no_errors(surface3):
    _, g, dec = surface3
    assert sample_weight_w(g, dec, 1, 5000, SamplerConfig(seed=0)).num_logical_errors == 0


def test_until_errors_stops_on_the_exact_shot(surface3):
    _, g, dec = surface3
    cfg = SamplerConfig(seed=5)
    res = sample_until_errors(g, dec, 4, 10, 10**6, cfg)
    assert res.stop == "errors" and res.num_logical_errors == 11
    assert sample_weight_w(g, dec, 4, res.num_samples, cfg).num_logical_errors == 11
    assert sample_weight_w(g, dec, 4, res.num_samples - 1, cfg).num_logical_errors == 10


def test_until_errors_budget_and_prior(surface3):
    _, g, dec = surface3
    cfg = SamplerConfig(seed=5)
    part = sample_until_errors(g, dec, 4, 10**6, 1500, cfg)
    assert part.stop == "budget" and part.num_samples == 1500
    rest = sample_until_errors(g, dec, 4, 10**6, 700, cfg, prior=part)
    assert rest == SubspaceStats(4, 2200, sample_weight_w(g, dec, 4, 2200, cfg)
                                 .num_logical_errors, "budget")


def test_weight_out_of_range(surface3):
    _, g, dec = surface3
    with pytest.raises(WeightOutOfRange):
        sample_weight_w(g, dec, g.num_locations + 1, 10, SamplerConfig())


def test_baseline_stops_at_error_target(surface3):
    _, g, dec = surface3
    res = sample_baseline(g, dec, 2e-3, SamplerConfig(seed=1, p=2e-3), max_errors=20)
    assert res.stop_reason == "errors" and res.logical_errors == 20
    assert sum(s for s, _ in res.weight_histogram.values()) == res.shots
    assert sum(e for _, e in res.weight_histogram.values()) == res.logical_errors


def test_baseline_weight_histogram_is_binomial(surface3):
    _, g, dec = surface3
    p = 2e-3
    res = sample_baseline(g, dec, p, SamplerConfig(seed=2, p=p), max_errors=None, max_shots=20000)
    assert res.stop_reason == "shots" and res.shots == 20000
    c = g.num_locations
    for w in range(0, 4):
        want = binomial_weight_probability(c, p, w) * res.shots
        got = res.weight_histogram.get(w, [0, 0])[0]
        assert abs(got - want) < 5 * math.sqrt(want) + 1


def test_baseline_reproducible_and_time_bound(surface3):
    _, g, dec = surface3
    cfg = SamplerConfig(seed=9, p=1e-3)
    a = sample_baseline(g, dec, 1e-3, cfg, max_errors=5)
    b = sample_baseline(g, dec, 1e-3, cfg, max_errors=5)
    assert a.to_dict() == b.to_dict()
    t = sample_baseline(g, dec, 1e-3, cfg, max_errors=None, max_seconds=1e-9)
    assert t.stop_reason == "time" and t.shots == BLOCK


def test_baseline_argument_checks(surface3):
    _, g, dec = surface3
    with pytest.raises(ValueError):
        sample_baseline(g, dec, 0.0, SamplerConfig(), max_errors=10)
    with pytest.raises(ValueError):
        sample_baseline(g, dec, 1e-3, SamplerConfig(), max_errors=None)
    with pytest.raises(ValueError):
        SamplerConfig(p=0.0)


def test_stats_validation_and_merge():
    with pytest.raises(ValueError):
        SubspaceStats(3, 5, 6)
    merged = SubspaceStats(3, 10, 1).merged(SubspaceStats(3, 5, 2, "errors"))
    assert merged == SubspaceStats(3, 15, 3, "errors")
    assert merged.p_hat == pytest.approx(0.2)
    with pytest.raises(ValueError):
        SubspaceStats(3, 1, 0).merged(SubspaceStats(4, 1, 0))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 10**6), st.integers(0, 10**6)),
                min_size=1, max_size=8, unique_by=lambda x: x[0]))
def test_csv_and_json_round_trip(tmp_path_factory, rows):
    stats = [SubspaceStats(w, max(n, e), min(n, e)) for w, n, e in rows]
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    write_stats_csv(path, stats)
    back = read_stats_csv(path)
    key = lambda s: (s.weight, s.num_samples, s.num_logical_errors)  # noqa: E731
    assert sorted(map(key, back)) == sorted(map(key, stats))
    assert list(map(key, stats_from_json(stats_to_json(stats)))) == list(map(key, stats))


def test_histogram_csv(tmp_path, surface3):
    _, g, dec = surface3
    res = sample_baseline(g, dec, 1e-3, SamplerConfig(seed=1, p=1e-3), max_errors=3)
    write_histogram_csv(tmp_path / "h.csv", res)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "weight,samples,errors,p_hat"
    assert len(lines) == len(res.weight_histogram) + 1
