import math

import numpy as np
import pytest

from platoonvn import NetworkParams, SimConfig
from platoonvn.counts import count_mean_var, palm_count_mean
from platoonvn.coverage import sir_coverage
from platoonvn.loads import tagged_load_mean, typical_load_variance
from platoonvn.montecarlo import (
    _owned,
    _resolve_cell,
    bhattacharyya,
    coverage_estimate,
    ks_distance,
    ks_sample_vs_cdf,
    sector_radius,
    simulate_chords,
    simulate_counts,
    simulate_palm_count,
    simulate_sir,
    simulate_tagged_load,
    simulate_typical_load,
    simulate_void_count,
    summary,
)
from platoonvn.samplers import sample_ppp_2d

P = NetworkParams()
SCALE = 1 / math.sqrt(P.lambda_b)


def within(dist, target, k=4.0):
    return abs(dist.mean() - target) < k * dist.sem()


def test_config_validation_and_round_trip():
    cfg = SimConfig(P, mode="tagged_load", seed=5, replications=10)
    assert cfg.window_radius == pytest.approx(10 * SCALE) and cfg.guard_margin == pytest.approx(2 * SCALE)
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
    import json

    assert SimConfig.from_json(json.dumps(cfg.to_dict())) == cfg
    for bad in (dict(mode="x"), dict(scenario="x"), dict(window_radius=SCALE), dict(guard_margin=0.1 * SCALE),
                dict(replications=0), dict(p_on=2.0), dict(silencing="x")):
        with pytest.raises(ValueError):
            SimConfig(P, **bad)
    with pytest.raises(ValueError):
        SimConfig.from_dict({"bogus": 1})


def test_sector_radius_bounds_the_cell():
    g = np.random.default_rng(1)
    for _ in range(20):
        bs = sample_ppp_2d(P.lambda_b, 6.0, g)
        bs, R, _, _ = _resolve_cell((0.0, 0.0), bs, 6.0, P.lambda_b, g)
        # points just outside b(o, R) are never owned by the origin
        th = g.uniform(0, 2 * np.pi, 2000)
        ring = (R * 1.0001) * np.column_stack([np.cos(th), np.sin(th)])
        d_origin = np.hypot(*ring.T)
        d_other = np.min(np.hypot(ring[:, None, 0] - bs[None, :, 0], ring[:, None, 1] - bs[None, :, 1]), axis=1)
        assert np.all(d_other < d_origin)
        inside = R * np.sqrt(g.random((500, 1))) * np.column_stack([np.cos(th[:500]), np.sin(th[:500])])
        brute = np.hypot(*inside.T) < np.min(
            np.hypot(inside[:, None, 0] - bs[None, :, 0], inside[:, None, 1] - bs[None, :, 1]), axis=1)
        assert np.array_equal(_owned(inside, (0.0, 0.0), bs, R), brute)
    assert sector_radius((0.0, 0.0), np.array([[1.0, 0.0]])) == math.inf


def test_determinism_and_worker_independence():
    cfg = SimConfig(P, replications=300, block_size=100, seed=9)
    a = simulate_counts(cfg)
    assert a.to_json() == simulate_counts(cfg).to_json()
    assert a.to_json() == simulate_counts(cfg.replace(workers=2)).to_json()
    assert not np.array_equal(a.counts, simulate_counts(cfg.replace(seed=10)).counts)
    assert a.total == 300


def test_typical_load_mean():
    for sc in ("PTS", "NPTS"):
        d = simulate_typical_load(SimConfig(P, scenario=sc, replications=3000, seed=2))
        assert within(d, 15.0)


def test_tagged_load_mean():
    d = simulate_tagged_load(SimConfig(P, mode="tagged_load", replications=3000, seed=3))
    assert within(d, tagged_load_mean(P))


@pytest.mark.parametrize("r", [0.1, 0.25])
def test_palm_and_void_counts(r):
    d = simulate_palm_count(SimConfig(P, mode="palm_count", radius=r, replications=3000, seed=4))
    assert within(d, palm_count_mean(r, P))
    v = simulate_void_count(SimConfig(P, mode="void", radius=r, replications=3000, seed=5))
    assert within(v, count_mean_var(r, P)[0])


def test_window_doubling_does_not_shift_mean():
    base = SimConfig(P, replications=4000, seed=6)
    a = simulate_counts(base)
    b = simulate_counts(base.replace(window_radius=2 * base.window_radius, stream_id=1))
    assert abs(a.mean() - b.mean()) < 3 * math.hypot(a.sem(), b.sem())


def test_pooled_matches_one_per_replication():
    one = simulate_counts(SimConfig(P, replications=20_000, seed=7))
    pooled = simulate_counts(SimConfig(P, pooled=True, replications=60, block_size=10, seed=7,
                                       window_radius=20 * SCALE, guard_margin=6 * SCALE))
    assert pooled.pooled and pooled.meta["cells"] == pooled.total
    assert pooled.meta["unresolved_cells"] < 0.02 * pooled.total
    assert ks_distance(one, pooled) < 0.02


def test_variance_trend_in_cluster_size():
    emp = [simulate_counts(SimConfig(P.replace(a=a), replications=4000, seed=8)).variance()
           for a in (0.05, 0.25, 1.0)]
    assert emp[0] > emp[1] > emp[2]
    for a, v in zip((0.05, 0.25, 1.0), emp):
        assert v == pytest.approx(typical_load_variance(P.replace(a=a)), rel=0.15)


def test_sir_alpha4():
    p = P.replace(alpha=4.0)
    s = simulate_sir(SimConfig(p, mode="sir", replications=20_000, seed=9))
    q, se = coverage_estimate(s, 1.0)
    assert abs(q - sir_coverage(1.0, 1.0, 4.0)) < max(0.01, 4 * se)


def test_sir_thinned_and_load_coupled():
    p = P.replace(alpha=4.0)
    thin = simulate_sir(SimConfig(p, mode="sir", replications=5000, seed=10, p_on=0.7))
    q, se = coverage_estimate(thin, 1.0)
    assert abs(q - sir_coverage(1.0, 0.7, 4.0)) < 4 * se
    coupled = simulate_sir(SimConfig(p, mode="sir", replications=2000, seed=11, silencing="load_coupled"))
    assert 0.0 < coverage_estimate(coupled, 1.0)[0] < 1.0


def test_chord_samples():
    seg = simulate_chords(SimConfig(NetworkParams(lambda_b=1.0), mode="chord", replications=2000, seed=12))
    assert seg.shape == (2000, 2) and np.all(seg > 0)
    # L1 and L2 are exchangeable
    assert abs(seg[:, 0].mean() - seg[:, 1].mean()) < 4 * seg[:, 0].std() / math.sqrt(2000) * math.sqrt(2)


def test_early_stop():
    from platoonvn.loads import typical_load_approx

    ref = typical_load_approx(P).pmf
    d = simulate_counts(SimConfig(P, replications=60_000, seed=13), reference=ref, early_stop=True)
    assert d.replications in (20_000, 30_000, 40_000, 50_000, 60_000)
    assert len(d.meta["bc_history"]) * 10_000 == d.replications
    assert d.meta["bc_history"][-1] > 0.98


def test_statistics_helpers():
    assert bhattacharyya([0.5, 0.5], [0.5, 0.5]) == pytest.approx(1.0)
    assert bhattacharyya([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert ks_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert ks_sample_vs_cdf(np.array([0.5]), lambda x: x) == pytest.approx(0.5)
    g = np.random.default_rng(0)
    assert ks_sample_vs_cdf(g.random(20_000), lambda x: x) < 0.015
    s = summary(simulate_counts(SimConfig(P, replications=50, seed=1)))
    assert s["replications"] == 50 == s["cells"]


def test_count_modes_reject_real_valued_modes():
    with pytest.raises(ValueError):
        simulate_counts(SimConfig(P, mode="sir", replications=10))
