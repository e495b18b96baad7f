import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from platoonvn import NetworkParams, RngSeed
from platoonvn.counts import palm_count_mean
from platoonvn.samplers import (
    LineAtom,
    sample_mcp_1d,
    sample_palm_plp_mcp,
    sample_plp,
    sample_plp_mcp,
    sample_plp_ppp,
    sample_ppp_2d,
    sample_traffic,
    sample_traffic_xy,
)

P = NetworkParams()


def rng(block=0, stream=0, seed=7):
    return RngSeed(seed, stream).generator(block)


def test_rng_substreams_are_deterministic_and_distinct():
    a = rng(3).random(5)
    assert np.array_equal(a, rng(3).random(5))
    assert not np.array_equal(a, rng(4).random(5))
    assert not np.array_equal(a, rng(3, stream=1).random(5))
    with pytest.raises(ValueError):
        RngSeed(-1)


def test_realization_replay_is_byte_identical(tmp_path):
    a = sample_palm_plp_mcp(P, 1.0, rng(1))
    b = sample_palm_plp_mcp(P, 1.0, rng(1))
    assert a.to_json() == b.to_json()
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().startswith("# ")


@given(st.integers(0, 10_000))
def test_vehicles_lie_on_their_lines(seed):
    real = sample_plp_mcp(P, 0.8, np.random.default_rng(seed), center=(0.3, -0.2))
    for i, ln in enumerate(real.lines):
        sel = real.line_id == i
        assert np.all(ln.distance(real.xy[sel]) < 1e-12)
        assert np.allclose(ln.point(real.positions[sel]), real.xy[sel], atol=1e-15)
    assert np.all(np.hypot(real.xy[:, 0] - 0.3, real.xy[:, 1] + 0.2) <= 0.8 + 1e-12)


def test_line_atom_validation_and_chord():
    with pytest.raises(ValueError):
        LineAtom(0.0, np.pi)
    ln = LineAtom(0.6, 0.0)
    lo, hi = ln.chord((0.0, 0.0), 1.0)
    assert hi - lo == pytest.approx(2 * np.sqrt(1 - 0.36))
    assert ln.chord((0.0, 0.0), 0.5) is None


def test_line_count_is_poisson_and_phi_uniform():
    R, g = 0.7, rng(2)
    n = np.array([len(sample_plp(P.lambda_L, R, g)) for _ in range(4000)])
    mean = 2 * np.pi * R * P.lambda_L
    assert abs(n.mean() - mean) < 4 * np.sqrt(mean / n.size)
    assert n.var() == pytest.approx(mean, rel=0.08)
    phis = np.array([ln.phi for _ in range(300) for ln in sample_plp(P.lambda_L, 2.0, g)])
    assert stats.kstest(phis / np.pi, "uniform").pvalue > 1e-3
    rhos = np.array([ln.rho for _ in range(300) for ln in sample_plp(P.lambda_L, 2.0, g)])
    assert np.all(np.abs(rhos) <= 2.0)


def test_mcp_offsets_within_a_of_parent():
    g = rng(5)
    for thinned in (True, False):
        pos, ids, parents = sample_mcp_1d(P, (-1.0, 2.0), g, thinned=thinned)
        assert np.all(np.abs(pos - parents[ids]) <= P.a + 1e-12)
        assert np.all((pos >= -1.0) & (pos <= 2.0))


def test_thinned_and_literal_mcp_have_same_law():
    g = rng(6)
    thin = np.array([sample_mcp_1d(P, 0.3, g, True)[0].size for _ in range(6000)])
    lit = np.array([sample_mcp_1d(P, 0.3, g, False)[0].size for _ in range(6000)])
    assert stats.ks_2samp(thin, lit).pvalue > 1e-3
    assert thin.mean() == pytest.approx(P.m * P.lambda_P * 0.6, rel=0.05)


@pytest.mark.parametrize("scenario", ["PTS", "NPTS"])
def test_planar_density(scenario):
    g, R, r = rng(8), 1.0, 0.5
    counts = np.array([sample_traffic(P, R, g, scenario).count_in_disk(r) for _ in range(3000)])
    mean = P.lambda_m * np.pi * r * r
    assert abs(counts.mean() - mean) < 4 * counts.std() / np.sqrt(counts.size)


def test_vectorized_sampler_matches_object_sampler():
    g1, g2 = rng(9), rng(10)
    a = np.array([len(sample_traffic_xy(P, 0.4, g1)) for _ in range(3000)])
    b = np.array([len(sample_plp_mcp(P, 0.4, g2)) for _ in range(3000)])
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_translation_invariance():
    g = rng(11)
    a = [sample_plp_mcp(P, 0.5, g).count_in_disk(0.5) for _ in range(1000)]
    b = [sample_plp_mcp(P, 0.5, g, center=(3.0, -2.0)).count_in_disk(0.5, center=(3.0, -2.0)) for _ in range(1000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_palm_structure_and_mean():
    g, r = rng(12), 0.2
    reals = [sample_palm_plp_mcp(P, 0.6, g) for _ in range(3000)]
    real = reals[0]
    assert real.typical and np.array_equal(real.xy[0], [0.0, 0.0])
    assert real.lines[-1].rho == 0.0
    counts = np.array([x.count_in_disk(r) for x in reals])
    assert abs(counts.mean() - palm_count_mean(r, P)) < 4 * counts.std() / np.sqrt(counts.size)
    xy = sample_traffic_xy(P, 0.6, g, palm=True)
    assert xy.shape[1] == 2


def test_ppp_traffic_has_no_platoons():
    real = sample_plp_ppp(P.lambda_L, 20.0, 1.0, rng(13))
    assert np.all(real.platoon_id == -1)
    assert json.loads(real.to_json())["meta"]["scenario"] == "NPTS"


def test_ppp_2d_annulus():
    pts = sample_ppp_2d(50.0, 2.0, rng(14), inner_radius=1.0)
    r = np.hypot(*pts.T)
    assert np.all((r >= 1.0) & (r <= 2.0))
    with pytest.raises(ValueError):
        sample_ppp_2d(1.0, 1.0, rng(0), inner_radius=2.0)
