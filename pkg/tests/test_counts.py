import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from platoonvn import NetworkParams
from platoonvn.counts import (
    count_factorial_moments,
    count_mean_var,
    count_pgf,
    count_pgf_direct,
    count_pmf,
    count_variance_as_printed,
    laplace_functional,
    mcp_line_count_pgf,
    npts_count_mean_var,
    palm_count_mean,
    palm_count_pgf,
    palm_count_pmf,
    scenario_mean_var,
    tagged_cluster_pgf,
)
from platoonvn.errors import DomainError

P = NetworkParams()
RADII = [0.1, 0.25, 0.5, 1.0]


def fd_mean(f, h=1e-4):
    return (3 * f(1.0) - 4 * f(1.0 - h) + f(1.0 - 2 * h)) / (2 * h)


@pytest.mark.parametrize("scenario", ["PTS", "NPTS"])
@pytest.mark.parametrize("r", RADII)
def test_pgf_normalized(r, scenario):
    assert count_pgf(1.0, r, P, scenario=scenario) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("r", [0.1, 0.5])
def test_pgfs_monotone_and_convex(r):
    s = np.linspace(0.0, 1.0, 21)
    for f in (lambda z: count_pgf(z, r, P), lambda z: palm_count_pgf(z, r, P),
              lambda z: tagged_cluster_pgf(z, r, P), lambda z: count_pgf(z, r, P, scenario="NPTS")):
        v = np.array([f(z) for z in s])
        assert np.all((v > 0) & (v <= 1 + 1e-12))
        assert np.all(np.diff(v) >= -1e-14)
        assert np.all(np.diff(v, 2) >= -1e-12)


@pytest.mark.parametrize("r", RADII)
def test_two_quadrature_routes_agree(r):
    for s in (0.0, 0.4, 0.95):
        assert count_pgf(s, r, P) == pytest.approx(count_pgf_direct(s, r, P), rel=1e-9, abs=1e-300)


@pytest.mark.parametrize("a", [0.05, 0.25, 2.0])
@pytest.mark.parametrize("r", RADII)
def test_mean_is_lambda_m_pi_r2(r, a):
    p = P.replace(a=a)
    mean = p.lambda_m * math.pi * r * r
    assert count_mean_var(r, p)[0] == pytest.approx(mean)
    assert count_factorial_moments(r, p)[0] == pytest.approx(mean, rel=1e-9)
    assert fd_mean(lambda z: math.log(count_pgf(z, r, p))) == pytest.approx(mean, rel=1e-3)


@pytest.mark.parametrize("a", [0.05, 0.25, 2.0])
@pytest.mark.parametrize("r", [0.1, 0.5])
def test_variance_closed_form_by_quadrature(r, a):
    p = P.replace(a=a)
    f1, f2 = count_factorial_moments(r, p)
    assert count_mean_var(r, p)[1] == pytest.approx(f1 + f2, rel=1e-9)
    # Fixed wide support: the automatic 1e-6 cut drops tail variance.
    mean, var = count_mean_var(r, p)
    pmf = count_pmf(r, int(mean + 25 * math.sqrt(var)) + 50, p)
    assert pmf.variance() == pytest.approx(var, rel=1e-6)


def test_variance_continuous_at_a_equals_r():
    r = 0.3
    for eps in (1e-6, 1e-8):
        lo = count_mean_var(r, P.replace(a=r - eps))[1]
        hi = count_mean_var(r, P.replace(a=r + eps))[1]
        assert abs(lo - hi) / hi < 1e-9 + 1e2 * eps


def test_printed_variance_coefficient_is_discontinuous():
    r, eps = 0.3, 1e-9
    printed = count_variance_as_printed(r, P.replace(a=r - eps))
    continuous = count_mean_var(r, P.replace(a=r + eps))[1]
    assert abs(printed - continuous) / continuous > 1e-2


def test_frozen_values():
    assert count_mean_var(0.5, P)[1] == pytest.approx(1507.3657718641714, rel=1e-12)
    pmf = count_pmf(0.5, None, P)
    assert pmf.p(50) == pytest.approx(0.010594439854020605, rel=1e-9)
    assert palm_count_mean(0.2, P) == pytest.approx(25.02477796076938, rel=1e-12)


@pytest.mark.parametrize("scenario", ["PTS", "NPTS"])
@pytest.mark.parametrize("r", [0.1, 0.5])
def test_bell_matches_inversion(r, scenario):
    bell = count_pmf(r, 120, P, method="bell", scenario=scenario)
    inv = count_pmf(r, 120, P, method="pgf_inversion", scenario=scenario)
    assert np.max(np.abs(bell.masses - inv.masses)) < 1e-6
    assert bell.provenance == "bell" and inv.provenance == "pgf_inversion"


def test_literal_bell_route_agrees_where_it_succeeds():
    lit = count_pmf(0.1, 20, P, method="bell_literal")
    assert np.max(np.abs(lit.masses - count_pmf(0.1, 20, P).masses)) < 1e-9


@pytest.mark.parametrize("r", RADII)
def test_pmf_sums_to_one_with_tail(r):
    pmf = count_pmf(r, None, P)
    assert pmf.masses.sum() + pmf.tail_mass == pytest.approx(1.0, abs=1e-9)
    assert pmf.masses.sum() > 1 - 1e-6 - pmf.tail_mass
    assert pmf.mean() == pytest.approx(count_mean_var(r, P)[0], rel=1e-4)


def test_npts_moments():
    r = 0.4
    mean, var = npts_count_mean_var(r, P)
    pmf = count_pmf(r, None, P, scenario="NPTS")
    assert pmf.mean() == pytest.approx(mean, rel=1e-5)
    assert pmf.variance() == pytest.approx(var, rel=1e-4)


def test_convergence_to_ppp_for_wide_clusters():
    p = P.replace(a=10.0)
    for r in RADII:
        v_pts = count_mean_var(r, p)[1]
        v_npts = npts_count_mean_var(r, p)[1]
        assert abs(v_pts - v_npts) / v_npts < 0.05


@given(st.floats(0.01, 1.0))
def test_palm_mean_exceeds_mean(r):
    assert palm_count_mean(r, P) >= count_mean_var(r, P)[0]


@pytest.mark.parametrize("r", [0.1, 0.2, 0.25])
def test_palm_mean_matches_pgf_derivative(r):
    assert fd_mean(lambda z: palm_count_pgf(z, r, P)) == pytest.approx(palm_count_mean(r, P), rel=1e-3)


def test_palm_mean_beyond_a():
    r = 0.6
    assert fd_mean(lambda z: palm_count_pgf(z, r, P)) == pytest.approx(palm_count_mean(r, P), rel=1e-3)


def test_palm_pmf_mean():
    pmf = palm_count_pmf(0.2, None, P)
    assert pmf.mean() == pytest.approx(palm_count_mean(0.2, P), rel=1e-5)
    assert pmf.provenance == "convolution"


def test_line_count_pgf_hits_and_misses():
    with pytest.raises(DomainError):
        mcp_line_count_pgf(0.3, 0.5, 0.7, P)
    assert mcp_line_count_pgf(1.0, 0.5, 0.1, P) == pytest.approx(1.0)
    assert mcp_line_count_pgf(0.3, 0.5, 0.1, P) < 1.0


@pytest.mark.parametrize("s", [0.2, 0.7])
def test_laplace_functional_reduces_to_count_pgf(s):
    r = 0.3
    v = lambda x, y: -math.log(s) * ((x * x + y * y) <= r * r)
    assert laplace_functional(v, P, r) == pytest.approx(count_pgf(s, r, P), rel=1e-6)
    # The indicator has a jump inside each chord, so the product rule is only
    # accurate to a few digits for the Palm version.
    assert laplace_functional(v, P, r, palm=True) == pytest.approx(palm_count_pgf(s, r, P), rel=2e-3)


def test_laplace_functional_smooth_test_function():
    # v = c |z|^2 on b(o, R): compare with a brute MC average.
    from platoonvn.samplers import sample_traffic_xy

    R, c = 0.3, 0.4
    lf = laplace_functional(lambda x, y: c * (x * x + y * y) * ((x * x + y * y) <= R * R), P, R)
    g = np.random.default_rng(3)
    vals = []
    for _ in range(4000):
        xy = sample_traffic_xy(P, R, g)
        vals.append(math.exp(-c * float(np.sum(xy**2))))
    vals = np.array(vals)
    assert abs(vals.mean() - lf) < 4 * vals.std() / math.sqrt(vals.size)


def test_domain_errors():
    with pytest.raises(DomainError):
        count_pmf(-0.1, 10, P)
    with pytest.raises(ValueError):
        scenario_mean_var(0.1, P, "bogus")
