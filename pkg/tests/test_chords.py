import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from platoonvn.chords import (
    _gate,
    default_grid,
    joint_pdf_mass,
    length_bias,
    length_debias,
    residual_chord_joint_pdf,
    tagged_chord_pdf,
    two_disk_union_area,
    typical_chord_pdf,
)
from platoonvn.errors import DomainError, NormalizationFailure
from platoonvn.montecarlo import tagged_chord_once


def union_area_by_points(l1, l2, y, theta, n=400_000, seed=0):
    yx, yy = y * math.cos(theta), y * math.sin(theta)
    r1, r2 = math.hypot(l1 - yx, yy), math.hypot(-l2 - yx, yy)
    lo_x, hi_x = min(l1 - r1, -l2 - r2), max(l1 + r1, -l2 + r2)
    half = max(r1, r2)
    g = np.random.default_rng(seed)
    px = g.uniform(lo_x, hi_x, n)
    py = g.uniform(-half, half, n)
    inside = ((px - l1) ** 2 + py**2 <= r1 * r1) | ((px + l2) ** 2 + py**2 <= r2 * r2)
    return inside.mean() * (hi_x - lo_x) * 2 * half


@pytest.mark.parametrize("cfg", [
    (0.5, 0.8, 0.3, 1.0),  # acute
    (0.2, 0.9, 0.6, 0.4),  # l1 < y cos(theta): obtuse piece
    (1.0, 0.1, 0.7, 2.6),  # l2 < -y cos(theta)
    (0.4, 0.4, 0.0, 0.0),  # station at the origin
    (0.3, 0.6, 0.5, 3.1),  # nearly on the road
])
def test_union_area_matches_point_sampling(cfg):
    v, _, _ = two_disk_union_area(*cfg)
    assert v == pytest.approx(union_area_by_points(*cfg), rel=5e-3)


@given(st.floats(0.01, 2), st.floats(0.01, 2), st.floats(0.0, 2), st.floats(0.0, math.pi))
def test_union_area_partials(l1, l2, y, theta):
    h = 1e-6
    _, dv1, dv2 = two_disk_union_area(l1, l2, y, theta)
    f = lambda a, b: two_disk_union_area(a, b, y, theta)[0]
    assert dv1 == pytest.approx((f(l1 + h, l2) - f(l1 - h, l2)) / (2 * h), rel=1e-5, abs=1e-6)
    assert dv2 == pytest.approx((f(l1, l2 + h) - f(l1, l2 - h)) / (2 * h), rel=1e-5, abs=1e-6)


def test_union_area_rejects_negative_lengths():
    with pytest.raises(DomainError):
        two_disk_union_area(-0.1, 0.2, 0.3, 0.0)


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_joint_pdf_nonnegative_and_symmetric(l1, l2):
    f = residual_chord_joint_pdf(l1, l2, 1.0)
    assert f >= 0.0
    assert f == pytest.approx(residual_chord_joint_pdf(l2, l1, 1.0), rel=1e-9, abs=1e-14)


@pytest.mark.parametrize("lam", [1.0, 5.0])
def test_joint_pdf_mass(lam):
    assert joint_pdf_mass(lam) == pytest.approx(1.0, abs=5e-3)


def test_joint_pdf_scaling():
    lam = 4.0
    assert residual_chord_joint_pdf(0.2, 0.3, lam) == pytest.approx(
        lam * residual_chord_joint_pdf(0.4, 0.6, 1.0), rel=1e-6)


def test_grid_layout():
    g = default_grid(4.0)
    assert g[0] == 0.0 and g.size == 401
    assert g[1] == pytest.approx(1e-3 / 2) and g[-1] == pytest.approx(8.0 / 2)


@pytest.mark.parametrize("lam", [1.0, 5.0, 10.0])
def test_chord_pdfs_normalized_and_mean(lam):
    tag = tagged_chord_pdf(lam)
    typ = typical_chord_pdf(lam)
    assert abs(tag.meta["raw_integral"] - 1.0) < 5e-3
    assert abs(typ.meta["raw_integral"] - 1.0) < 5e-3
    assert tag.integral() == pytest.approx(1.0, abs=1e-12)
    assert typ.mean() == pytest.approx(math.pi / (4 * math.sqrt(lam)), rel=1e-2)
    assert np.all(tag.density >= 0)


def test_scaled_table_matches_direct_computation():
    lam = 3.0
    scaled = tagged_chord_pdf(lam)
    direct = tagged_chord_pdf(lam, direct=True)
    assert np.max(np.abs(scaled.density - direct.density)) < 1e-6 * scaled.density.max()


def test_tagged_pdf_vanishes_at_ends():
    tag = tagged_chord_pdf(1.0)
    assert tag.density[0] == 0.0
    assert tag(1e-4) < 1e-2 * tag.density.max()
    assert tag.density[-1] < 1e-8 * tag.density.max()
    assert typical_chord_pdf(1.0).density[-1] < 1e-8


def test_length_bias_identity_pointwise():
    tag = tagged_chord_pdf(1.0)
    typ = typical_chord_pdf(1.0)
    pos = (tag.grid > 0) & (typ.density > 1e-6 * typ.density.max())
    ratio = tag.density[pos] / tag.grid[pos] / typ.density[pos]
    assert np.max(np.abs(ratio / ratio[0] - 1.0)) < 1e-3


def test_length_bias_round_trip():
    tag = tagged_chord_pdf(1.0)
    back = length_bias(length_debias(tag))
    assert np.max(np.abs(back.density - tag.density)) < 1e-3 * tag.density.max()


def test_gate_raises_on_bad_normalization():
    g = np.linspace(0, 1, 11)
    with pytest.raises(NormalizationFailure) as err:
        _gate(g, 2.0 * np.ones_like(g), "test density", {})
    assert err.value.integral == pytest.approx(2.0)


def test_mc_chord_mean_matches_tagged_pdf():
    g = np.random.default_rng(4)
    c = np.array([sum(tagged_chord_once(1.0, 10.0, g)) for _ in range(3000)])
    assert abs(c.mean() - tagged_chord_pdf(1.0).mean()) < 4 * c.std() / math.sqrt(c.size)
