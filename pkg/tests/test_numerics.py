import math

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import poisson

from platoonvn.numerics import (
    BellOverflow,
    QuadratureSpec,
    complete_bell,
    complete_bell_log,
    exp_series,
    gauss_legendre,
    integrate,
    pgf_invert,
    semi_infinite_integrate,
)

coef = st.floats(-5, 5, allow_nan=False)


@given(st.lists(coef, min_size=1, max_size=6), st.lists(coef, min_size=1, max_size=6), coef, coef)
def test_integrate_is_linear(c1, c2, alpha, beta):
    f = np.polynomial.Polynomial(c1)
    g = np.polynomial.Polynomial(c2)
    spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-13)
    combo = integrate(lambda x: alpha * f(x) + beta * g(x), -1.0, 2.0, spec)
    parts = alpha * integrate(f, -1.0, 2.0, spec) + beta * integrate(g, -1.0, 2.0, spec)
    assert abs(combo - parts) <= 1e-10 * (1 + abs(combo))


def test_integrate_matches_mpmath_on_kinked_integrand():
    f = lambda x: np.abs(np.sin(3 * x)) * np.exp(-x)
    ref = float(mpmath.quad(lambda x: abs(mpmath.sin(3 * x)) * mpmath.exp(-x),
                            [0, mpmath.pi / 3, 2 * mpmath.pi / 3, 2]))
    got = integrate(f, 0.0, 2.0, points=[math.pi / 3, 2 * math.pi / 3])
    assert got == pytest.approx(ref, rel=1e-10)


def test_inverse_sqrt_endpoint_singularity():
    # int_0^r t / sqrt(r^2 - t^2) dt = r
    r = 0.7
    spec = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-14).with_hint("inverse_sqrt_upper_endpoint")
    assert integrate(lambda t: t / np.sqrt(np.clip(r * r - t * t, 1e-300, None)), 0.0, r, spec) == pytest.approx(
        r, rel=1e-10)


def test_vector_integrand():
    got = integrate(lambda x: np.column_stack([x, x**2, np.cos(x)]), 0.0, 1.0)
    assert np.allclose(got, [0.5, 1 / 3, math.sin(1.0)], rtol=1e-12)


def test_semi_infinite():
    got = semi_infinite_integrate(lambda t: 1.0 / (1.0 + t**2), 1.0)
    assert got == pytest.approx(math.pi / 4, rel=1e-8)


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(0.0, 2.0, 8)
    assert float(w @ x**15) == pytest.approx(2.0**16 / 16, rel=1e-13)


@pytest.mark.parametrize("bad", [dict(rel_tol=0.0), dict(abs_tol=-1.0), dict(max_subdivisions=0)])
def test_quadrature_spec_validation(bad):
    with pytest.raises(ValueError):
        QuadratureSpec(**bad)


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4))
def test_complete_bell_closed_forms(x):
    x1, x2, x3, x4 = x
    b = complete_bell(x)
    assert b[0] == 1.0
    assert b[1] == pytest.approx(x1)
    assert b[2] == pytest.approx(x1**2 + x2, abs=1e-12)
    assert b[3] == pytest.approx(x1**3 + 3 * x1 * x2 + x3, abs=1e-10)
    assert b[4] == pytest.approx(x1**4 + 6 * x1**2 * x2 + 4 * x1 * x3 + 3 * x2**2 + x4, abs=1e-9)


def test_complete_bell_matches_sympy():
    x = [0.3, -1.2, 0.8, 2.0, -0.5, 1.1, 0.4]
    b = complete_bell(x)
    for n in range(1, len(x) + 1):
        ref = sum(sympy.bell(n, k, [sympy.Float(v, 30) for v in x[: n - k + 1]]) for k in range(1, n + 1))
        assert b[n] == pytest.approx(float(ref), rel=1e-12)


def test_bell_overflow_and_log_fallback():
    x = [50.0] * 400
    with pytest.raises(BellOverflow):
        complete_bell(x)
    sign, logb = complete_bell_log(x)
    # B_n(c, ..., c) is a Touchard polynomial; check a representable order.
    ref = float(mpmath.log(sum(mpmath.stirling2(20, k) * mpmath.mpf(50) ** k for k in range(21))))
    assert sign[20] == 1 and logb[20] == pytest.approx(ref, rel=1e-12)


def test_exp_series_is_scaled_bell():
    a = np.array([0.0, 0.4, 0.1, 0.05])
    s = sympy.symbols("s")
    series = sympy.series(sympy.exp(-0.3 + 0.4 * s + 0.1 * s**2 + 0.05 * s**3), s, 0, 10).removeO()
    ref = [float(series.coeff(s, k)) for k in range(10)]
    assert np.allclose(exp_series(-0.3, a, 9), ref, rtol=1e-12, atol=1e-15)


def test_exp_series_rejects_non_pgf_exponent():
    with pytest.raises(ArithmeticError):
        exp_series(0.0, np.array([0.0, -0.5]), 3)


def test_exp_series_survives_underflowing_constant():
    lam = 900.0
    p = exp_series(-lam, np.array([0.0, lam]), 1200)
    assert np.allclose(p[800:1000], poisson.pmf(np.arange(800, 1000), lam), rtol=1e-9)


@pytest.mark.parametrize("lam", [0.5, 3.0, 12.0, 20.0])
def test_pgf_invert_poisson(lam):
    pmf = pgf_invert(lambda s: np.exp(lam * (s - 1.0)), 60)
    assert np.max(np.abs(pmf.masses - poisson.pmf(np.arange(61), lam))) < 1e-10
    assert pmf.masses.sum() + pmf.tail_mass == pytest.approx(1.0, abs=1e-12)


def test_pgf_invert_rejects_non_pgf():
    from platoonvn.numerics import InvalidPgf

    with pytest.raises(InvalidPgf):
        pgf_invert(lambda s: 2.0 * s, 8)
