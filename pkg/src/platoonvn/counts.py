"""Count distributions of the platooned vehicle process in a disk.

S(r) is the number of vehicles in b(o, r); S_hat(r) is the same count under
the reduced Palm distribution (a vehicle at the origin, not counted).

A line at distance rho from the origin cuts b(o, r) in a chord of half-length
t = sqrt(r^2 - rho^2).  With lines Poisson in (rho, phi) at intensity lambda_L
on R x [0, pi), the log-PGF of S(r) is

    2 pi lambda_L * int_0^r (exp(g(s, t)) - 1) t / sqrt(r^2 - t^2) dt.

Taylor coefficients of that exponent are averages of the per-chord count PMF,
so the PMF of S(r) follows from one vector-valued quadrature and the scaled
Bell (exponential-series) recursion.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .distributions import DiscretePmf
from .errors import DomainError
from .kernels import NetworkParams, g_kernel, g_taylor_coefficients, kappa, lens_1d
from .numerics import (
    INVERSE_SQRT_UPPER,
    QuadratureSpec,
    complete_bell,
    exp_series,
    exp_series_rows,
    gauss_legendre_panels,
    integrate,
    pgf_invert,
)

PMF_MASS_TARGET = 1e-6
PMF_CAP = 2048
_SPEC = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-14, max_subdivisions=400,
                       singularity_hint=INVERSE_SQRT_UPPER)


def _kinks(r: float, p: NetworkParams):
    return [p.a] if 0 < p.a < r else None


# -- single line ---------------------------------------------------------------


def mcp_line_count_pgf(s, r: float, rho: float, p: NetworkParams):
    """PGF of the number of MCP points of a line at distance rho inside b(o, r)."""
    if abs(rho) > r:
        raise DomainError("line misses the disk: |rho| > r")
    return np.exp(g_kernel(s, math.sqrt(r * r - rho * rho), p))


def line_count_pmf_rows(t, n_max: int, p: NetworkParams) -> np.ndarray:
    """Per-chord count PMFs, one row per half-length in ``t``."""
    coeffs = g_taylor_coefficients(t, n_max, p)
    return exp_series_rows(coeffs[:, 0], coeffs, n_max)


def line_count_pmf(t: float, n_max: int, p: NetworkParams) -> DiscretePmf:
    """PMF of the MCP count on a chord of half-length t (platoon on a road)."""
    masses = line_count_pmf_rows(np.array([t]), n_max, p)[0]
    return DiscretePmf.from_masses(masses, "bell", {"half_length": t})


def ppp_line_count_pmf_rows(t, n_max: int, lam: float) -> np.ndarray:
    """Poisson(2 lam t) PMFs, the per-chord law of the non-platooned baseline."""
    from scipy.stats import poisson

    t = np.atleast_1d(np.asarray(t, float))
    return poisson.pmf(np.arange(n_max + 1)[None, :], (2.0 * lam * t)[:, None])


def _chord_log_pgf(s, t, p: NetworkParams, scenario: str):
    if scenario == "PTS":
        return g_kernel(s, t, p)
    return 2.0 * p.npts_density * np.asarray(t) * (np.asarray(s) - 1.0)


def _chord_rows(t, n_max: int, p: NetworkParams, scenario: str) -> np.ndarray:
    if scenario == "PTS":
        return line_count_pmf_rows(t, n_max, p)
    return ppp_line_count_pmf_rows(t, n_max, p.npts_density)


def _check_radius(r: float):
    if not (r >= 0 and math.isfinite(r)):
        raise DomainError(f"ball radius must be finite and non-negative, got {r!r}")


def _check_scenario(scenario: str):
    if scenario not in ("PTS", "NPTS"):
        raise ValueError(f"scenario must be PTS or NPTS, got {scenario!r}")


# -- S(r) ----------------------------------------------------------------------


def _weighted_chord_integral(h: Callable, r: float, p: NetworkParams, spec: QuadratureSpec = _SPEC):
    """int_0^r h(t) t / sqrt(r^2 - t^2) dt with the endpoint singularity removed.

    Substituting t = r sin(theta) turns the weight into r sin(theta) dtheta.
    """
    kink = [math.asin(p.a / r)] if 0 < p.a < r else None

    def integrand(theta):
        t = r * np.sin(theta)
        val = h(t)
        w = r * np.sin(theta)
        return val * w.reshape((-1,) + (1,) * (np.ndim(val) - 1))

    plain = QuadratureSpec(spec.rel_tol, spec.abs_tol, spec.max_subdivisions)
    return integrate(integrand, 0.0, 0.5 * math.pi, plain, kink)


def count_pgf(s, r: float, p: NetworkParams, spec: QuadratureSpec = _SPEC, scenario: str = "PTS"):
    """PGF of S(r); ``s`` may be complex (used by the FFT oracle).

    ``scenario="NPTS"`` gives the same count for Poisson traffic of density
    ``p.npts_density`` on every road.
    """
    _check_scenario(scenario)
    if r <= 0:
        return 1.0
    if np.ndim(s) > 0:
        return np.array([count_pgf(z, r, p, spec, scenario) for z in np.asarray(s).ravel()]).reshape(np.shape(s))
    val = _weighted_chord_integral(lambda t: np.expm1(_chord_log_pgf(s, t, p, scenario)), r, p, spec)
    out = np.exp(2.0 * math.pi * p.lambda_L * val)
    return complex(out) if np.iscomplexobj(out) else float(out)


def count_pgf_direct(s: float, r: float, p: NetworkParams) -> float:
    """count_pgf through the generic singular-endpoint quadrature path."""
    if r <= 0:
        return 1.0

    def f(t):
        return np.exp(g_kernel(s, t, p)) * t / np.sqrt((r - t) * (r + t))

    val = integrate(f, 0.0, r, _SPEC, _kinks(r, p))
    return float(np.exp(-2.0 * math.pi * p.lambda_L * (r - val)))


def count_mean_var(r: float, p: NetworkParams) -> tuple[float, float]:
    """Mean lambda_m pi r^2 and the closed-form variance of S(r).

    Variance = mean + 2 pi lambda_L int_0^r (kappa_1^2 + kappa_2) t/sqrt(r^2-t^2) dt.
    kappa_1(t) = 4 lambda_P lambda_d a t on both sides of t = a, so the
    squared-mean term is (64/3) pi lambda_L (a lambda_P lambda_d)^2 r^3 in
    both branches.
    """
    lam_P, lam_d, a, lam_L = p.lambda_P, p.lambda_d, p.a, p.lambda_L
    mean = p.lambda_m * math.pi * r * r
    first = 2.0 * math.pi * lam_L * (32.0 / 3.0) * (a * lam_P * lam_d) ** 2 * r**3
    if a >= r:
        second = 2.0 * math.pi * lam_L * 8.0 * lam_P * lam_d**2 * (2.0 / 3.0 * a * r**3 - math.pi * r**4 / 16.0)
    else:
        root = math.sqrt(r * r - a * a)
        second = 4.0 * math.pi * lam_L * lam_P * lam_d**2 * (
            r**3 * (8.0 * a / 3.0 - math.pi * r / 4.0)
            + root * (-(a**3) / 3.0 - 13.0 * a * r * r / 6.0)
            + (2.0 * a * a * r * r + r**4 / 2.0) * math.asin(root / r)
        )
    return mean, mean + first + second


def count_variance_as_printed(r: float, p: NetworkParams) -> float:
    """Variance with the a < r squared-mean coefficient (8 lp ld a / 3)^2 pi lL r^3.

    Kept to document that this coefficient breaks continuity at a = r; the
    value used everywhere else is ``count_mean_var``.
    """
    mean, var = count_mean_var(r, p)
    if p.a >= r:
        return var
    lam_P, lam_d, a, lam_L = p.lambda_P, p.lambda_d, p.a, p.lambda_L
    correct = 2.0 * math.pi * lam_L * (32.0 / 3.0) * (a * lam_P * lam_d) ** 2 * r**3
    printed = (8.0 * lam_P * lam_d * a / 3.0) ** 2 * math.pi * lam_L * r**3
    return var - correct + printed


def count_factorial_moments(r: float, p: NetworkParams) -> tuple[float, float]:
    """(F1, F2): first cumulant and second factorial cumulant of S(r) by quadrature."""
    if r <= 0:
        return 0.0, 0.0

    def h(t):
        k1 = kappa(t, 1, p)
        return np.stack([k1, k1 * k1 + kappa(t, 2, p)], axis=-1)

    vals = _weighted_chord_integral(h, r, p)
    return tuple(2.0 * math.pi * p.lambda_L * np.asarray(vals))


def default_n_max(mean: float, var: float, cap: int = PMF_CAP) -> int:
    sd = math.sqrt(max(var, mean, 1e-12))
    return int(min(cap, max(8, math.ceil(mean + 14.0 * sd + 25.0))))


def _trim(masses: np.ndarray, target: float = PMF_MASS_TARGET) -> np.ndarray:
    cdf = np.cumsum(masses)
    hit = np.nonzero(cdf > 1.0 - target)[0]
    return masses[: hit[0] + 1] if hit.size else masses


def npts_count_mean_var(r: float, p: NetworkParams) -> tuple[float, float]:
    """Mean kappa pi r^2 and variance kappa pi r^2 + (16/3) pi lambda_L lambda^2 r^3."""
    mean = p.kappa * math.pi * r * r
    return mean, mean + 16.0 / 3.0 * math.pi * p.lambda_L * p.npts_density**2 * r**3


def scenario_mean_var(r: float, p: NetworkParams, scenario: str = "PTS") -> tuple[float, float]:
    _check_scenario(scenario)
    _check_radius(r)
    return count_mean_var(r, p) if scenario == "PTS" else npts_count_mean_var(r, p)


def count_exponent_coefficients(r: float, n_max: int, p: NetworkParams, spec: QuadratureSpec = _SPEC,
                                scenario: str = "PTS"):
    """Taylor coefficients (log P(0), a_1, ..., a_n) of log P_{S(r)}(s) at s = 0.

    a_k = 2 pi lambda_L int q_k(t) t/sqrt(r^2 - t^2) dt with q_k the per-chord
    count PMF, i.e. f_m^{(k)}(r) / k!.
    """
    if r <= 0:
        return np.zeros(n_max + 1)

    def h(t):
        rows = _chord_rows(t, n_max, p, scenario)
        rows[:, 0] = np.expm1(_chord_log_pgf(0.0, t, p, scenario))
        return rows

    vals = np.asarray(_weighted_chord_integral(h, r, p, spec))
    return 2.0 * math.pi * p.lambda_L * vals


def count_pmf(r: float, n_max: int | None = None, p: NetworkParams | None = None,
              method: str = "bell", scenario: str = "PTS") -> DiscretePmf:
    """PMF of S(r).

    ``method="bell"`` uses the factorial-scaled Bell recursion on the
    exponent coefficients; ``"bell_literal"`` forms the complete Bell
    polynomials B_n(f_m^{(1)}, ..., f_m^{(n)}) directly (overflows for large
    n, then falls back); ``"pgf_inversion"`` uses the FFT oracle.  When
    ``n_max`` is None the support is cut at cumulative mass 1 - 1e-6 (cap PMF_CAP).
    """
    p = p or NetworkParams()
    _check_scenario(scenario)
    _check_radius(r)
    auto = n_max is None
    if auto:
        n_max = default_n_max(*scenario_mean_var(r, p, scenario))
    meta = {"r": r, "method": method, "scenario": scenario}

    def pgf(z):
        return count_pgf(z, r, p, scenario=scenario)

    if method == "pgf_inversion":
        pmf = pgf_invert(pgf, max(1, n_max))
        masses = pmf.masses[: n_max + 1]
        meta.update(pmf.meta)
        out = DiscretePmf.from_masses(masses, "pgf_inversion", meta, normalize=True)
    else:
        coeffs = count_exponent_coefficients(r, n_max, p, scenario=scenario)
        try:
            if method == "bell_literal":
                fk = coeffs[1:] * np.array([math.factorial(k) for k in range(1, n_max + 1)], dtype=float)
                bell = complete_bell(fk)
                with np.errstate(over="raise"):
                    masses = math.exp(coeffs[0]) * bell / np.array(
                        [math.factorial(k) for k in range(n_max + 1)], dtype=float)
            elif method == "bell":
                masses = exp_series(coeffs[0], coeffs, n_max)
            else:
                raise ValueError(f"unknown method {method!r}")
            out = DiscretePmf.from_masses(masses, "bell", meta, normalize=True)
        except (ArithmeticError, OverflowError) as exc:
            meta["fallback_reason"] = repr(exc)
            pmf = pgf_invert(pgf, max(1, n_max))
            out = DiscretePmf.from_masses(pmf.masses[: n_max + 1], "pgf_inversion", meta, normalize=True)
    if auto:
        out = out.truncated(len(_trim(out.masses)) - 1)
    return out


# -- Palm version --------------------------------------------------------------


def _tagged_cluster_nodes(r: float, p: NetworkParams, order: int = 24):
    """Nodes/weights on x in [0, a] (parent offset of the typical vehicle's platoon)."""
    breaks = [0.0, p.a]
    k = abs(r - p.a)
    if 0 < k < p.a:
        breaks = [0.0, k, p.a]
    x, w = gauss_legendre_panels(breaks, order)
    return x, w / p.a


def tagged_cluster_pgf(s, r: float, p: NetworkParams):
    """(1/a) int_0^a exp((s - 1) lambda_d A1(r, a, x)) dx."""
    x, w = _tagged_cluster_nodes(r, p)
    lens = lens_1d(r, p.a, x)
    s = np.asarray(s)
    vals = np.exp(np.multiply.outer(s - 1.0, p.lambda_d * lens)) @ w
    return vals[()] if vals.ndim == 0 else vals


def tagged_cluster_pmf(r: float, n_max: int, p: NetworkParams) -> np.ndarray:
    """Poisson(lambda_d A1) mixed over the platoon-centre offset."""
    from scipy.stats import poisson

    x, w = _tagged_cluster_nodes(r, p)
    mu = p.lambda_d * lens_1d(r, p.a, x)
    k = np.arange(n_max + 1)
    return poisson.pmf(k[None, :], mu[:, None]).T @ w


def palm_count_pgf(s, r: float, p: NetworkParams):
    """PGF of S_hat(r): independent copy x tagged line x tagged platoon."""
    if np.ndim(s) > 0:
        return np.array([palm_count_pgf(z, r, p) for z in np.asarray(s).ravel()]).reshape(np.shape(s))
    val = count_pgf(s, r, p) * np.exp(g_kernel(s, r, p)) * tagged_cluster_pgf(s, r, p)
    return complex(val) if np.iscomplexobj(val) else float(val)


def palm_count_mean(r: float, p: NetworkParams) -> float:
    """Closed-form E[S_hat(r)] for r <= a (general r through the lens average)."""
    base = p.lambda_m * math.pi * r * r + 2.0 * p.lambda_P * p.m * r
    if r <= p.a:
        return base + p.lambda_d * (2.0 * r - r * r / (2.0 * p.a))
    x, w = _tagged_cluster_nodes(r, p)
    return base + p.lambda_d * float(lens_1d(r, p.a, x) @ w)


def palm_count_pmf(r: float, n_max: int | None = None, p: NetworkParams | None = None) -> DiscretePmf:
    """PMF of S_hat(r) as the convolution of its three independent parts."""
    p = p or NetworkParams()
    _check_radius(r)
    auto = n_max is None
    if auto:
        mean, var = count_mean_var(r, p)
        n_max = default_n_max(mean + 2.0 * p.m + 2.0, var + 4.0 * p.m * p.m)
    base = count_pmf(r, n_max, p).padded(n_max)
    line = line_count_pmf_rows(np.array([r]), n_max, p)[0]
    cluster = tagged_cluster_pmf(r, n_max, p)
    masses = np.convolve(np.convolve(base, line)[: n_max + 1], cluster)[: n_max + 1]
    out = DiscretePmf.from_masses(masses, "convolution", {"r": r}, normalize=True)
    if auto:
        out = out.truncated(len(_trim(out.masses)) - 1)
    return out


# -- Laplace functional --------------------------------------------------------


def _line_log_pgfl(u_fn, rho, phi, R, p: NetworkParams, nx: int, ny: int):
    """log of the MCP PGFL on each line (rho_i, phi_i) for 1 - e^{-v} given by u_fn.

    ``u_fn(x, y)`` returns 1 - exp(-v) at plane points.  Only the chord of
    b(o, R) matters; x-panels break at the kinks +-t +- a of the lens length.
    """
    rho = np.asarray(rho, float)
    phi = np.asarray(phi, float)
    t = np.sqrt(np.maximum(R * R - rho * rho, 0.0))
    a = p.a
    gx, gw = np.polynomial.legendre.leggauss(nx)
    yy, yw = np.polynomial.legendre.leggauss(ny)
    out = np.zeros(rho.shape)
    for i in np.ndindex(rho.shape):
        ti = t[i]
        if ti <= 0:
            continue
        edges = np.unique(np.clip([-ti - a, -ti + a, ti - a, ti + a], -ti - a, ti + a))
        xs, xw = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (hi - lo) * gx + 0.5 * (hi + lo))
            xw.append(0.5 * (hi - lo) * gw)
        xs = np.concatenate(xs)
        xw = np.concatenate(xw)
        lo = np.maximum(-ti, xs - a)
        hi = np.minimum(ti, xs + a)
        width = np.maximum(hi - lo, 0.0)
        ys = 0.5 * width[:, None] * yy[None, :] + 0.5 * (hi + lo)[:, None]
        c, s_ = math.cos(phi[i]), math.sin(phi[i])
        px = rho[i] * c + ys * s_
        py = rho[i] * s_ - ys * c
        inner = (u_fn(px, py) * yw[None, :]).sum(axis=1) * 0.5 * width
        out[i] = -p.lambda_P * float(np.sum(-np.expm1(-p.lambda_d * inner) * xw))
    return out


def laplace_functional(
    v: Callable,
    p: NetworkParams,
    window_radius: float,
    palm: bool = False,
    n_rho: int = 48,
    n_phi: int = 32,
    nx: int = 24,
    ny: int = 24,
) -> float:
    """E[exp(-sum_z v(z))] for v supported in b(o, window_radius).

    ``v(x, y)`` takes coordinate arrays.  With ``palm=True`` the reduced
    Palm functional is returned: the product with the tagged-line factor
    averaged over the tagged road's orientation, which also carries the
    tagged platoon (centre uniform within a of the origin).
    """
    R = float(window_radius)

    def u_fn(x, y):
        return -np.expm1(-np.asarray(v(x, y), float))

    # rho = R sin(theta) removes the square-root behaviour at |rho| = R; the
    # chord half-length R cos(theta) crosses a at theta = acos(a / R).
    breaks = [0.0, 0.5 * math.pi]
    if p.a < R:
        breaks.insert(1, math.acos(p.a / R))
    theta, thw = gauss_legendre_panels(breaks, max(4, n_rho // (len(breaks) - 1)))
    theta = np.concatenate([-theta[::-1], theta])
    thw = np.concatenate([thw[::-1], thw])
    rho = R * np.sin(theta)
    drho = R * np.cos(theta) * thw
    # Uniform phi rule is spectrally accurate for the pi-periodic integrand.
    phi = (np.arange(n_phi) + 0.5) * math.pi / n_phi
    RHO, PHI = np.meshgrid(rho, phi, indexing="ij")
    logG = _line_log_pgfl(u_fn, RHO, PHI, R, p, nx, ny)
    inner = (-np.expm1(logG)).sum(axis=1) * (math.pi / n_phi)
    log_lf = -p.lambda_L * float(inner @ drho)
    lf = math.exp(log_lf)
    if not palm:
        return lf
    # Tagged line through the origin and the tagged platoon.
    xo, xow = np.polynomial.legendre.leggauss(nx)
    xo = p.a * xo
    xow = xow * 0.5  # average over [-a, a]
    yy, yw = np.polynomial.legendre.leggauss(ny)
    total = 0.0
    for ph in phi:
        G = math.exp(_line_log_pgfl(u_fn, np.array([0.0]), np.array([ph]), R, p, nx, ny)[0])
        lo = np.maximum(-R, xo - p.a)
        hi = np.minimum(R, xo + p.a)
        width = np.maximum(hi - lo, 0.0)
        ys = 0.5 * width[:, None] * yy[None, :] + 0.5 * (hi + lo)[:, None]
        px, py = ys * math.sin(ph), -ys * math.cos(ph)
        inner_c = (u_fn(px, py) * yw[None, :]).sum(axis=1) * 0.5 * width
        cluster = float(np.exp(-p.lambda_d * inner_c) @ xow)
        total += G * cluster
    return lf * total / n_phi
