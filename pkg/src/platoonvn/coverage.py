"""SIR and rate coverage of the typical vehicle.

Interferers are the active base stations, modelled as a PPP thinned by the
activity probability p_on; with Rayleigh fading and nearest-BS association

    P(SIR > tau) = 1 / (1 + p_on J(tau, alpha)),
    J(tau, alpha) = int_1^inf dt / (1 + t^{alpha/2} / tau).

The rate of a user sharing bandwidth B equally with the k other users of its
cell exceeds tau_rate iff SIR > gamma_k = 2^{(k+1) tau_rate / B} - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import brentq
from scipy.special import hyp2f1

from .distributions import DiscretePmf, _header_lines
from .kernels import NetworkParams
from .numerics import NonConvergence, QuadratureSpec, integrate, semi_infinite_integrate

K_CAP = 512
LARGE_TAU = 1e100
RESIDUAL_MASS = 1e-5
_SPEC = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-14)


def interference_integral(tau: float, alpha: float, method: str = "semi_infinite") -> float:
    """J(tau, alpha).

    ``"semi_infinite"`` integrates over [1, inf) by doubling panels;
    ``"compact"`` first maps t = x^{-1/(alpha/2 - 1)}, which turns J into
    q int_0^1 tau / (1 + tau x^{q alpha/2}) dx with q = 1/(alpha/2 - 1) and
    an everywhere-bounded integrand; ``"hypergeometric"`` is the closed form
    (2 tau / (alpha - 2)) 2F1(1, 1 - 2/alpha; 2 - 2/alpha; -tau).
    """
    if not tau > 0:
        if tau == 0:
            return 0.0
        raise ValueError("tau must be non-negative")
    if not alpha > 2:
        raise ValueError("alpha must exceed 2")
    if math.isinf(tau):
        return math.inf
    half = 0.5 * alpha
    if tau > LARGE_TAU and method != "hypergeometric":
        # Both quadratures need ever finer panels as tau grows; the closed
        # form stays accurate up to the float limit.
        method = "hypergeometric"
    if method == "semi_infinite":
        try:
            return float(semi_infinite_integrate(lambda t: 1.0 / (1.0 + t**half / tau), 1.0,
                                                 QuadratureSpec(rel_tol=1e-12, abs_tol=0.0)))
        except NonConvergence:
            method = "compact"
    if method == "compact":
        q = 1.0 / (half - 1.0)
        return q * float(integrate(lambda x: tau / (1.0 + tau * x ** (q * half)), 0.0, 1.0, _SPEC))
    if method == "hypergeometric":
        d = 2.0 / alpha
        return float(2.0 * tau / (alpha - 2.0) * hyp2f1(1.0, 1.0 - d, 2.0 - d, -tau))
    raise ValueError(f"unknown method {method!r}")


def interference_integral_alpha4(tau: float) -> float:
    """Closed form at alpha = 4: sqrt(tau) (pi/2 - arctan(1/sqrt(tau)))."""
    r = math.sqrt(tau)
    return r * (0.5 * math.pi - math.atan(1.0 / r))


def sir_coverage(tau_sir: float, p_on: float, alpha: float, method: str = "semi_infinite") -> float:
    if not 0.0 <= p_on <= 1.0:
        raise ValueError("p_on must lie in [0, 1]")
    if not tau_sir > 0:
        raise ValueError("tau_sir must be positive")
    if p_on == 0.0:
        return 1.0
    if math.isinf(tau_sir):
        return 0.0
    return 1.0 / (1.0 + p_on * interference_integral(tau_sir, alpha, method))


def gamma_k(k, tau_rate: float, bandwidth: float):
    """SIR threshold for k co-users; overflows to inf for huge k tau / B."""
    with np.errstate(over="ignore"):
            return np.expm1((np.asarray(k) + 1.0) * tau_rate / bandwidth * math.log(2.0))


def rate_coverage_from_pmf(tau_rate: float, load: DiscretePmf, p_on: float, alpha: float,
                           bandwidth: float, k_cap: int = K_CAP,
                           residual: float = RESIDUAL_MASS) -> tuple[float, float, int]:
    """(r_c, half-bracket, k used) for a tagged-load PMF.

    Terms are summed until the unassigned mass drops below ``residual`` (or
    ``k_cap``); that mass is bracketed between zero coverage and the coverage
    of the last included term, and the midpoint is returned.
    """
    total = 0.0
    used = 0.0
    last = 1.0
    k_used = 0
    for k in range(min(load.n_max, k_cap) + 1):
        pk = load.p(k)
        if pk > 0:
            last = sir_coverage(float(gamma_k(k, tau_rate, bandwidth)), p_on, alpha) if tau_rate > 0 else 1.0
            total += pk * last
        used += pk
        k_used = k
        if 1.0 - used < residual:
            break
    rest = max(0.0, 1.0 - used)
    lo, hi = total, total + rest * last
    return 0.5 * (lo + hi), 0.5 * (hi - lo), k_used


def deterministic_pmf(k0: int) -> DiscretePmf:
    masses = np.zeros(k0 + 1)
    masses[k0] = 1.0
    return DiscretePmf(masses, 0.0, "mixture", {"deterministic": k0})


def rate_coverage(tau_rate: float, p: NetworkParams, scenario: str = "PTS",
                  tagged: DiscretePmf | None = None, p_on_value: float | None = None) -> tuple[float, float]:
    """Rate coverage at threshold ``tau_rate`` (bit/s); returns (r_c, half-bracket)."""
    from .loads import p_on as p_on_fn
    from .loads import tagged_load_pmf

    if tagged is None:
        tagged = tagged_load_pmf(p, scenario=scenario).pmf
    pon = p_on_fn(p, scenario) if p_on_value is None else p_on_value
    val, err, _ = rate_coverage_from_pmf(tau_rate, tagged, pon, p.alpha, p.bandwidth)
    return val, err


@dataclass(eq=False)
class RateCoverageCurve:
    thresholds: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    scenario: str
    k_truncation: int
    meta: dict[str, Any] = field(default_factory=dict)

    def to_csv(self, path: str | Path, header: dict | None = None) -> None:
        head = {"scenario": self.scenario, "k_truncation": self.k_truncation, **self.meta, **(header or {})}
        lines = _header_lines(head)
        lines.append("tau_bps,r_c,err_bracket")
        lines += [f"{t:.17g},{v:.17g},{e:.3g}" for t, v, e in zip(self.thresholds, self.values, self.errors)]
        Path(path).write_text("\n".join(lines) + "\n")


def rate_coverage_curve(thresholds, p: NetworkParams, scenario: str = "PTS") -> RateCoverageCurve:
    from .loads import p_on as p_on_fn
    from .loads import tagged_load_pmf

    thresholds = np.asarray(thresholds, float)
    tagged = tagged_load_pmf(p, scenario=scenario).pmf
    pon = p_on_fn(p, scenario)
    vals, errs, ks = [], [], []
    for tau in thresholds:
        v, e, k = rate_coverage_from_pmf(float(tau), tagged, pon, p.alpha, p.bandwidth)
        vals.append(v)
        errs.append(e)
        ks.append(k)
    return RateCoverageCurve(thresholds, np.array(vals), np.array(errs), scenario, int(max(ks)),
                             {"p_on": pon, "lambda_b": p.lambda_b})


def lambda_b_for_active_density(active: float, p: NetworkParams, scenario: str = "PTS",
                                lo: float = 0.05, hi: float = 500.0) -> float:
    """BS density whose active density p_on * lambda_b equals ``active``."""
    from .loads import p_on as p_on_fn

    def f(lb):
        return p_on_fn(p.replace(lambda_b=lb), scenario, n_radius=96) * lb - active

    return float(brentq(f, lo, hi, xtol=1e-6, rtol=1e-8))
