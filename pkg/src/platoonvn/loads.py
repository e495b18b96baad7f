"""Per-base-station load distributions.

Typical cell: exact form (perimeter mixture of compound-Poisson chord loads)
and the equal-area-disk approximation.  Tagged cell (the one serving the
typical vehicle): independent copy in the area-biased disk, plus the tagged
road's MCP and the typical vehicle's own platoon on the tagged chord.
Both platooned (PTS) and Poisson-on-roads (NPTS) traffic are covered.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import poisson

from . import chords
from .counts import (
    _chord_log_pgf,
    _chord_rows,
    _check_scenario,
    count_pgf,
    count_pmf,
    scenario_mean_var,
)
from .distributions import DiscretePmf, _jsonable
from .kernels import (
    AREA_FIT,
    PERIMETER_FIT,
    NetworkParams,
    gen_gamma_pdf,
    gen_gamma_quantile,
    lens_1d,
    size_bias_factor,
    tagged_radius_moment,
    typical_radius_moment,
)
from .numerics import gauss_legendre_panels, integrate, pgf_invert

LOAD_N_MAX = 256
RADIUS_NODES = 200
_TAIL = 1e-5


@dataclass(eq=False)
class LoadSummary:
    pmf: DiscretePmf
    mean: float
    variance: float
    p_on: float | None
    scenario: str
    cell: str
    meta: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "cell": self.cell,
            "mean": self.mean,
            "variance": self.variance,
            "p_on": self.p_on,
            "pmf": self.pmf.to_dict(),
            "meta": _jsonable(self.meta),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text


# -- deconditioning rules -----------------------------------------------------


@lru_cache(maxsize=16)
def _area_rule(biased: bool, n: int = RADIUS_NODES, tail: float = _TAIL):
    """Nodes x (normalized cell area) and weights for E[h(X)] under the area fit.

    ``biased`` uses x f(x) (the area-biased law of the origin's cell).  The
    range stops at the 1 - tail quantile; panels are placed at quantiles so
    the density is resolved where its mass sits.  Weights are rescaled to sum
    to one and the pre-scaling sum is returned for the record.
    """
    gp = AREA_FIT
    if biased:
        from .kernels import GenGammaParams

        gp = GenGammaParams(gp.a1, gp.b1, gp.c1 + 1.0)
    qs = [0.0, 0.001, 0.01, 0.05, 0.2, 0.4, 0.6, 0.8, 0.95, 0.99, 0.999, 1.0 - tail]
    knots = [0.0] + [gen_gamma_quantile(q, gp) for q in qs[1:]]
    x, w = gauss_legendre_panels(knots, max(2, n // (len(knots) - 1)))
    dens = gen_gamma_pdf(x, gp)
    weights = w * dens
    raw = float(weights.sum())
    return x, weights / raw, raw


def radius_rule(p: NetworkParams, tagged: bool = False, n: int = RADIUS_NODES):
    """Equal-area radii and normalized weights for the typical or tagged cell."""
    x, w, raw = _area_rule(tagged, n)
    return np.sqrt(x / (math.pi * p.lambda_b)), w, raw


@lru_cache(maxsize=16)
def _perimeter_rule(n: int = 120, tail: float = 1e-9):
    gp = PERIMETER_FIT
    qs = [0.0, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.9999, 1.0 - tail]
    knots = [0.0] + [gen_gamma_quantile(q, gp) for q in qs[1:]]
    x, w = gauss_legendre_panels(knots, max(2, n // (len(knots) - 1)))
    weights = w * gen_gamma_pdf(x, gp)
    raw = float(weights.sum())
    return x, weights / raw, raw


def perimeter_rule(p: NetworkParams):
    """Perimeter nodes z (km) with z sqrt(lambda_b)/4 following the perimeter fit."""
    x, w, raw = _perimeter_rule()
    return 4.0 * x / math.sqrt(p.lambda_b), w, raw


# -- typical cell ----------------------------------------------------------------


def _chord_expectations(p: NetworkParams, n_max: int, scenario: str):
    """E_C[q_k(C/2)] over the typical chord law, k = 0..n_max."""
    fc = chords.typical_chord_pdf(p.lambda_b)
    w = fc.trapezoid_weights()
    w = w / w.sum()
    rows = _chord_rows(0.5 * fc.grid, n_max, p, scenario)
    return w @ rows, fc


def typical_load_pgf_exact(s, p: NetworkParams, scenario: str = "PTS"):
    """PGF of the load of the typical cell, mixing over its perimeter.

    Given perimeter z the number of roads hitting the cell is Poisson(lambda_L z)
    and each carries the load of a chord drawn from the typical chord law.
    """
    _check_scenario(scenario)
    fc = chords.typical_chord_pdf(p.lambda_b)
    wc = fc.trapezoid_weights()
    wc = wc / wc.sum()
    z, wz, _ = perimeter_rule(p)
    s_arr = np.atleast_1d(np.asarray(s))
    out = []
    for sv in s_arr:
        inner = np.exp(_chord_log_pgf(sv, 0.5 * fc.grid, p, scenario)) @ wc
        out.append(np.exp(-p.lambda_L * z * (1.0 - inner)) @ wz)
    out = np.array(out)
    return out[0] if np.ndim(s) == 0 else out.reshape(np.shape(s))


def typical_load_exact_pmf(p: NetworkParams, n_max: int = LOAD_N_MAX, scenario: str = "PTS",
                           method: str = "bell") -> LoadSummary:
    """PMF of the exact typical-cell load (compound Poisson over chords).

    ``method="pgf_inversion"`` inverts ``typical_load_pgf_exact`` instead.
    """
    _check_scenario(scenario)
    if method == "pgf_inversion":
        pmf = pgf_invert(lambda z: typical_load_pgf_exact(z, p, scenario), n_max)
        pmf = DiscretePmf.from_masses(pmf.masses, "pgf_inversion", pmf.meta, normalize=True)
    else:
        b, _ = _chord_expectations(p, n_max, scenario)
        b = b.copy()
        b[0] -= 1.0
        z, wz, raw = perimeter_rule(p)
        masses = np.zeros(n_max + 1)
        from .numerics import exp_series

        for zj, wj in zip(z, wz):
            lam = p.lambda_L * zj
            masses += wj * exp_series(lam * b[0], lam * b, n_max)
        pmf = DiscretePmf.from_masses(masses, "mixture", {"perimeter_weight_sum": raw}, normalize=True)
    density = p.lambda_m if scenario == "PTS" else p.kappa
    return LoadSummary(pmf, density / p.lambda_b, pmf.variance(), 1.0 - pmf.p(0), scenario, "typical_exact",
                       {"pmf_mean": pmf.mean()})


def _mixture_count_pmf(rule, p: NetworkParams, n_max: int, scenario: str):
    r, w, raw = rule
    masses = np.zeros(n_max + 1)
    void = 0.0
    for ri, wi in zip(r, w):
        pmf = count_pmf(float(ri), n_max, p, scenario=scenario)
        masses += wi * pmf.masses
        void += wi * pmf.p(0)
    return masses, void, raw


def typical_load_variance(p: NetworkParams, scenario: str = "PTS") -> float:
    """Variance of the equal-area-disk typical load.

    P''(1) = E_R[F1(R)^2 + F2(R)] with F1, F2 the first cumulant and second
    factorial cumulant of S(R); then Var = P''(1) + E - E^2.
    """
    _check_scenario(scenario)
    if scenario == "NPTS":
        return npts_typical_variance(p)
    x, w, _ = _area_rule(False, 400, 1e-12)
    r = np.sqrt(x / (math.pi * p.lambda_b))
    mv = np.array([scenario_mean_var(float(ri), p, scenario) for ri in r])
    f1 = mv[:, 0]
    f2 = mv[:, 1] - mv[:, 0]
    second = float(w @ (f1 * f1 + f2))
    mean = p.lambda_m / p.lambda_b
    return second + mean - mean * mean


def npts_typical_variance(p: NetworkParams) -> float:
    """(kappa pi)^2 E[r^4] + (16/3) pi lambda_L lambda^2 E[r^3] + kappa/lambda_b - (kappa/lambda_b)^2.

    E[r^3] is the generalized-Gamma moment Gamma((c1 + 1.5)/a1) /
    (b1^{1.5/a1} Gamma(c1/a1) (pi lambda_b)^{1.5}).
    """
    k = p.kappa
    mean = k / p.lambda_b
    return ((k * math.pi) ** 2 * typical_radius_moment(4, p)
            + 16.0 / 3.0 * math.pi * p.lambda_L * p.npts_density**2 * typical_radius_moment(3, p)
            + mean - mean * mean)


def typical_load_approx(p: NetworkParams, n_max: int = LOAD_N_MAX, scenario: str = "PTS",
                        n_radius: int = RADIUS_NODES) -> LoadSummary:
    """Load of a disk with the typical cell's area, mixed over the area law."""
    _check_scenario(scenario)
    rule = radius_rule(p, False, n_radius)
    masses, void, raw = _mixture_count_pmf(rule, p, n_max, scenario)
    pmf = DiscretePmf.from_masses(masses, "mixture", {"area_weight_sum": raw}, normalize=True)
    density = p.lambda_m if scenario == "PTS" else p.kappa
    var = typical_load_variance(p, scenario)
    return LoadSummary(pmf, density / p.lambda_b, var, 1.0 - void, scenario, "typical_approx",
                       {"pmf_mean": pmf.mean(), "pmf_variance": pmf.variance(), "area_weight_sum": raw})


def npts_typical_load(p: NetworkParams, n_max: int = LOAD_N_MAX) -> LoadSummary:
    return typical_load_approx(p, n_max, "NPTS")


def p_on(p: NetworkParams, scenario: str = "PTS", n_radius: int = RADIUS_NODES) -> float:
    """Probability that the typical base station serves at least one vehicle."""
    _check_scenario(scenario)
    r, w, _ = radius_rule(p, False, n_radius)
    void = sum(wi * count_pgf(0.0, float(ri), p, scenario=scenario) for ri, wi in zip(r, w))
    return 1.0 - float(void)


# -- tagged cell -----------------------------------------------------------------


def _cluster_rule(c: float, p: NetworkParams, order: int = 16):
    """Offset d = |x_c - x_o| between the origin's place on the chord and its
    platoon centre: density A1(c/2, a, d) / (a c) on [0, c/2 + a]."""
    half = 0.5 * c
    knots = [0.0, half + p.a]
    k = abs(half - p.a)
    if k > 0:
        knots.insert(1, k)
    d, w = gauss_legendre_panels(knots, order)
    lens = lens_1d(half, p.a, d)
    weights = w * lens / (p.a * c)
    return lens, weights


def tagged_cluster_chord_pgf(s, c: float, p: NetworkParams):
    """PGF of the typical vehicle's platoon-mates on a tagged chord of length c."""
    lens, w = _cluster_rule(c, p)
    return np.exp(np.multiply.outer(np.asarray(s) - 1.0, p.lambda_d * lens)) @ w


def tagged_cluster_chord_pmf(c: float, n_max: int, p: NetworkParams) -> np.ndarray:
    lens, w = _cluster_rule(c, p)
    mu = p.lambda_d * lens
    return poisson.pmf(np.arange(n_max + 1)[None, :], mu[:, None]).T @ w


def tagged_chord_load_pmf(c: float, n_max: int, p: NetworkParams, scenario: str = "PTS") -> np.ndarray:
    """Vehicles on the tagged chord of length c, excluding the typical one."""
    line = _chord_rows(np.array([0.5 * c]), n_max, p, scenario)[0]
    if scenario == "NPTS":
        return line
    return np.convolve(line, tagged_cluster_chord_pmf(c, n_max, p))[: n_max + 1]


def tagged_conditional_mean(c: float, p: NetworkParams, scenario: str = "PTS") -> float:
    """E[M | C_o = c]: area-biased-disk term + tagged road + own platoon."""
    if scenario == "NPTS":
        return size_bias_factor() * p.kappa / p.lambda_b + p.npts_density * c
    lens, w = _cluster_rule(c, p)
    return size_bias_factor() * p.lambda_m / p.lambda_b + p.mu_m * c + p.lambda_d * float(lens @ w)


def tagged_load_pgf(s, p: NetworkParams, scenario: str = "PTS", c_stride: int = 4):
    """PGF of the tagged-cell load (typical vehicle excluded).

    R_o and C_o enter independently, so the PGF is
    E_Ro[P_S(R_o)(s)] * E_Co[P_line(s, C_o/2) P_cluster(s, C_o)].
    ``c_stride`` thins the chord grid for this (slow, per-s) evaluation.
    """
    _check_scenario(scenario)
    r, wr, _ = radius_rule(p, True, 64)
    fc = chords.tagged_chord_pdf(p.lambda_b)
    grid = fc.grid[::c_stride]
    dens = fc(grid)
    wc = np.zeros_like(grid)
    dx = np.diff(grid)
    wc[:-1] += 0.5 * dx
    wc[1:] += 0.5 * dx
    wc = wc * dens
    wc /= wc.sum()
    s_arr = np.atleast_1d(np.asarray(s))
    out = []
    for sv in s_arr:
        disk = sum(wi * count_pgf(sv, float(ri), p, scenario=scenario) for ri, wi in zip(r, wr))
        chord = 0.0
        for ci, wi in zip(grid, wc):
            if wi == 0.0:
                continue
            val = np.exp(_chord_log_pgf(sv, 0.5 * ci, p, scenario))
            if scenario == "PTS":
                val = val * tagged_cluster_chord_pgf(sv, ci, p)
            chord += wi * val
        out.append(disk * chord)
    out = np.array(out)
    return out[0] if np.ndim(s) == 0 else out.reshape(np.shape(s))


def tagged_chord_mixture_pmf(p: NetworkParams, n_max: int, scenario: str = "PTS") -> np.ndarray:
    fc = chords.tagged_chord_pdf(p.lambda_b)
    wc = fc.trapezoid_weights()
    wc = wc / wc.sum()
    masses = np.zeros(n_max + 1)
    for ci, wi in zip(fc.grid, wc):
        if wi == 0.0 or ci <= 0:
            continue
        masses += wi * tagged_chord_load_pmf(float(ci), n_max, p, scenario)
    return masses


def tagged_load_pmf(p: NetworkParams, n_max: int = LOAD_N_MAX, scenario: str = "PTS",
                    n_radius: int = RADIUS_NODES) -> LoadSummary:
    """PMF of the tagged-cell load as disk-part (*) chord-part convolution."""
    _check_scenario(scenario)
    rule = radius_rule(p, True, n_radius)
    disk, _, raw = _mixture_count_pmf(rule, p, n_max, scenario)
    chord = tagged_chord_mixture_pmf(p, n_max, scenario)
    masses = np.convolve(disk, chord)[: n_max + 1]
    pmf = DiscretePmf.from_masses(masses, "convolution", {"area_weight_sum": raw}, normalize=True)
    mean = tagged_load_mean(p, scenario)
    return LoadSummary(pmf, mean, pmf.variance(), None, scenario, "tagged_approx",
                       {"pmf_mean": pmf.mean(), "size_bias_factor": size_bias_factor()})


def tagged_load_mean(p: NetworkParams, scenario: str = "PTS") -> float:
    """E[M] = E_Co[E[M | C_o]] with the tagged-chord law."""
    fc = chords.tagged_chord_pdf(p.lambda_b)
    wc = fc.trapezoid_weights()
    wc = wc / wc.sum()
    if scenario == "NPTS":
        mean_co = float(wc @ fc.grid)
        return p.kappa * math.pi * tagged_radius_moment(2, p) + p.npts_density * mean_co
    vals = np.array([tagged_conditional_mean(float(c), p) if c > 0 else 0.0 for c in fc.grid])
    return float(wc @ vals)


def npts_tagged_load(p: NetworkParams, n_max: int = LOAD_N_MAX) -> LoadSummary:
    return tagged_load_pmf(p, n_max, "NPTS")


# -- operational metrics ---------------------------------------------------------


def operational_metrics(typical: DiscretePmf, tagged: DiscretePmf, p_on_value: float | None = None) -> dict:
    """s_avg, p_less, P1, m_avg, P_less from the typical and tagged load PMFs."""
    pon = 1.0 - typical.p(0) if p_on_value is None else p_on_value
    s_avg = typical.mean() / pon if pon > 0 else float("nan")
    kavg = int(math.floor(s_avg)) if pon > 0 else 0
    p_less = float(typical.masses[1 : kavg + 1].sum() / pon) if pon > 0 else float("nan")
    m_avg = tagged.mean()
    P_less = float(tagged.masses[: int(math.floor(m_avg)) + 1].sum())
    return {"s_avg": s_avg, "p_less": p_less, "P1": tagged.p(1), "m_avg": m_avg, "P_less": P_less,
            "p_on": pon}


def scenario_metrics(p: NetworkParams, scenario: str = "PTS", n_max: int = LOAD_N_MAX) -> dict:
    typ = typical_load_approx(p, n_max, scenario)
    tag = tagged_load_pmf(p, n_max, scenario)
    return operational_metrics(typ.pmf, tag.pmf, typ.p_on)
