"""Acceptance checks shared by the test-suite and ``platoonvn validate``.

Each ``criterion_N`` returns a dict with its individual checks (measured
value, target, tolerance, verdict).  Reports carry no timings so that two
runs with the same seed are identical; callers time criteria themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable

import numpy as np

from . import chords, counts, coverage, kernels, loads
from .kernels import NetworkParams
from .montecarlo import (
    SimConfig,
    bhattacharyya,
    coverage_estimate,
    ks_distance,
    ks_sample_vs_cdf,
    simulate_chords,
    simulate_counts,
    simulate_sir,
)

TAUS = (0.5e6, 2e6)


@dataclass(frozen=True)
class Budget:
    """Replication counts and sweep sizes; ``quick`` trims them."""

    quick: bool = False

    def reps(self, full: int, quick: int) -> int:
        return quick if self.quick else full


def _check(name: str, measured, target=None, tol=None, passed: bool | None = None, **extra) -> dict:
    if passed is None:
        passed = abs(measured - target) <= tol
    out = {"name": name, "measured": _num(measured), "passed": bool(passed)}
    if target is not None:
        out["target"] = _num(target)
    if tol is not None:
        out["tolerance"] = _num(tol)
    out.update({k: _num(v) for k, v in extra.items()})
    return out


def _num(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    return v


def _result(cid: int, title: str, checks: list[dict]) -> dict:
    return {"id": cid, "title": title, "passed": all(c["passed"] for c in checks), "checks": checks}


# cached analytic objects ----------------------------------------------------

@lru_cache(maxsize=64)
def _typical(p: NetworkParams, scenario: str):
    return loads.typical_load_approx(p, scenario=scenario)


@lru_cache(maxsize=64)
def _tagged(p: NetworkParams, scenario: str):
    return loads.tagged_load_pmf(p, scenario=scenario)


@lru_cache(maxsize=64)
def _p_on(p: NetworkParams, scenario: str) -> float:
    return loads.p_on(p, scenario)


def _rate(p: NetworkParams, scenario: str, tau: float, pon: float | None = None) -> float:
    pon = _p_on(p, scenario) if pon is None else pon
    val, _, _ = coverage.rate_coverage_from_pmf(tau, _tagged(p, scenario).pmf, pon, p.alpha, p.bandwidth)
    return val


def _derivative_at_one(f: Callable, h: float = 1e-4) -> float:
    """Second-order backward difference of f at s = 1."""
    return (3.0 * f(1.0) - 4.0 * f(1.0 - h) + f(1.0 - 2.0 * h)) / (2.0 * h)


# criteria -------------------------------------------------------------------

def criterion_1(seed: int = 0, budget: Budget = Budget()) -> dict:
    p = NetworkParams()
    checks = []
    for sc in ("PTS", "NPTS"):
        for r in (0.1, 0.25, 0.5, 1.0):
            checks.append(_check(f"count_pgf(1) {sc} r={r}", float(np.real(counts.count_pgf(1.0, r, p, scenario=sc))), 1.0, 1e-6))
    for r in (0.1, 0.25, 0.5):
        checks.append(_check(f"palm_count_pgf(1) r={r}", float(counts.palm_count_pgf(1.0, r, p)), 1.0, 1e-6))
        checks.append(_check(f"tagged_cluster_pgf(1) r={r}", float(counts.tagged_cluster_pgf(1.0, r, p)), 1.0, 1e-6))
        checks.append(_check(f"line pgf(1) r={r}", float(np.real(counts.mcp_line_count_pgf(1.0, r, 0.5 * r, p))), 1.0, 1e-6))
    checks.append(_check("tagged_cluster_chord_pgf(1)", float(loads.tagged_cluster_chord_pgf(1.0, 0.4, p)), 1.0, 1e-6))
    for sc in ("PTS", "NPTS"):
        checks.append(_check(f"typical exact load pgf(1) {sc}", float(np.real(loads.typical_load_pgf_exact(1.0, p, sc))), 1.0, 1e-6))
        checks.append(_check(f"tagged load pgf(1) {sc}", float(np.real(loads.tagged_load_pgf(1.0, p, sc))), 1.0, 1e-6))

    def pmf_check(name, pmf):
        total = float(pmf.masses.sum())
        return _check(f"sum {name}", total, 1.0, 1e-6 + pmf.tail_mass, tail=pmf.tail_mass)

    for sc in ("PTS", "NPTS"):
        for r in (0.1, 0.5, 1.0):
            checks.append(pmf_check(f"count_pmf {sc} r={r}", counts.count_pmf(r, p=p, scenario=sc)))
        checks.append(pmf_check(f"typical approx {sc}", _typical(p, sc).pmf))
        checks.append(pmf_check(f"typical exact {sc}", loads.typical_load_exact_pmf(p, scenario=sc).pmf))
        checks.append(pmf_check(f"tagged {sc}", _tagged(p, sc).pmf))
    checks.append(pmf_check("palm_count_pmf r=0.25", counts.palm_count_pmf(0.25, p=p)))
    for lam in (1.0, 5.0):
        for name, fn in (("tagged chord", chords.tagged_chord_pdf), ("typical chord", chords.typical_chord_pdf)):
            pdf = fn(lam)
            checks.append(_check(f"integral {name} lambda_b={lam}", pdf.meta["raw_integral"], 1.0, 5e-3))
    return _result(1, "normalization", checks)


def criterion_2(seed: int = 0, budget: Budget = Budget()) -> dict:
    p = NetworkParams()
    checks = []
    for a in (0.25, 2.0):
        q = p.replace(a=a)
        for r in (0.1, 0.25, 0.5, 1.0):
            target = q.lambda_m * math.pi * r * r
            pmf_mean = counts.count_pmf(r, p=q).mean()
            checks.append(_check(f"E[S(r)] pmf a={a} r={r}", pmf_mean / target, 1.0, 1e-3))
            h = 1e-20
            cs = float(np.imag(counts.count_pgf(1.0 + 1j * h, r, q)) / h)
            checks.append(_check(f"E[S(r)] complex-step a={a} r={r}", cs / target, 1.0, 1e-3))
            fact = counts.count_factorial_moments(r, q)
            checks.append(_check(f"Var S(r) closed vs quadrature a={a} r={r}",
                                 counts.count_mean_var(r, q)[1] / (fact[0] + fact[1]), 1.0, 1e-6))
    for r in (0.1, 0.5, 1.0):
        eps = 1e-10 * r
        lo = counts.count_mean_var(r, p.replace(a=r - eps))[1]
        hi = counts.count_mean_var(r, p.replace(a=r + eps))[1]
        checks.append(_check(f"variance continuity at a=r={r}", abs(lo - hi) / hi, 0.0, 1e-9))
    n = budget.reps(100_000, 10_000)
    for sc, density in (("PTS", p.lambda_m), ("NPTS", p.kappa)):
        exact = density / p.lambda_b
        summ = _typical(p, sc)
        checks.append(_check(f"analytic typical mean {sc}", summ.mean, exact, 1e-12 * exact))
        checks.append(_check(f"typical mixture pmf mean {sc} (rel)", summ.pmf.mean() / exact, 1.0, 1e-3))
        mc = simulate_counts(SimConfig(p, mode="typical_load", scenario=sc, replications=n,
                                       seed=seed, stream_id=200 + (sc == "NPTS")))
        sem = mc.sem()
        checks.append(_check(f"MC typical mean {sc}", mc.mean(), exact, 3.0 * sem, sem=sem, replications=n))
    return _result(2, "moment identities", checks)


def criterion_3(seed: int = 0, budget: Budget = Budget()) -> dict:
    n = budget.reps(20_000, 4_000)
    ms = (15,) if budget.quick else (5, 10, 15)
    lbs = (5.0,) if budget.quick else (5.0, 10.0)
    checks = []
    k = 0
    for lb in lbs:
        for m in ms:
            p = NetworkParams(m=m, lambda_b=lb)
            for mode, analytic in (("typical_load", _typical(p, "PTS").pmf), ("tagged_load", _tagged(p, "PTS").pmf)):
                mc = simulate_counts(SimConfig(p, mode=mode, replications=n, seed=seed, stream_id=300 + k))
                k += 1
                bc = bhattacharyya(analytic, mc)
                checks.append(_check(f"BC {mode} m={m} lambda_b={lb}", bc, passed=bc > 0.98, threshold=0.98,
                                     replications=n))
    return _result(3, "load PMFs vs simulation", checks)


def criterion_4(seed: int = 0, budget: Budget = Budget()) -> dict:
    p = NetworkParams()
    n = budget.reps(20_000, 5_000)
    checks = []
    for i, r in enumerate((0.05, 0.1, 0.25)):
        closed = p.lambda_m * math.pi * r * r + 2 * p.lambda_P * p.m * r + p.lambda_d * (2 * r - r * r / (2 * p.a))
        checks.append(_check(f"palm_count_mean r={r}", counts.palm_count_mean(r, p), closed, 1e-12 * closed))
        fd = _derivative_at_one(lambda s: counts.palm_count_pgf(s, r, p))
        checks.append(_check(f"finite-difference PGF mean r={r} (rel)", fd / closed, 1.0, 1e-3))
        mc = simulate_counts(SimConfig(p, mode="palm_count", radius=r, replications=n, seed=seed, stream_id=400 + i))
        sem = mc.sem()
        checks.append(_check(f"Palm MC mean r={r}", mc.mean(), closed, 3.0 * sem, sem=sem, replications=n))
    return _result(4, "Palm counts", checks)


def criterion_5(seed: int = 0, budget: Budget = Budget()) -> dict:
    checks = []
    for lam in (1.0, 5.0):
        checks.append(_check(f"joint pdf mass lambda_b={lam}", chords.joint_pdf_mass(lam), 1.0, 5e-3))
        typ = chords.typical_chord_pdf(lam)
        target = math.pi / (4.0 * math.sqrt(lam))
        checks.append(_check(f"E[C] lambda_b={lam} (rel)", typ.mean() / target, 1.0, 0.01))
        back = chords.length_debias(chords.length_bias(typ))
        checks.append(_check(f"length-bias round trip lambda_b={lam}",
                             float(np.max(np.abs(back.density - typ.density)) / typ.density.max()), 0.0, 1e-3))
        tagged = chords.tagged_chord_pdf(lam)
        biased = chords.length_bias(typ)
        checks.append(_check(f"length-biased typical vs tagged lambda_b={lam}",
                             float(np.max(np.abs(biased.density - tagged.density)) / tagged.density.max()), 0.0, 1e-2))
    n = budget.reps(20_000, 10_000)
    p = NetworkParams(lambda_b=1.0)
    seg = simulate_chords(SimConfig(p, mode="chord", replications=n, seed=seed, stream_id=500))
    tagged = chords.tagged_chord_pdf(1.0)
    grid, cdf = tagged.grid, tagged.cdf() / tagged.integral()
    ks = ks_sample_vs_cdf(seg.sum(axis=1), lambda x: np.interp(x, grid, cdf, right=1.0))
    checks.append(_check("KS tagged chord vs simulation lambda_b=1", ks, passed=ks < 0.02, threshold=0.02,
                         replications=n))
    return _result(5, "chords", checks)


def criterion_6(seed: int = 0, budget: Budget = Budget()) -> dict:
    checks = []
    target = 1.0 / (1.0 + math.pi / 4.0)
    for method in ("semi_infinite", "compact", "hypergeometric"):
        checks.append(_check(f"P(SIR>1) alpha=4 {method}", coverage.sir_coverage(1.0, 1.0, 4.0, method), target, 1e-4))
    n = budget.reps(20_000, 10_000)
    p = NetworkParams(lambda_b=1.0, alpha=4.0)
    q, se = coverage_estimate(simulate_sir(SimConfig(p, mode="sir", replications=n, seed=seed, stream_id=600)), 1.0)
    checks.append(_check("MC P(SIR>1) alpha=4", q, target, 0.01, sem=se, replications=n))

    base = NetworkParams()
    lbs = (2.0, 5.0) if budget.quick else (2.0, 5.0, 10.0, 20.0, 30.0)
    for tau in TAUS:
        curves = {sc: [_rate(base.replace(lambda_b=lb), sc, tau) for lb in lbs] for sc in ("PTS", "NPTS")}
        for sc, vals in curves.items():
            checks.append(_check(f"r_c increasing in lambda_b {sc} tau={tau:g}", vals,
                                 passed=bool(np.all(np.diff(vals) > 0)), lambda_b=list(lbs)))
        gaps = [abs(a - b) for a, b in zip(curves["PTS"], curves["NPTS"])]
        for lb, g in zip(lbs, gaps):
            checks.append(_check(f"|r_c PTS - NPTS| at lambda_b={lb} tau={tau:g}", g, passed=g < 0.03, threshold=0.03))
    actives = (2.0,) if budget.quick else (2.0, 4.0)
    for act in actives:
        vals = {}
        for sc in ("PTS", "NPTS"):
            lb = coverage.lambda_b_for_active_density(act, base, sc)
            vals[sc] = (lb, [_rate(base.replace(lambda_b=lb), sc, tau) for tau in TAUS])
        for i, tau in enumerate(TAUS):
            pts, npts = vals["PTS"][1][i], vals["NPTS"][1][i]
            checks.append(_check(f"PTS beats NPTS at active density {act} tau={tau:g}", pts - npts,
                                 passed=pts > npts, lambda_b_pts=vals["PTS"][0], lambda_b_npts=vals["NPTS"][0],
                                 r_c_pts=pts, r_c_npts=npts))
    return _result(6, "coverage", checks)


def criterion_7(seed: int = 0, budget: Budget = Budget()) -> dict:
    p = NetworkParams(a=10.0)
    checks = []
    v_pts = loads.typical_load_variance(p, "PTS")
    v_npts = loads.typical_load_variance(p, "NPTS")
    checks.append(_check("typical variance gap a=10 km", abs(v_pts - v_npts) / v_npts, 0.0, 0.05,
                         var_pts=v_pts, var_npts=v_npts))
    n = budget.reps(20_000, 10_000)
    h = {sc: simulate_counts(SimConfig(p, mode="tagged_load", scenario=sc, replications=n, seed=seed,
                                       stream_id=700 + i)) for i, sc in enumerate(("PTS", "NPTS"))}
    ks = ks_distance(h["PTS"], h["NPTS"])
    checks.append(_check("KS tagged-load histograms a=10 km", ks, passed=ks < 0.03, threshold=0.03, replications=n))
    ks_an = ks_distance(_tagged(p, "PTS").pmf, _tagged(p, "NPTS").pmf)
    checks.append(_check("KS analytic tagged-load PMFs a=10 km", ks_an, passed=ks_an < 0.03, threshold=0.03))
    return _result(7, "convergence to the Poisson baseline", checks)


def criterion_8(seed: int = 0, budget: Budget = Budget()) -> dict:
    p = NetworkParams()
    checks = []
    for sc in ("PTS", "NPTS"):
        for r in (0.1, 0.25, 0.5, 1.0):
            n_max = counts.count_pmf(r, p=p, scenario=sc).n_max
            b = counts.count_pmf(r, n_max, p, method="bell", scenario=sc)
            f = counts.count_pmf(r, n_max, p, method="pgf_inversion", scenario=sc)
            checks.append(_check(f"Bell vs inversion {sc} r={r}", float(np.max(np.abs(b.masses - f.masses))), 0.0, 1e-6))
    b = loads.typical_load_exact_pmf(p, method="bell").pmf
    f = loads.typical_load_exact_pmf(p, method="pgf_inversion").pmf
    n = min(b.n_max, f.n_max) + 1
    checks.append(_check("Bell vs inversion typical exact load", float(np.max(np.abs(b.masses[:n] - f.masses[:n]))), 0.0, 1e-6))
    h = 1e-5
    for k in (1, 2, 3):
        for s in (0.2, 0.5, 0.8):
            for t in (0.1, 0.25, 0.6):
                if k == 1:
                    lower = lambda z: float(np.real(kernels.g_kernel(z, t, p)))
                else:
                    lower = lambda z: float(kernels.g_derivative(k - 1, z, t, p, form="gamma"))
                fd = (lower(s + h) - lower(s - h)) / (2 * h)
                for form in ("binomial", "gamma"):
                    val = float(kernels.g_derivative(k, s, t, p, form=form))
                    checks.append(_check(f"g^({k}) {form} s={s} t={t} (rel)", abs(val - fd) / abs(fd), 0.0, 1e-5))
    return _result(8, "oracle equivalence", checks)


CRITERIA: dict[int, Callable[..., dict]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
}


def run_validation(only=None, seed: int = 0, quick: bool = False, progress: Callable | None = None) -> dict[str, Any]:
    """Run the selected criteria (all of 1-8 by default) into one report."""
    ids = sorted(only) if only else sorted(CRITERIA)
    unknown = [i for i in ids if i not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}")
    budget = Budget(quick)
    results = []
    for cid in ids:
        res = CRITERIA[cid](seed=seed, budget=budget)
        results.append(res)
        if progress is not None:
            progress(res)
    return {"seed": seed, "quick": quick, "criteria": results, "passed": all(r["passed"] for r in results)}
