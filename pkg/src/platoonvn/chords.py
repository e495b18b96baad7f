"""Chord-length laws of the Poisson-Voronoi tessellation.

Put the origin on a road (the x-axis) and let L1, L2 be the distances from
the origin to the boundary of its cell along +x and -x.  Both exceed (l1, l2)
iff the cell nucleus y is the only base station in the union of the two disks
centred at Q1 = (l1, 0) and Q2 = (-l2, 0) passing through y.  Both circles
also pass through the mirror image of y, so the radical axis is the vertical
line through y and the union splits into two circular pieces v1 + v2; hence
d^2 V / dl1 dl2 = 0 and

    f(l1, l2) = lambda_b^3 int_{R^2} V_1 V_2 exp(-lambda_b V) dy
              = 2 lambda_b^3 int_0^pi int_0^inf V_1 V_2 exp(-lambda_b V) y dy dtheta.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .distributions import TabulatedPdf
from .errors import DomainError, NormalizationFailure
from .numerics import gauss_legendre_panels

GRID_POINTS = 400
GRID_LO = 1e-3
GRID_HI = 8.0
NORMALIZATION_GATE = 5e-3
EXP_CUTOFF = 35.0


def two_disk_union_area(l1, l2, y, theta):
    """Area of b(Q1, |Q1 - y|) U b(Q2, |Q2 - y|) and its partials in l1, l2.

    The base station sits at polar position (y, theta).  Each piece is
    v_i = r_i^2 (pi - alpha_i) + d_i h with h = y |sin theta|,
    d_1 = l1 - y cos theta, d_2 = l2 + y cos theta, alpha_i = atan2(h, d_i) in
    [0, pi]; at r_i = 0 the piece and its derivative take their limit 0.
    """
    l1, l2, y, theta = np.broadcast_arrays(*(np.asarray(v, float) for v in (l1, l2, y, theta)))
    if np.any(l1 < 0) or np.any(l2 < 0) or np.any(y < 0):
        raise DomainError("lengths must be non-negative")
    X = y * np.cos(theta)
    h = y * np.abs(np.sin(theta))
    d1 = l1 - X
    d2 = l2 + X
    a1 = np.arctan2(h, d1)
    a2 = np.arctan2(h, d2)
    r1sq = d1 * d1 + h * h
    r2sq = d2 * d2 + h * h
    v = r1sq * (np.pi - a1) + d1 * h + r2sq * (np.pi - a2) + d2 * h
    dv1 = 2.0 * d1 * (np.pi - a1) + 2.0 * h
    dv2 = 2.0 * d2 * (np.pi - a2) + 2.0 * h
    if v.ndim == 0:
        return float(v), float(dv1), float(dv2)
    return v, dv1, dv2


@lru_cache(maxsize=8)
def _theta_rule(n: int):
    return gauss_legendre_panels([0.0, 0.5 * math.pi, math.pi], n)


def _y_rule(l1: float, l2: float, lam: float, n: int):
    cut = max(l1, l2) + math.sqrt(EXP_CUTOFF / (math.pi * lam))
    knots = sorted({0.0, min(l1, l2), max(l1, l2), cut})
    knots = [k for i, k in enumerate(knots) if i == 0 or k > knots[i - 1] + 1e-14]
    return gauss_legendre_panels(knots, n)


def residual_chord_joint_pdf(l1, l2, lambda_b: float, n_theta: int = 24, n_y: int = 20):
    """Joint density of the two residual chord segments through the origin.

    Composite Gauss-Legendre in theta (split at pi/2) and y (split at l1, l2
    and truncated where exp(-lambda_b pi y^2) < e^-35).
    """
    l1a, l2a = np.broadcast_arrays(np.asarray(l1, float), np.asarray(l2, float))
    if np.any(l1a < 0) or np.any(l2a < 0):
        raise DomainError("chord segments must be non-negative")
    th, thw = _theta_rule(n_theta)
    out = np.empty(l1a.shape)
    for idx in np.ndindex(l1a.shape):
        a, b = float(l1a[idx]), float(l2a[idx])
        yy, yw = _y_rule(a, b, lambda_b, n_y)
        Y, T = np.meshgrid(yy, th, indexing="ij")
        v, dv1, dv2 = two_disk_union_area(a, b, Y, T)
        integrand = dv1 * dv2 * np.exp(-lambda_b * v) * Y
        out[idx] = 2.0 * lambda_b**3 * float(yw @ integrand @ thw)
    return float(out) if out.ndim == 0 else out


def _tagged_density_values(c: np.ndarray, lam: float, n_u: int, n_theta: int, n_y: int) -> np.ndarray:
    """f_{C_o}(c) = int_0^c f(c - u, u) du = 2 int_0^{c/2} f(c - u, u) du."""
    uu, uw = np.polynomial.legendre.leggauss(n_u)
    th, thw = _theta_rule(n_theta)
    out = np.empty(c.size)
    for i, ci in enumerate(c):
        u = 0.25 * ci * (uu + 1.0)
        w = 0.25 * ci * uw
        total = 0.0
        for uj, wj in zip(u, w):
            a, b = ci - uj, uj
            yy, yw = _y_rule(a, b, lam, n_y)
            Y, T = np.meshgrid(yy, th, indexing="ij")
            v, dv1, dv2 = two_disk_union_area(a, b, Y, T)
            total += wj * float(yw @ (dv1 * dv2 * np.exp(-lam * v) * Y) @ thw)
        out[i] = 2.0 * 2.0 * lam**3 * total
    return out


def default_grid(lambda_b: float = 1.0) -> np.ndarray:
    """0 followed by 400 log-spaced points on [1e-3, 8] / sqrt(lambda_b)."""
    g = np.geomspace(GRID_LO, GRID_HI, GRID_POINTS)
    return np.concatenate([[0.0], g]) / math.sqrt(lambda_b)


@lru_cache(maxsize=4)
def _unit_tagged_table(n_u: int = 16, n_theta: int = 24, n_y: int = 20):
    grid = default_grid(1.0)
    vals = np.zeros_like(grid)
    vals[1:] = _tagged_density_values(grid[1:], 1.0, n_u, n_theta, n_y)
    return grid, vals


def _gate(grid, vals, what: str, meta: dict) -> TabulatedPdf:
    raw = TabulatedPdf(grid, np.clip(vals, 0.0, None), False, dict(meta))
    integral = raw.integral()
    if abs(integral - 1.0) > NORMALIZATION_GATE:
        raise NormalizationFailure(f"{what} integrates to {integral:.6f}", integral)
    meta = dict(meta)
    meta["raw_integral"] = integral
    meta["normalization_residual"] = integral - 1.0
    return TabulatedPdf(grid, raw.density / integral, True, meta)


def tagged_chord_pdf(lambda_b: float, grid=None, direct: bool = False) -> TabulatedPdf:
    """Density of the length of the chord of the origin's cell along a road.

    By default the table is built once at lambda_b = 1 and mapped with the
    PPP scaling f_lambda(c) = sqrt(lambda) f_1(sqrt(lambda) c); ``direct``
    recomputes at ``lambda_b`` (used to test that equivariance).  A custom
    ``grid`` is served by PCHIP interpolation of the unit table.
    """
    if lambda_b <= 0:
        raise DomainError("lambda_b must be positive")
    meta = {"lambda_b": lambda_b, "kind": "tagged_chord"}
    sq = math.sqrt(lambda_b)
    if direct:
        g = default_grid(lambda_b) if grid is None else np.asarray(grid, float)
        vals = np.zeros_like(g)
        pos = g > 0
        vals[pos] = _tagged_density_values(g[pos], lambda_b, 16, 24, 20)
        return _gate(g, vals, "tagged chord density", meta)
    g1, v1 = _unit_tagged_table()
    unit = _gate(g1, v1, "tagged chord density", meta)
    if grid is None:
        return TabulatedPdf(g1 / sq, unit.density * sq, True, {**unit.meta, **meta})
    g = np.asarray(grid, float)
    return TabulatedPdf(g, unit(g * sq) * sq, False, dict(meta))


def typical_chord_pdf(lambda_b: float, grid=None) -> TabulatedPdf:
    """Length-debiased chord density f_C(c) = (pi / (4 sqrt(lambda_b))) f_{C_o}(c) / c."""
    tagged = tagged_chord_pdf(lambda_b, grid)
    g = tagged.grid
    mean_c = math.pi / (4.0 * math.sqrt(lambda_b))
    vals = np.zeros_like(g)
    pos = g > 0
    vals[pos] = mean_c * tagged.density[pos] / g[pos]
    if not pos[0]:
        # f_{C_o}(c)/c has a finite limit at 0; extrapolate linearly.
        x1, x2 = g[1], g[2]
        vals[0] = max(0.0, vals[1] + (vals[1] - vals[2]) * (x1 - 0.0) / (x2 - x1))
    return _gate(g, vals, "typical chord density", {"lambda_b": lambda_b, "kind": "typical_chord"})


def length_bias(pdf: TabulatedPdf) -> TabulatedPdf:
    """c f(c) / E[C]: the chord through a uniform point of the road."""
    vals = pdf.grid * pdf.density
    return TabulatedPdf(pdf.grid, vals / np.trapezoid(vals, pdf.grid), True, dict(pdf.meta))


def length_debias(pdf: TabulatedPdf) -> TabulatedPdf:
    """Inverse of ``length_bias``: f(c) / c, renormalized."""
    g = pdf.grid
    vals = np.zeros_like(g)
    pos = g > 0
    vals[pos] = pdf.density[pos] / g[pos]
    if not pos[0]:
        vals[0] = max(0.0, vals[1] + (vals[1] - vals[2]) * g[1] / (g[2] - g[1]))
    return TabulatedPdf(g, vals / np.trapezoid(vals, g), True, dict(pdf.meta))


def joint_pdf_mass(lambda_b: float, upper: float | None = None, n: int = 24) -> float:
    """Integral of the joint density over [0, upper]^2 by a product rule.

    Independent of the tagged-chord table: the square is cut into
    log-spaced panels in each coordinate.
    """
    upper = upper if upper is not None else 7.0 / math.sqrt(lambda_b)
    knots = np.concatenate([[0.0], np.geomspace(0.02, upper, 8) / 1.0])
    x, w = gauss_legendre_panels(knots, max(4, n // 3))
    L1, L2 = np.meshgrid(x, x, indexing="ij")
    f = residual_chord_joint_pdf(L1, L2, lambda_b)
    return float(w @ f @ w)
