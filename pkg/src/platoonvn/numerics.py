"""Quadrature, Bell polynomials and PGF inversion.

The integrator is a global adaptive Gauss-Kronrod (7/15) scheme that accepts
vector-valued integrands, so a whole family of integrals sharing one domain
(for instance every Taylor coefficient of a PGF) is evaluated on common nodes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .distributions import DiscretePmf

NONE = "none"
INVERSE_SQRT_UPPER = "inverse_sqrt_upper_endpoint"


class NonConvergence(ArithmeticError):
    """Subdivision or doubling budget exhausted before the tolerance was met."""

    def __init__(self, message: str, estimate, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class NonFinite(ArithmeticError):
    """The integrand produced NaN or infinity."""


class BellOverflow(OverflowError):
    """A complete Bell polynomial left the double-precision range."""


class InvalidPgf(ValueError):
    """The supplied function does not behave like a PGF at s = 1."""


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_subdivisions: int = 400
    singularity_hint: str = NONE

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be non-negative")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")
        if self.singularity_hint not in (NONE, INVERSE_SQRT_UPPER):
            raise ValueError(f"unknown singularity hint {self.singularity_hint!r}")

    def with_hint(self, hint: str) -> "QuadratureSpec":
        return QuadratureSpec(self.rel_tol, self.abs_tol, self.max_subdivisions, hint)


DEFAULT_SPEC = QuadratureSpec()

# Kronrod 15-point nodes on [-1, 1] (non-negative half) with the embedded
# 7-point Gauss weights; values from QUADPACK's qk15.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes.
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[9:15:2] = _WG[:3][::-1]


def _eval(f, x):
    y = np.asarray(f(x))
    if not np.iscomplexobj(y):
        y = y.astype(float, copy=False)
    if y.ndim == 0:
        y = np.full(x.shape, y[()])
    if not np.all(np.isfinite(y)):
        raise NonFinite("integrand returned a non-finite value")
    return y


def _gk_panel(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = _eval(f, mid + half * _NODES)
    shape = (-1,) + (1,) * (y.ndim - 1)
    kron = half * np.sum(_KW.reshape(shape) * y, axis=0)
    gauss = half * np.sum(_GW.reshape(shape) * y, axis=0)
    err = float(np.max(np.abs(kron - gauss))) if np.ndim(kron) else abs(kron - gauss)
    # QUADPACK-style sharpening of the raw difference.
    resasc = half * np.sum(_KW.reshape(shape) * np.abs(y - kron / (b - a) if b > a else y), axis=0)
    resasc = float(np.max(np.abs(resasc))) if np.ndim(resasc) else float(resasc)
    if resasc > 0 and err > 0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    return kron, err


def integrate(
    f: Callable,
    lo: float,
    hi: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    points=None,
):
    """Integrate ``f`` over ``[lo, hi]``.

    ``f`` receives a 1-D array of abscissae and returns either an array of the
    same length or an array of shape ``(len(x), ...)`` for vector integrands;
    the error test applies to the largest component.  ``points`` lists
    interior break points (kinks) that become initial panel edges.

    With ``singularity_hint=INVERSE_SQRT_UPPER`` the caller promises that
    ``f(t) * sqrt(hi - t)`` stays bounded; the substitution
    ``t = lo + (hi - lo) sin(theta)`` then removes the singularity exactly.
    """
    if hi < lo:
        raise ValueError("integration limits must satisfy lo <= hi")
    if hi == lo:
        y = _eval(f, np.array([lo]))
        return np.zeros(y.shape[1:]) if y.ndim > 1 else 0.0
    if spec.singularity_hint == INVERSE_SQRT_UPPER:
        width = hi - lo

        def g(theta):
            return _scale_rows(_eval(f, lo + width * np.sin(theta)), width * np.cos(theta))

        breaks = None
        if points is not None:
            inner = [p for p in points if lo < p < hi]
            breaks = [math.asin((p - lo) / width) for p in inner]
        plain = QuadratureSpec(spec.rel_tol, spec.abs_tol, spec.max_subdivisions, NONE)
        return integrate(g, 0.0, 0.5 * math.pi, plain, breaks)

    edges = [lo]
    if points is not None:
        edges += sorted(p for p in set(points) if lo < p < hi)
    edges.append(hi)
    heap = []
    total = 0.0
    err_total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = _gk_panel(f, a, b)
        heap.append((-err, a, b, val))
        total = total + val
        err_total += err
    heapq.heapify(heap)
    n_panels = len(heap)
    while True:
        scale = float(np.max(np.abs(total))) if np.ndim(total) else abs(total)
        if err_total <= max(spec.abs_tol, spec.rel_tol * scale):
            break
        if n_panels >= spec.max_subdivisions + len(edges) - 1:
            raise NonConvergence("subdivision budget exhausted", total, err_total)
        neg_err, a, b, val = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b):
            raise NonConvergence("panel width reached machine resolution", total, err_total)
        v1, e1 = _gk_panel(f, a, mid)
        v2, e2 = _gk_panel(f, mid, b)
        total = total - val + v1 + v2
        err_total += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, a, mid, v1))
        heapq.heappush(heap, (-e2, mid, b, v2))
        n_panels += 1
    # Re-sum to shed the drift of incremental updates.
    total = sum(item[3] for item in heap)
    if np.ndim(total):
        return total
    return complex(total) if np.iscomplexobj(total) else float(total)


def _scale_rows(y, w):
    return y * w.reshape((-1,) + (1,) * (y.ndim - 1))


def semi_infinite_integrate(
    f: Callable,
    lo: float,
    spec: QuadratureSpec = DEFAULT_SPEC,
    initial_width: float = 1.0,
    tail_ok: Callable[[float], bool] | None = None,
    max_doublings: int = 60,
):
    """Integrate over ``[lo, inf)`` by panels of doubling width.

    Stops after the first panel whose contribution is below
    ``max(abs_tol, rel_tol * |running total|)`` provided ``tail_ok(upper)``
    (the caller's decay envelope, if any) agrees that the remainder is
    negligible.
    """
    if initial_width <= 0:
        raise ValueError("initial_width must be positive")
    a = lo
    width = initial_width
    total = integrate(f, a, a + width, spec)
    a += width
    for _ in range(max_doublings):
        width *= 2.0
        piece = integrate(f, a, a + width, spec)
        total = total + piece
        a += width
        size = float(np.max(np.abs(piece))) if np.ndim(piece) else abs(piece)
        scale = float(np.max(np.abs(total))) if np.ndim(total) else abs(total)
        if size <= max(spec.abs_tol, spec.rel_tol * scale) and (tail_ok is None or tail_ok(a)):
            return total
    raise NonConvergence("doubling cap reached", total, float("nan"))


@lru_cache(maxsize=64)
def _gl(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre_panels(breaks, order: int = 16):
    """Nodes and weights of a composite Gauss-Legendre rule on ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _gl(order)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def gauss_legendre(lo: float, hi: float, order: int):
    return gauss_legendre_panels([lo, hi], order)


# -- Bell polynomials ---------------------------------------------------------


def _validate_bell_input(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("Bell input must be finite")
    return x


def complete_bell(x) -> np.ndarray:
    """Complete Bell polynomials B_0..B_k of ``x = (x_1, ..., x_k)``.

    Uses B_{n+1} = sum_i C(n, i) B_{n-i} x_{i+1}.  Raises BellOverflow as soon
    as an order leaves the floating range.
    """
    x = _validate_bell_input(x)
    k = x.size
    out = np.empty(k + 1)
    out[0] = 1.0
    with np.errstate(over="raise", invalid="raise"):
        for n in range(k):
            binom = np.array([math.comb(n, i) for i in range(n + 1)], dtype=float)
            try:
                val = float(np.sum(binom * out[n::-1] * x[: n + 1]))
            except FloatingPointError as exc:
                raise BellOverflow(f"B_{n + 1} overflowed") from exc
            if not math.isfinite(val):
                raise BellOverflow(f"B_{n + 1} overflowed")
            out[n + 1] = val
    return out


def complete_bell_log(x) -> tuple[np.ndarray, np.ndarray]:
    """Log-space complete Bell polynomials: returns (sign, log|B_n|)."""
    x = _validate_bell_input(x)
    k = x.size
    sign = np.zeros(k + 1)
    logb = np.full(k + 1, -np.inf)
    sign[0], logb[0] = 1.0, 0.0
    with np.errstate(divide="ignore"):
        xs = np.sign(x)
        xl = np.log(np.abs(x))
    for n in range(k):
        i = np.arange(n + 1)
        lbinom = np.array([math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) for j in i])
        terms_log = lbinom + logb[n::-1] + xl[: n + 1]
        terms_sign = sign[n::-1] * xs[: n + 1]
        mask = np.isfinite(terms_log) & (terms_sign != 0)
        if not np.any(mask):
            continue
        peak = terms_log[mask].max()
        acc = float(np.sum(terms_sign[mask] * np.exp(terms_log[mask] - peak)))
        if acc == 0.0:
            continue
        sign[n + 1] = math.copysign(1.0, acc)
        logb[n + 1] = peak + math.log(abs(acc))
    return sign, logb


def exp_series(log_c0: float, a, n_max: int) -> np.ndarray:
    """Taylor coefficients of ``exp(log_c0 + sum_k a_k s^k)`` up to order n_max.

    ``a[k]`` is the order-k coefficient (``a[0]`` is ignored).  The recursion
    p_n = (1/n) sum_k k a_k p_{n-k} equals B_n(1! a_1, ..., n! a_n) / n!, the
    factorial-scaled Bell polynomial, and never forms the unscaled B_n.  A
    running rescale keeps the recursion inside the floating range even when
    exp(log_c0) underflows.
    """
    a = np.asarray(a, dtype=float)
    if a.size < n_max + 1:
        a = np.concatenate([a, np.zeros(n_max + 1 - a.size)])
    ka = np.arange(n_max + 1) * a[: n_max + 1]
    q = np.zeros(n_max + 1)
    logs = np.full(n_max + 1, -np.inf)
    q[0] = 1.0
    logs[0] = log_c0
    shift = 0.0
    for n in range(1, n_max + 1):
        val = float(ka[1 : n + 1] @ q[n - 1 :: -1]) / n
        q[n] = val
        if val > 0:
            logs[n] = log_c0 + shift + math.log(val)
        elif val < 0:
            raise ArithmeticError("exp-series recursion produced a negative coefficient")
        if val > 1e200:
            q[: n + 1] *= 1e-200
            shift += 200.0 * math.log(10.0)
    with np.errstate(under="ignore"):
        return np.exp(logs)


def exp_series_rows(log_c0, a, n_max: int) -> np.ndarray:
    """Row-wise ``exp_series`` for a batch of series.

    ``log_c0`` has shape (rows,), ``a`` shape (rows, >= n_max + 1).  No
    rescaling is attempted, so callers must keep exp(log_c0) and the
    coefficients in range (true for per-chord counts on bounded chords).
    """
    log_c0 = np.atleast_1d(np.asarray(log_c0, dtype=float))
    a = np.asarray(a, dtype=float)
    rows = log_c0.size
    out = np.zeros((rows, n_max + 1))
    out[:, 0] = np.exp(log_c0)
    ka = a[:, 1 : n_max + 1] * np.arange(1, n_max + 1)[None, :]
    for n in range(1, n_max + 1):
        out[:, n] = np.einsum("ij,ij->i", ka[:, :n], out[:, n - 1 :: -1][:, :n]) / n
    return out


# -- PGF inversion ------------------------------------------------------------


def pgf_invert(
    pgf: Callable,
    n_max: int,
    pgf_tol: float = 1e-6,
    oversample: int = 4,
) -> DiscretePmf:
    """PMF on {0..n_max} from a PGF by discrete Fourier inversion on |s| = 1.

    N is the next power of two at least ``oversample * n_max``.  Round-off
    negatives are clamped to zero, the N-point mass vector is renormalized and
    the clamped total is recorded in ``meta["clamped_mass"]``; mass aliased
    onto indices above n_max becomes the tail.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    at_one = complex(_call_pgf(pgf, np.array([1.0 + 0j]))[0])
    if abs(at_one - 1.0) > pgf_tol:
        raise InvalidPgf(f"pgf(1) = {at_one!r}")
    n = 1
    while n < oversample * n_max or n < 2 * (n_max + 1):
        n *= 2
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    vals = _call_pgf(pgf, roots)
    p = np.real(np.fft.fft(vals)) / n
    negative = p < 0
    clamped = float(-p[negative].sum())
    p[negative] = 0.0
    p /= p.sum()
    masses = p[: n_max + 1]
    meta = {"clamped_mass": clamped, "fft_size": n, "pgf_at_one": at_one.real}
    return DiscretePmf(masses, max(0.0, 1.0 - float(masses.sum())), "pgf_inversion", meta)


def _call_pgf(pgf, s):
    try:
        v = np.asarray(pgf(s), dtype=complex)
        if v.shape == s.shape:
            return v
    except (TypeError, ValueError):
        pass
    return np.array([complex(pgf(z)) for z in s])
