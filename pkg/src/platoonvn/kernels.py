"""Closed-form kernels of the platoon model.

Units throughout: km, km^-1, km^-2.  The platoon radius a = 250 m is 0.25.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammainc, gammaln

from .errors import DomainError

S_ONE_SWITCH = 1e-9


@dataclass(frozen=True)
class NetworkParams:
    """Model densities and radio parameters.

    ``lambda_npts`` is the per-road density of the non-platooned baseline;
    ``None`` means the matched value m * lambda_P, so both scenarios carry the
    same vehicle density.
    """

    lambda_L: float = 5.0 / math.pi
    lambda_P: float = 1.0
    m: float = 15.0
    a: float = 0.25
    lambda_b: float = 5.0
    lambda_npts: float | None = None
    alpha: float = 3.5
    bandwidth: float = 20e6

    def __post_init__(self):
        for name in ("lambda_L", "lambda_P", "m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and non-negative, got {v!r}")
        if self.lambda_npts is not None and not self.lambda_npts >= 0:
            raise DomainError("lambda_npts must be non-negative")
        for name in ("a", "lambda_b", "bandwidth"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and positive, got {v!r}")
        if not self.alpha > 2:
            raise DomainError("alpha must exceed 2")

    @property
    def lambda_d(self) -> float:
        return self.m / (2.0 * self.a)

    @property
    def lambda_m(self) -> float:
        return self.m * self.lambda_P * self.lambda_L * math.pi

    @property
    def mu_m(self) -> float:
        """Per-road vehicle density of the platooned traffic."""
        return self.m * self.lambda_P

    @property
    def npts_density(self) -> float:
        return self.mu_m if self.lambda_npts is None else float(self.lambda_npts)

    @property
    def kappa(self) -> float:
        return math.pi * self.lambda_L * self.npts_density

    def replace(self, **changes) -> "NetworkParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown parameter fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, source: str | Path) -> "NetworkParams":
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GenGammaParams:
    a1: float
    b1: float
    c1: float

    def __post_init__(self):
        if not (self.a1 > 0 and self.b1 > 0 and self.c1 > 0):
            raise DomainError("generalized Gamma parameters must be positive")


# Empirical fits for the normalized area and perimeter of the typical
# Poisson-Voronoi cell.
AREA_FIT = GenGammaParams(1.07950, 3.03226, 3.31122)
PERIMETER_FIT = GenGammaParams(2.33609, 2.97006, 7.588060)


def _nonneg(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError(f"{name} must be non-negative")
    return x


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def lens_1d(a, b, x):
    """Length of the intersection of two 1-D balls of radii a, b at distance x."""
    a, b, x = (_nonneg(n, v) for n, v in (("a", a), ("b", b), ("x", x)))
    full = 2.0 * np.minimum(a, b)
    partial = a + b - x
    out = np.where(x <= np.abs(a - b), full, np.where(x <= a + b, partial, 0.0))
    return _out(out)


def beta_fn(t, a):
    t = _nonneg("t", t)
    return _out(2.0 * np.minimum(t, a))


def _exprel_minus_one(x):
    """(e^x - 1)/x - 1 without cancellation; 0 at x = 0."""
    x = np.asarray(x)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    direct = (np.expm1(safe) - safe) / safe
    series = x * (1 / 2 + x * (1 / 6 + x * (1 / 24 + x * (1 / 120 + x / 720))))
    return np.where(small, series, direct)


def g_kernel(s, t, p: NetworkParams):
    """Log-PGF of the 1-D MCP count in an interval of half-length t.

    Written as 2 lam_P [|t-a| expm1(x) + beta (expm1(x)/x - 1)] with
    x = lam_d beta (s-1), which equals the textbook form, is exactly 0 at
    s = 1 and keeps full precision near it.  Accepts complex s.
    """
    t = _nonneg("t", t)
    s = np.asarray(s)
    beta = 2.0 * np.minimum(t, p.a)
    x = p.lambda_d * beta * (s - 1.0)
    val = 2.0 * p.lambda_P * (np.abs(t - p.a) * np.expm1(x) + beta * _exprel_minus_one(x))
    if np.ndim(val) == 0:
        return complex(val) if np.iscomplexobj(val) else float(val)
    return val


def g_kernel_textbook(s, t, p: NetworkParams):
    """The kernel in its original three-term form (reference only, s != 1)."""
    t = _nonneg("t", t)
    beta = 2.0 * np.minimum(t, p.a)
    x = p.lambda_d * beta * (s - 1.0)
    val = 2.0 * p.lambda_P * (
        np.abs(t - p.a) * np.exp(x) - (t + p.a) + np.expm1(x) / (p.lambda_d * (s - 1.0))
    )
    return _out(val)


def g_derivative(k: int, s, t, p: NetworkParams, form: str = "binomial"):
    """k-th s-derivative of g.

    ``form="binomial"`` evaluates the finite binomial sum as written, which
    has a removable pole at s = 1 (DomainError there; use ``kappa``) and
    loses digits to cancellation once lam_d beta |s-1| is small.
    ``form="gamma"`` uses the equivalent incomplete-gamma representation
    2 lam_P [|t-a| B^k e^{-B(1-s)} + k! P(k+1, B(1-s)) / (lam_d (1-s)^{k+1})],
    B = lam_d beta, which is stable everywhere on [0, 1].
    """
    if k < 1:
        raise DomainError("derivative order must be at least 1")
    t = _nonneg("t", t)
    s = float(s)
    beta = 2.0 * np.minimum(t, p.a)
    B = p.lambda_d * beta
    u = s - 1.0
    if form == "binomial":
        if abs(u) < S_ONE_SWITCH:
            raise DomainError("binomial form has a pole at s = 1; use kappa")
        e = np.exp(u * B)
        total = np.zeros_like(B)
        for j in range(k + 1):
            total = total + math.comb(k, j) * math.factorial(j) * (-1) ** j / u ** (j + 1) * B ** (k - j) * e
        total = total - math.factorial(k) * (-1) ** k / u ** (k + 1)
        val = 2.0 * p.lambda_P * (B**k * np.abs(t - p.a) * e + total / p.lambda_d)
        return _out(val)
    if form != "gamma":
        raise ValueError(f"unknown form {form!r}")
    if abs(u) < S_ONE_SWITCH:
        return kappa(t, k, p)
    w = 1.0 - s
    first = np.abs(t - p.a) * B**k * np.exp(-B * w)
    second = math.factorial(k) * gammainc(k + 1, B * w) / (p.lambda_d * w ** (k + 1))
    return _out(2.0 * p.lambda_P * (first + second))


def g_taylor_coefficients(t, n_max: int, p: NetworkParams) -> np.ndarray:
    """Coefficients c_k = g^{(k)}(0, t) / k! for k = 0..n_max.

    Returns shape (len(t), n_max + 1); c_0 = g(0, t).  Every c_k (k >= 1) is
    a non-negative combination of a Poisson mass and a regularized incomplete
    gamma function, so no cancellation occurs.
    """
    t = np.atleast_1d(_nonneg("t", t))
    beta = 2.0 * np.minimum(t, p.a)
    B = p.lambda_d * beta
    k = np.arange(n_max + 1)
    out = np.empty((t.size, n_max + 1))
    out[:, 0] = g_kernel(0.0, t, p)
    if n_max == 0:
        return out
    kk = k[1:][None, :]
    Bc = B[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pois = kk * np.log(Bc) - Bc - gammaln(kk + 1.0)
    pois = np.where(Bc > 0, np.exp(log_pois), 0.0)
    tail = gammainc(kk + 1.0, Bc) / p.lambda_d if p.lambda_d > 0 else 0.0 * Bc
    out[:, 1:] = 2.0 * p.lambda_P * (np.abs(t - p.a)[:, None] * pois + tail)
    return out


def kappa(t, k: int, p: NetworkParams):
    """Limit of g^{(k)}(s, t) as s -> 1, the k-th factorial moment kernel."""
    if k < 1:
        raise DomainError("order must be at least 1")
    t = _nonneg("t", t)
    beta = 2.0 * np.minimum(t, p.a)
    return _out(2.0 * p.lambda_P * (p.lambda_d * beta) ** k * (np.abs(t - p.a) + beta / (k + 1)))


# -- generalized Gamma cell statistics ---------------------------------------


def gen_gamma_pdf(x, gp: GenGammaParams):
    x = _nonneg("x", x)
    a1, b1, c1 = gp.a1, gp.b1, gp.c1
    log_norm = math.log(a1) + (c1 / a1) * math.log(b1) - gammaln(c1 / a1)
    with np.errstate(divide="ignore"):
        logpdf = log_norm + (c1 - 1.0) * np.log(x) - b1 * x**a1
    out = np.where(x > 0, np.exp(logpdf), 0.0 if c1 > 1 else (np.inf if c1 < 1 else math.exp(log_norm)))
    return _out(out)


def gen_gamma_moment(q: float, gp: GenGammaParams) -> float:
    """E[X^q] for X with the generalized Gamma density above."""
    a1, b1, c1 = gp.a1, gp.b1, gp.c1
    return math.exp(gammaln((c1 + q) / a1) - gammaln(c1 / a1) - (q / a1) * math.log(b1))


def gen_gamma_quantile(prob: float, gp: GenGammaParams) -> float:
    """Quantile via the gamma law of b1 X^a1."""
    from scipy.special import gammaincinv

    y = gammaincinv(gp.c1 / gp.a1, prob)
    return float((y / gp.b1) ** (1.0 / gp.a1))


def cell_area_pdf(v, p: NetworkParams):
    v = _nonneg("v", v)
    return _out(p.lambda_b * gen_gamma_pdf(p.lambda_b * v, AREA_FIT))


def cell_perimeter_pdf(z, p: NetworkParams):
    z = _nonneg("z", z)
    c = math.sqrt(p.lambda_b) / 4.0
    return _out(c * gen_gamma_pdf(c * z, PERIMETER_FIT))


def typical_radius_pdf(r, p: NetworkParams):
    """Density of the radius of the disk with the typical cell's area."""
    r = _nonneg("r", r)
    return _out(2.0 * math.pi * r * cell_area_pdf(math.pi * r**2, p))


def tagged_radius_pdf(r, p: NetworkParams):
    """Area-biased version of ``typical_radius_pdf`` for the cell of the origin."""
    r = _nonneg("r", r)
    return _out(2.0 * math.pi * r * p.lambda_b * math.pi * r**2 * cell_area_pdf(math.pi * r**2, p))


def typical_radius_moment(q: float, p: NetworkParams) -> float:
    """E[R_t^q] where pi R_t^2 lambda_b follows the area fit."""
    return gen_gamma_moment(q / 2.0, AREA_FIT) / (math.pi * p.lambda_b) ** (q / 2.0)


def tagged_radius_moment(q: float, p: NetworkParams, normalized: bool = True) -> float:
    """E[R_o^q] under the area-biased radius law.

    The area fit has mean 1.0000644 rather than exactly 1, so the biased
    density integrates to that value; ``normalized=True`` divides it out.
    """
    m = gen_gamma_moment(q / 2.0 + 1.0, AREA_FIT) / (math.pi * p.lambda_b) ** (q / 2.0)
    return m / gen_gamma_moment(1.0, AREA_FIT) if normalized else m


def size_bias_factor() -> float:
    """lambda_b pi E[R_o^2]: area-biased over typical mean cell size (~1.28)."""
    return gen_gamma_moment(2.0, AREA_FIT) / gen_gamma_moment(1.0, AREA_FIT)


def radius_quantile(prob: float, p: NetworkParams, tagged: bool = False) -> float:
    """Quantile of the typical (or area-biased) equal-area radius."""
    gp = AREA_FIT
    if tagged:
        # x f(x) / E[X] is again generalized Gamma with c1 -> c1 + 1.
        gp = GenGammaParams(gp.a1, gp.b1, gp.c1 + 1.0)
    x = gen_gamma_quantile(prob, gp)
    return math.sqrt(x / (math.pi * p.lambda_b))
