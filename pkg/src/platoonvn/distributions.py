"""Containers for discrete and continuous distributions shared across modules."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NormalizationFailure  # noqa: F401  (re-exported)

PROVENANCES = ("bell", "pgf_inversion", "empirical", "convolution", "mixture")

_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscretePmf:
    """PMF on {0, ..., n_max} together with the mass that lies beyond n_max."""

    masses: np.ndarray
    tail_mass: float
    provenance: str
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        object.__setattr__(self, "masses", masses)
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("masses must be a non-empty 1-D array")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if np.any(masses < 0) or np.any(masses > 1 + _SUM_TOL):
            raise ValueError("masses must lie in [0, 1]")
        if self.tail_mass < 0:
            raise ValueError("tail_mass must be non-negative")
        total = masses.sum() + self.tail_mass
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"masses + tail = {total!r}, expected 1")

    @classmethod
    def from_masses(
        cls,
        masses,
        provenance: str,
        meta: dict[str, Any] | None = None,
        *,
        normalize: bool = False,
    ) -> "DiscretePmf":
        """Build a PMF whose tail is whatever mass ``masses`` leaves unaccounted.

        Round-off negatives are clipped.  With ``normalize=True`` an excess
        above one (quadrature noise) is divided out and recorded in
        ``meta["excess_mass"]`` instead of raising.
        """
        masses = np.clip(np.asarray(masses, dtype=float), 0.0, None)
        meta = dict(meta or {})
        total = float(masses.sum())
        if total > 1.0:
            if normalize or total - 1.0 <= _SUM_TOL:
                meta.setdefault("excess_mass", total - 1.0)
                masses = masses / total
                total = 1.0
            else:
                raise ValueError(f"masses sum to {total!r} > 1")
        return cls(masses, max(0.0, 1.0 - float(masses.sum())), provenance, meta)

    @property
    def n_max(self) -> int:
        return self.masses.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.masses.size)

    def p(self, k: int) -> float:
        return float(self.masses[k]) if 0 <= k < self.masses.size else 0.0

    def mean(self) -> float:
        return float(self.support @ self.masses)

    def variance(self) -> float:
        k = self.support
        mu = self.mean()
        return float(((k - mu) ** 2) @ self.masses)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.masses)

    def truncated(self, n_max: int) -> "DiscretePmf":
        if n_max >= self.n_max:
            return self
        kept = self.masses[: n_max + 1]
        return DiscretePmf(kept, max(0.0, 1.0 - kept.sum()), self.provenance, dict(self.meta))

    def padded(self, n_max: int) -> np.ndarray:
        out = np.zeros(n_max + 1)
        n = min(n_max, self.n_max) + 1
        out[:n] = self.masses[:n]
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "provenance": self.provenance,
            "tail_mass": self.tail_mass,
            "masses": self.masses.tolist(),
            "meta": _jsonable(self.meta),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path: str | Path, header: dict[str, Any] | None = None) -> None:
        lines = _header_lines(header)
        lines.append("n,p")
        lines += [f"{k},{p:.17g}" for k, p in enumerate(self.masses)]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True, eq=False)
class TabulatedPdf:
    """A density sampled on a strictly increasing grid.

    Off-grid evaluation uses PCHIP (monotone cubic) interpolation, which keeps
    the interpolant non-negative; moments use the trapezoid rule on the grid.
    """

    grid: np.ndarray
    density: np.ndarray
    normalized: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        density = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.shape != density.shape:
            raise ValueError("grid and density must be 1-D arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(density < 0):
            raise ValueError("density must be non-negative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", density)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        interp = PchipInterpolator(self.grid, self.density, extrapolate=False)
        out = np.nan_to_num(interp(x), nan=0.0)
        return np.clip(out, 0.0, None)

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def moment(self, q: float) -> float:
        return float(np.trapezoid(self.grid**q * self.density, self.grid))

    def mean(self) -> float:
        return self.moment(1.0) / self.integral()

    def cdf(self) -> np.ndarray:
        d, x = self.density, self.grid
        increments = 0.5 * (d[1:] + d[:-1]) * np.diff(x)
        return np.concatenate([[0.0], np.cumsum(increments)])

    def trapezoid_weights(self) -> np.ndarray:
        """Weights w with ``sum(w * h(grid)) ~ integral of h * density``."""
        dx = np.diff(self.grid)
        w = np.zeros_like(self.grid)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
        return w * self.density

    def to_csv(self, path: str | Path, header: dict[str, Any] | None = None) -> None:
        head = dict(self.meta)
        head.update(header or {})
        head.setdefault("normalization_residual", self.integral() - 1.0)
        lines = _header_lines(head)
        lines.append("c_km,density")
        lines += [f"{x:.17g},{d:.17g}" for x, d in zip(self.grid, self.density)]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(eq=False)
class EmpiricalDistribution:
    """Monte Carlo histogram over {0, ..., n_max} with its provenance.

    ``pooled`` marks histograms that count every interior cell of a
    replication rather than one cell per replication.
    """

    counts: np.ndarray
    replications: int
    seed: int
    stream_id: int
    window_radius: float
    mode: str
    pooled: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if not self.pooled and int(self.counts.sum()) != self.replications:
            raise ValueError("histogram total must equal the replication count")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_max(self) -> int:
        return self.counts.size - 1

    def normalized(self) -> np.ndarray:
        return self.counts / max(self.total, 1)

    def pmf(self) -> DiscretePmf:
        return DiscretePmf.from_masses(self.normalized(), "empirical", {"replications": self.total})

    def mean(self) -> float:
        return float(np.arange(self.counts.size) @ self.normalized())

    def variance(self) -> float:
        k = np.arange(self.counts.size)
        q = self.normalized()
        mu = k @ q
        return float(((k - mu) ** 2) @ q)

    def sem(self) -> float:
        """Standard error of the sample mean."""
        return float(np.sqrt(self.variance() * self.total / max(self.total - 1, 1) / max(self.total, 1)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "pooled": self.pooled,
            "replications": self.replications,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "window_radius": self.window_radius,
            "counts": self.counts.tolist(),
            "meta": _jsonable(self.meta),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_csv(self, path: str | Path, header: dict[str, Any] | None = None) -> None:
        head = {"mode": self.mode, "replications": self.replications, "seed": self.seed,
                "stream_id": self.stream_id, "window_radius": self.window_radius}
        head.update(header or {})
        lines = _header_lines(head)
        lines.append("n,count,q")
        q = self.normalized()
        lines += [f"{k},{c},{qq:.17g}" for k, (c, qq) in enumerate(zip(self.counts, q))]
        Path(path).write_text("\n".join(lines) + "\n")


def _header_lines(header: dict[str, Any] | None) -> list[str]:
    if not header:
        return []
    return ["# " + json.dumps(_jsonable(header), sort_keys=True)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
