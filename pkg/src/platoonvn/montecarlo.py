"""Monte Carlo oracle for loads, counts, chords and SIR.

Replications are split into fixed blocks; block b draws from substream b of
the configured (seed, stream_id), so results do not depend on how blocks are
scheduled over workers.

Cell geometry is never constructed.  For a nucleus y and the other base
stations, let d_k be the distance to the nearest one in the k-th of six 60
degree sectors around y.  Every point x of the cell of y satisfies
|x - y| <= max_k d_k: otherwise the station in the sector containing x is
within 60 degrees of x - y and strictly nearer to x.  Vehicles are therefore
only sampled in that disk, and only stations within twice its radius can
compete for them.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy.spatial import cKDTree

from .distributions import DiscretePmf, EmpiricalDistribution
from .errors import DegenerateWindow
from .kernels import NetworkParams
from .samplers import RngSeed, sample_ppp_2d, sample_traffic_xy

MODES = ("typical_load", "tagged_load", "palm_count", "sir", "void", "chord")
SILENCING = ("thinned", "load_coupled")
MAX_EXTENSIONS = 8
BC_BLOCK = 10_000
BC_STABLE = 1e-3


@dataclass(frozen=True)
class SimConfig:
    """Simulation set-up.

    ``window_radius`` is the radius of the base-station disk (it is grown
    by exact annulus extension whenever a cell is not resolved inside it);
    vehicles are always sampled with an exact platoon guard of a, so the
    window carries no a-dependent term.  ``radius`` is the ball radius for
    the count modes, ``tau`` and ``p_on`` configure the SIR mode.
    """

    params: NetworkParams = field(default_factory=NetworkParams)
    mode: str = "typical_load"
    scenario: str = "PTS"
    replications: int = 10_000
    window_radius: float | None = None
    guard_margin: float | None = None
    seed: int = 0
    stream_id: int = 0
    block_size: int = 1000
    pooled: bool = False
    radius: float = 0.5
    silencing: str = "thinned"
    p_on: float = 1.0
    workers: int = 1

    def __post_init__(self):
        p = self.params
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.scenario not in ("PTS", "NPTS"):
            raise ValueError("scenario must be 'PTS' or 'NPTS'")
        if self.silencing not in SILENCING:
            raise ValueError(f"silencing must be one of {SILENCING}")
        if self.replications < 1 or self.block_size < 1:
            raise ValueError("replications and block_size must be positive")
        scale = 1.0 / math.sqrt(p.lambda_b)
        if self.window_radius is None:
            object.__setattr__(self, "window_radius", 10.0 * scale)
        if self.guard_margin is None:
            object.__setattr__(self, "guard_margin", 2.0 * scale)
        if self.window_radius < 5.0 * scale:
            raise ValueError("window_radius must be at least 5 / sqrt(lambda_b)")
        if self.guard_margin < 2.0 * scale:
            raise ValueError("guard_margin must be at least 2 / sqrt(lambda_b)")
        if not 0.0 <= self.p_on <= 1.0:
            raise ValueError("p_on must lie in [0, 1]")

    @property
    def rng_seed(self) -> RngSeed:
        return RngSeed(self.seed, self.stream_id)

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "params"}
        d["params"] = self.params.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        params = NetworkParams.from_dict(d.pop("params", {}))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown simulation fields: {sorted(unknown)}")
        return cls(params=params, **d)

    @classmethod
    def from_json(cls, source: str | Path) -> "SimConfig":
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        return cls.from_dict(json.loads(text))


# geometry helpers ----------------------------------------------------------

def sector_radius(nucleus, others) -> float:
    """max over six sectors of the nearest-station distance; inf if a sector is empty."""
    d = np.asarray(others, float) - np.asarray(nucleus, float)
    if d.shape[0] == 0:
        return math.inf
    r = np.hypot(d[:, 0], d[:, 1])
    sec = np.floor(np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi) / (np.pi / 3)).astype(int) % 6
    best = np.full(6, np.inf)
    np.minimum.at(best, sec, r)
    return float(best.max())


def _resolve_cell(nucleus, bs, radius, lam, rng):
    """Grow the station disk until the cell bound of ``nucleus`` fits in it."""
    c = np.asarray(nucleus, float)
    for ext in range(MAX_EXTENSIONS + 1):
        R = sector_radius(c, bs)
        if np.hypot(*c) + 2.0 * R <= radius:
            return bs, R, radius, ext
        bs = np.vstack([bs, sample_ppp_2d(lam, 2.0 * radius, rng, inner_radius=radius)])
        radius *= 2.0
    raise DegenerateWindow("cell not resolved inside the grown window", MAX_EXTENSIONS)


def _owned(points, nucleus, bs, R) -> np.ndarray:
    """Mask of ``points`` (all within R of nucleus) strictly nearer to it than to ``bs``."""
    if points.shape[0] == 0:
        return np.zeros(0, bool)
    c = np.asarray(nucleus, float)
    near = bs[np.sum((bs - c) ** 2, axis=1) <= (2.0 * R) ** 2 + 1e-12]
    if near.shape[0] == 0:
        return np.ones(points.shape[0], bool)
    _, idx = cKDTree(np.vstack([c[None, :], near])).query(points)
    return idx == 0


# single replications -------------------------------------------------------

def _typical_load_once(cfg: SimConfig, rng) -> tuple[int, int]:
    """Load of a base station at the origin (Palm of the station process)."""
    p = cfg.params
    bs = sample_ppp_2d(p.lambda_b, cfg.window_radius, rng)
    bs, R, _, ext = _resolve_cell((0.0, 0.0), bs, cfg.window_radius, p.lambda_b, rng)
    veh = sample_traffic_xy(p, R, rng, cfg.scenario)
    return int(np.count_nonzero(_owned(veh, (0.0, 0.0), bs, R))), ext


def _tagged_load_once(cfg: SimConfig, rng) -> tuple[int, int]:
    """Load of the station serving a typical vehicle at the origin, excluding it."""
    p = cfg.params
    bs = sample_ppp_2d(p.lambda_b, cfg.window_radius, rng)
    radius = cfg.window_radius
    ext0 = 0
    while bs.shape[0] == 0:
        bs = np.vstack([bs, sample_ppp_2d(p.lambda_b, 2 * radius, rng, inner_radius=radius)])
        radius *= 2
        ext0 += 1
    i0 = int(np.argmin(np.sum(bs**2, axis=1)))
    y0 = bs[i0]
    others = np.delete(bs, i0, axis=0)
    others, R, _, ext = _resolve_cell(y0, others, radius, p.lambda_b, rng)
    pts = sample_traffic_xy(p, R, rng, cfg.scenario, palm=True, center=y0)
    return int(np.count_nonzero(_owned(pts, y0, others, R))), ext0 + ext


def _count_once(cfg: SimConfig, rng, palm: bool) -> tuple[int, int]:
    veh = sample_traffic_xy(cfg.params, cfg.radius, rng, cfg.scenario, palm=palm)
    return int(np.count_nonzero(np.sum(veh**2, axis=1) <= cfg.radius**2)), 0


def _station_loads(p, scenario, bs, radius, rng) -> np.ndarray:
    veh = sample_traffic_xy(p, radius, rng, scenario)
    loads = np.zeros(bs.shape[0], np.int64)
    if veh.shape[0] and bs.shape[0]:
        _, idx = cKDTree(bs).query(veh)
        np.add.at(loads, idx, 1)
    return loads


def _sir_once(cfg: SimConfig, rng) -> float:
    p = cfg.params
    bs = sample_ppp_2d(p.lambda_b, cfg.window_radius, rng)
    if bs.shape[0] == 0:
        return math.inf
    d2 = np.sum(bs**2, axis=1)
    i0 = int(np.argmin(d2))
    h = rng.exponential(1.0, bs.shape[0])
    if cfg.silencing == "thinned":
        active = rng.random(bs.shape[0]) < cfg.p_on
    else:
        active = _station_loads(p, cfg.scenario, bs, cfg.window_radius, rng) >= 1
    active[i0] = False
    gain = h * d2 ** (-0.5 * p.alpha)
    interference = float(gain[active].sum())
    if interference == 0.0:
        return math.inf
    return float(gain[i0] / interference)


def tagged_chord_once(lambda_b: float, window_radius: float, rng) -> tuple[float, float]:
    """Residual chord segments (L1 along +x, L2 along -x) of the origin's cell."""
    bs = sample_ppp_2d(lambda_b, window_radius, rng)
    radius = window_radius
    for _ in range(MAX_EXTENSIONS + 1):
        if bs.shape[0] >= 2:
            d2 = np.sum(bs**2, axis=1)
            i0 = int(np.argmin(d2))
            y0 = bs[i0]
            oth = np.delete(bs, i0, axis=0)
            den = 2.0 * (oth[:, 0] - y0[0])
            num = np.sum(oth**2, axis=1) - d2[i0]
            right, left = den > 0, den < 0
            l1 = float(np.min(num[right] / den[right])) if right.any() else math.inf
            l2 = float(-np.max(num[left] / den[left])) if left.any() else math.inf
            # a station farther than |e| + |e - y0| from the origin cannot cut at e
            reach = max(l1 + math.hypot(l1 - y0[0], y0[1]), l2 + math.hypot(-l2 - y0[0], y0[1]))
            if reach <= radius:
                return l1, l2
        bs = np.vstack([bs, sample_ppp_2d(lambda_b, 2 * radius, rng, inner_radius=radius)])
        radius *= 2
    raise DegenerateWindow("chord not resolved inside the grown window", MAX_EXTENSIONS)


# pooled typical load -------------------------------------------------------

def pooled_typical_loads(cfg: SimConfig, rng) -> tuple[np.ndarray, int]:
    """Loads of every station farther than the guard margin from the window edge.

    Selection is by position only, so it does not favour small cells.  A
    selected cell whose bound disk, doubled, leaves the window may have been
    cut by an unsampled station; the number of such cells is returned.
    """
    p = cfg.params
    W = cfg.window_radius
    bs = sample_ppp_2d(p.lambda_b, W, rng)
    loads = _station_loads(p, cfg.scenario, bs, W, rng)
    centre_dist = np.hypot(bs[:, 0], bs[:, 1])
    chosen = np.flatnonzero(centre_dist <= W - cfg.guard_margin)
    unresolved = 0
    if chosen.size:
        k = min(bs.shape[0], 40)
        _, idx = cKDTree(bs).query(bs[chosen], k=k)
        for row, i in zip(idx, chosen):
            R = sector_radius(bs[i], bs[row[1:]])
            unresolved += int(centre_dist[i] + 2.0 * R > W)
    return loads[chosen], unresolved


# drivers -------------------------------------------------------------------

def _block_ranges(n: int, size: int):
    return [(b, min(size, n - b * size)) for b in range((n + size - 1) // size)]


def _run_block(args):
    cfg, block, count = args
    rng = cfg.rng_seed.generator(block)
    if cfg.mode == "sir":
        return np.array([_sir_once(cfg, rng) for _ in range(count)]), 0
    if cfg.mode == "chord":
        return np.array([tagged_chord_once(cfg.params.lambda_b, cfg.window_radius, rng)
                         for _ in range(count)]), 0
    if cfg.pooled:
        out = [pooled_typical_loads(cfg, rng) for _ in range(count)]
        return np.concatenate([o[0] for o in out]), int(sum(o[1] for o in out))
    fn: Callable = {
        "typical_load": _typical_load_once,
        "tagged_load": _tagged_load_once,
        "palm_count": lambda c, r: _count_once(c, r, True),
        "void": lambda c, r: _count_once(c, r, False),
    }[cfg.mode]
    out = [fn(cfg, rng) for _ in range(count)]
    return np.array([o[0] for o in out], np.int64), int(sum(o[1] for o in out))


def _map_blocks(cfg: SimConfig, blocks):
    jobs = [(cfg, b, n) for b, n in blocks]
    workers = max(1, int(cfg.workers))
    if workers == 1 or len(jobs) == 1:
        return [_run_block(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_block, jobs))


def _histogram(values: np.ndarray) -> np.ndarray:
    return np.bincount(values.astype(np.int64), minlength=1) if values.size else np.zeros(1, np.int64)


def simulate_counts(cfg: SimConfig, reference: DiscretePmf | None = None,
                    early_stop: bool = False) -> EmpiricalDistribution:
    """Histogram of the integer quantity selected by ``cfg.mode``.

    With ``early_stop`` and a ``reference`` PMF, replications are consumed in
    chunks of 10^4 and the run stops once the Bhattacharyya coefficient
    against the reference moves by less than 1e-3 between chunks.
    """
    if cfg.mode in ("sir", "chord"):
        raise ValueError("use simulate_sir / simulate_chords for real-valued samples")
    blocks = _block_ranges(cfg.replications, cfg.block_size)
    per_chunk = max(1, BC_BLOCK // cfg.block_size) if early_stop else len(blocks)
    values, extensions, history = [], 0, []
    for i in range(0, len(blocks), per_chunk):
        for v, e in _map_blocks(cfg, blocks[i:i + per_chunk]):
            values.append(v)
            extensions += e
        if early_stop and reference is not None:
            history.append(bhattacharyya(reference, _histogram(np.concatenate(values))))
            if len(history) >= 2 and abs(history[-1] - history[-2]) < BC_STABLE:
                break
    vals = np.concatenate(values) if values else np.zeros(0, np.int64)
    reps = sum(n for _, n in blocks[:len(values)])
    meta = {"params": cfg.params.to_dict(), "scenario": cfg.scenario, "block_size": cfg.block_size,
            ("unresolved_cells" if cfg.pooled else "window_extensions"): extensions}
    if history:
        meta["bc_history"] = history
    if cfg.mode in ("palm_count", "void"):
        meta["radius"] = cfg.radius
    if cfg.pooled:
        meta["cells"] = int(vals.size)
    return EmpiricalDistribution(_histogram(vals), reps, cfg.seed, cfg.stream_id, cfg.window_radius,
                                 cfg.mode, pooled=cfg.pooled, meta=meta)


def simulate_typical_load(cfg: SimConfig, **kw) -> EmpiricalDistribution:
    return simulate_counts(cfg.replace(mode="typical_load"), **kw)


def simulate_tagged_load(cfg: SimConfig, **kw) -> EmpiricalDistribution:
    return simulate_counts(cfg.replace(mode="tagged_load", pooled=False), **kw)


def simulate_palm_count(cfg: SimConfig) -> EmpiricalDistribution:
    return simulate_counts(cfg.replace(mode="palm_count", pooled=False))


def simulate_void_count(cfg: SimConfig) -> EmpiricalDistribution:
    return simulate_counts(cfg.replace(mode="void", pooled=False))


def simulate_sir(cfg: SimConfig) -> np.ndarray:
    """SIR samples of a typical user at the origin; +inf when nobody interferes."""
    cfg = cfg.replace(mode="sir", pooled=False)
    return np.concatenate([v for v, _ in _map_blocks(cfg, _block_ranges(cfg.replications, cfg.block_size))])


def simulate_chords(cfg: SimConfig) -> np.ndarray:
    """(L1, L2) samples of the origin's cell along the x-axis, shape (n, 2)."""
    cfg = cfg.replace(mode="chord", pooled=False)
    return np.vstack([v for v, _ in _map_blocks(cfg, _block_ranges(cfg.replications, cfg.block_size))])


def coverage_estimate(samples: np.ndarray, tau: float) -> tuple[float, float]:
    """Empirical P(SIR > tau) and its standard error."""
    hit = np.asarray(samples) > tau
    q = float(hit.mean())
    return q, math.sqrt(q * (1 - q) / hit.size)


# comparison statistics -----------------------------------------------------

def _as_masses(x) -> np.ndarray:
    if isinstance(x, DiscretePmf):
        return np.asarray(x.masses, float)
    if isinstance(x, EmpiricalDistribution):
        return x.normalized()
    x = np.asarray(x, float)
    return x / x.sum() if x.sum() > 0 else x


def _aligned(p, q):
    a, b = _as_masses(p), _as_masses(q)
    n = max(a.size, b.size)
    return np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size))


def bhattacharyya(p, q) -> float:
    """sum_k sqrt(p_k q_k) over the union of the supports."""
    a, b = _aligned(p, q)
    return float(min(1.0, np.sum(np.sqrt(a * b))))


def ks_distance(p, q) -> float:
    """Largest gap between the two CDFs."""
    a, b = _aligned(p, q)
    return float(np.max(np.abs(np.cumsum(a) - np.cumsum(b))))


def ks_sample_vs_cdf(samples, cdf: Callable) -> float:
    """One-sample Kolmogorov-Smirnov statistic."""
    x = np.sort(np.asarray(samples, float))
    n = x.size
    F = np.asarray(cdf(x), float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def default_workers() -> int:
    return os.cpu_count() or 1


def summary(dist: EmpiricalDistribution) -> dict[str, Any]:
    return {"mean": dist.mean(), "variance": dist.variance(), "sem": dist.sem(),
            "replications": dist.replications, "cells": dist.total}
