"""Exact samplers for the road, platoon and base-station processes.

Lines are stored in Hesse form (rho, phi) with phi in [0, pi); the point at
scalar position x on the line is

    f(x) = (rho cos phi + x sin phi, rho sin phi - x cos phi).

The line process has intensity lambda_L d rho d phi on R x [0, pi), so the
number of lines hitting a disk of radius R is Poisson(2 pi R lambda_L) and
the vehicle density is m lambda_P lambda_L pi.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .kernels import NetworkParams


@dataclass(frozen=True)
class RngSeed:
    """Root seed plus stream id; ``generator(block)`` gives an independent substream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"{name} must be a 64-bit unsigned integer")

    def generator(self, block: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), int(block)))
        return np.random.Generator(np.random.PCG64(ss))

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "stream_id": int(self.stream_id)}


@dataclass(frozen=True)
class LineAtom:
    rho: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.phi < np.pi:
            raise ValueError("phi must lie in [0, pi)")

    @property
    def normal(self) -> np.ndarray:
        return np.array([np.cos(self.phi), np.sin(self.phi)])

    @property
    def direction(self) -> np.ndarray:
        return np.array([np.sin(self.phi), -np.cos(self.phi)])

    def point(self, x) -> np.ndarray:
        """f(x) for scalar positions x; returns shape (n, 2)."""
        x = np.atleast_1d(np.asarray(x, float))
        return self.rho * self.normal[None, :] + x[:, None] * self.direction[None, :]

    def chord(self, center, radius: float) -> tuple[float, float] | None:
        """Scalar interval of the line inside the disk, or None if it misses."""
        c = np.asarray(center, float)
        dist = float(c @ self.normal) - self.rho
        if abs(dist) > radius:
            return None
        h = float(np.sqrt(radius * radius - dist * dist))
        mid = float(c @ self.direction)
        return mid - h, mid + h

    def distance(self, xy) -> np.ndarray:
        return np.abs(np.asarray(xy, float) @ self.normal - self.rho)


@dataclass(eq=False)
class VehicleRealization:
    """Vehicles with their line and platoon labels.

    ``platoon_id`` is -1 for vehicles of a non-clustered (PPP) road, and
    ``centers[i]`` holds the scalar parent positions of line i.  When
    ``typical`` is set, row 0 is the typical vehicle at the origin and it is
    not counted in any platoon.
    """

    lines: list[LineAtom]
    line_id: np.ndarray
    platoon_id: np.ndarray
    positions: np.ndarray
    xy: np.ndarray
    centers: list[np.ndarray] = field(default_factory=list)
    typical: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.xy.shape[0])

    def others(self) -> np.ndarray:
        """Coordinates excluding the typical vehicle."""
        return self.xy[1:] if self.typical else self.xy

    def count_in_disk(self, radius: float, center=(0.0, 0.0), exclude_typical: bool = True) -> int:
        pts = self.others() if exclude_typical else self.xy
        d2 = np.sum((pts - np.asarray(center, float)) ** 2, axis=1)
        return int(np.count_nonzero(d2 <= radius * radius))

    def to_csv(self, path: str | Path) -> None:
        head = "# " + json.dumps({k: v for k, v in self.meta.items()}, sort_keys=True, default=str)
        rows = [head, "line_id,platoon_id,x_km,y_km"]
        rows += [f"{li},{pi},{x:.17g},{y:.17g}"
                 for li, pi, (x, y) in zip(self.line_id, self.platoon_id, self.xy)]
        Path(path).write_text("\n".join(rows) + "\n")

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "typical": self.typical,
            "lines": [{"rho": ln.rho, "phi": ln.phi} for ln in self.lines],
            "line_id": self.line_id.tolist(),
            "platoon_id": self.platoon_id.tolist(),
            "positions": self.positions.tolist(),
            "xy": self.xy.tolist(),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        if path is not None:
            Path(path).write_text(text)
        return text


def sample_ppp_2d(density: float, window_radius: float, rng: np.random.Generator,
                  center=(0.0, 0.0), inner_radius: float = 0.0) -> np.ndarray:
    """Homogeneous PPP in the disk (or annulus, for ``inner_radius`` > 0)."""
    if density < 0 or window_radius < inner_radius:
        raise ValueError("need density >= 0 and window_radius >= inner_radius")
    area = np.pi * (window_radius**2 - inner_radius**2)
    n = rng.poisson(density * area)
    r = np.sqrt(rng.uniform(inner_radius**2, window_radius**2, n))
    th = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)]) + np.asarray(center, float)


def sample_plp(lambda_L: float, window_radius: float, rng: np.random.Generator,
               center=(0.0, 0.0)) -> list[LineAtom]:
    """Lines hitting the disk: Poisson(2 pi R lambda_L) of them, phi uniform,
    signed offset from the center uniform on [-R, R]."""
    if lambda_L < 0:
        raise ValueError("lambda_L must be non-negative")
    n = rng.poisson(2.0 * np.pi * window_radius * lambda_L)
    phi = rng.uniform(0.0, np.pi, n)
    off = rng.uniform(-window_radius, window_radius, n)
    c = np.asarray(center, float)
    rho = c[0] * np.cos(phi) + c[1] * np.sin(phi) - off
    return [LineAtom(float(r), float(f)) for r, f in zip(rho, phi)]


def sample_ppp_1d(density: float, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    n = rng.poisson(density * max(hi - lo, 0.0))
    return np.sort(rng.uniform(lo, hi, n))


def sample_mcp_1d(p: NetworkParams, interval, rng: np.random.Generator,
                  thinned: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matern cluster points of one road restricted to ``interval`` = (lo, hi).

    Parents are drawn on the interval widened by a on each side, which is
    exactly the set of parents that can reach it.  With ``thinned`` each
    parent directly receives Poisson(m |overlap| / 2a) daughters uniform on
    its overlap with the interval (the same law as drawing Poisson(m)
    daughters on [x - a, x + a] and discarding those outside); otherwise the
    literal construction is used.  A bare number is read as the half-length
    of a centred interval.  Returns (positions, parent index, parents).
    """
    if np.isscalar(interval):
        lo, hi = -float(interval), float(interval)
    else:
        lo, hi = map(float, interval)
    a = p.a
    parents = sample_ppp_1d(p.lambda_P, lo - a, hi + a, rng)
    if parents.size == 0 or p.m == 0:
        return np.empty(0), np.empty(0, dtype=np.int64), parents
    if thinned:
        left = np.maximum(parents - a, lo)
        right = np.minimum(parents + a, hi)
        width = np.clip(right - left, 0.0, None)
        k = rng.poisson(p.m * width / (2.0 * a))
        ids = np.repeat(np.arange(parents.size), k)
        pos = left[ids] + width[ids] * rng.random(ids.size)
    else:
        k = rng.poisson(p.m, parents.size)
        ids = np.repeat(np.arange(parents.size), k)
        pos = parents[ids] + rng.uniform(-a, a, ids.size)
        keep = (pos >= lo) & (pos <= hi)
        ids, pos = ids[keep], pos[keep]
    return pos, ids.astype(np.int64), parents


def _assemble(lines, per_line, meta, typical=False, centers=None) -> VehicleRealization:
    line_ids, plat_ids, pos, xy = [], [], [], []
    if typical:
        line_ids.append(np.array([-1]))
        plat_ids.append(np.array([-1]))
        pos.append(np.zeros(1))
        xy.append(np.zeros((1, 2)))
    for i, (ln, (x, pid)) in enumerate(zip(lines, per_line)):
        if x.size == 0:
            continue
        line_ids.append(np.full(x.size, i))
        plat_ids.append(pid)
        pos.append(x)
        xy.append(ln.point(x))
    if xy:
        out = (np.concatenate(line_ids).astype(np.int64), np.concatenate(plat_ids).astype(np.int64),
               np.concatenate(pos), np.concatenate(xy))
    else:
        out = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), np.empty((0, 2)))
    return VehicleRealization(list(lines), *out, centers=centers or [], typical=typical, meta=meta)


def _road_points(lines, p, center, radius, rng, scenario, thinned=True, id_offset=None):
    per_line, centers = [], []
    for ln in lines:
        ch = ln.chord(center, radius)
        if ch is None:
            per_line.append((np.empty(0), np.empty(0, np.int64)))
            centers.append(np.empty(0))
            continue
        if scenario == "PTS":
            x, ids, par = sample_mcp_1d(p, ch, rng, thinned)
            centers.append(par)
        else:
            x = sample_ppp_1d(p.npts_density, ch[0], ch[1], rng)
            ids = np.full(x.size, -1, dtype=np.int64)
            centers.append(np.empty(0))
        per_line.append((x, ids))
    return per_line, centers


def _window_meta(p, radius, center, scenario):
    return {"params": p.to_dict(), "window_radius": radius, "center": list(map(float, center)),
            "scenario": scenario}


def sample_plp_mcp(p: NetworkParams, window_radius: float, rng: np.random.Generator,
                   center=(0.0, 0.0), thinned: bool = True) -> VehicleRealization:
    """Platooned traffic inside the disk: an independent MCP on every road."""
    lines = sample_plp(p.lambda_L, window_radius, rng, center)
    per_line, centers = _road_points(lines, p, center, window_radius, rng, "PTS", thinned)
    return _assemble(lines, per_line, _window_meta(p, window_radius, center, "PTS"), centers=centers)


def sample_plp_ppp(lambda_L: float, lambda_npts: float, window_radius: float,
                   rng: np.random.Generator, center=(0.0, 0.0)) -> VehicleRealization:
    """Non-platooned traffic: a 1D PPP of density ``lambda_npts`` on every road."""
    p = NetworkParams(lambda_L=lambda_L, lambda_npts=lambda_npts)
    lines = sample_plp(lambda_L, window_radius, rng, center)
    per_line, centers = _road_points(lines, p, center, window_radius, rng, "NPTS")
    return _assemble(lines, per_line, _window_meta(p, window_radius, center, "NPTS"), centers=centers)


def _tagged_road(p, phi, center, radius, rng, scenario, thinned=True):
    """Points of the road through the origin, Palm version, excluding the origin."""
    ln = LineAtom(0.0, float(phi))
    ch = ln.chord(center, radius)
    if ch is None:
        return ln, np.empty(0), np.empty(0, np.int64), np.empty(0)
    if scenario == "PTS":
        x, ids, par = sample_mcp_1d(p, ch, rng, thinned)
        # the typical vehicle's own platoon: parent uniform within a of the
        # origin, Poisson(m) further members
        xo = rng.uniform(-p.a, p.a)
        lo, hi = max(xo - p.a, ch[0]), min(xo + p.a, ch[1])
        w = max(hi - lo, 0.0)
        k = rng.poisson(p.m * w / (2.0 * p.a))
        extra = lo + w * rng.random(k)
        x = np.concatenate([x, extra])
        ids = np.concatenate([ids, np.full(k, par.size, dtype=np.int64)])
        par = np.append(par, xo)
        return ln, x, ids, par
    x = sample_ppp_1d(p.npts_density, ch[0], ch[1], rng)
    return ln, x, np.full(x.size, -1, dtype=np.int64), np.empty(0)


def _palm(p, window_radius, rng, center, scenario, thinned=True) -> VehicleRealization:
    lines = sample_plp(p.lambda_L, window_radius, rng, center)
    per_line, centers = _road_points(lines, p, center, window_radius, rng, scenario, thinned)
    phi = rng.uniform(0.0, np.pi)
    ln, x, ids, par = _tagged_road(p, phi, center, window_radius, rng, scenario, thinned)
    meta = _window_meta(p, window_radius, center, scenario)
    meta["tagged_phi"] = float(phi)
    real = _assemble([*lines, ln], [*per_line, (x, ids)], meta, typical=True, centers=[*centers, par])
    return real


def sample_palm_plp_mcp(p: NetworkParams, window_radius: float, rng: np.random.Generator,
                        center=(0.0, 0.0), thinned: bool = True) -> VehicleRealization:
    """Traffic seen from a typical vehicle at the origin.

    Superposes an independent copy of the process, an MCP on a road through
    the origin with uniform orientation, and the typical vehicle's own
    platoon.  The last line of ``lines`` is that tagged road; row 0 of the
    realization is the typical vehicle.
    """
    return _palm(p, window_radius, rng, center, "PTS", thinned)


def sample_palm_plp_ppp(p: NetworkParams, window_radius: float, rng: np.random.Generator,
                        center=(0.0, 0.0)) -> VehicleRealization:
    return _palm(p, window_radius, rng, center, "NPTS")


def sample_traffic(p: NetworkParams, window_radius: float, rng: np.random.Generator,
                   scenario: str = "PTS", palm: bool = False, center=(0.0, 0.0)) -> VehicleRealization:
    if scenario not in ("PTS", "NPTS"):
        raise ValueError("scenario must be 'PTS' or 'NPTS'")
    if palm:
        return _palm(p, window_radius, rng, center, scenario)
    if scenario == "PTS":
        return sample_plp_mcp(p, window_radius, rng, center)
    return sample_plp_ppp(p.lambda_L, p.npts_density, window_radius, rng, center)


def _segments_mcp(p: NetworkParams, lo, hi, rng) -> tuple[np.ndarray, np.ndarray]:
    """Thinned MCP on many intervals at once; returns (segment index, position)."""
    a = p.a
    n_par = rng.poisson(p.lambda_P * (hi - lo + 2.0 * a))
    seg = np.repeat(np.arange(lo.size), n_par)
    par = lo[seg] - a + (hi - lo + 2.0 * a)[seg] * rng.random(seg.size)
    left = np.maximum(par - a, lo[seg])
    width = np.clip(np.minimum(par + a, hi[seg]) - left, 0.0, None)
    k = rng.poisson(p.m * width / (2.0 * a))
    ids = np.repeat(np.arange(par.size), k)
    return seg[ids], left[ids] + width[ids] * rng.random(ids.size)


def _segments_ppp(lam: float, lo, hi, rng) -> tuple[np.ndarray, np.ndarray]:
    n = rng.poisson(lam * (hi - lo))
    seg = np.repeat(np.arange(lo.size), n)
    return seg, lo[seg] + (hi - lo)[seg] * rng.random(seg.size)


def sample_traffic_xy(p: NetworkParams, window_radius: float, rng: np.random.Generator,
                      scenario: str = "PTS", palm: bool = False, center=(0.0, 0.0)) -> np.ndarray:
    """Vehicle coordinates only, vectorized over roads; same law as ``sample_traffic``.

    Under ``palm`` the typical vehicle at the origin is not included.
    """
    c = np.asarray(center, float)
    R = float(window_radius)
    n = rng.poisson(2.0 * np.pi * R * p.lambda_L)
    phi = rng.uniform(0.0, np.pi, n)
    off = rng.uniform(-R, R, n)
    if palm:
        phi = np.append(phi, rng.uniform(0.0, np.pi))
        cos, sin = np.cos(phi), np.sin(phi)
        off = np.append(off, c[0] * cos[-1] + c[1] * sin[-1])
    else:
        cos, sin = np.cos(phi), np.sin(phi)
    rho = c[0] * cos + c[1] * sin - off
    h = np.sqrt(np.clip(R * R - off * off, 0.0, None))
    mid = c[0] * sin - c[1] * cos
    lo, hi = mid - h, mid + h
    if scenario == "PTS":
        seg, x = _segments_mcp(p, lo, hi, rng)
        if palm and h[-1] > 0:
            xo = rng.uniform(-p.a, p.a)
            left = max(xo - p.a, lo[-1])
            w = max(min(xo + p.a, hi[-1]) - left, 0.0)
            k = rng.poisson(p.m * w / (2.0 * p.a))
            seg = np.concatenate([seg, np.full(k, rho.size - 1)])
            x = np.concatenate([x, left + w * rng.random(k)])
    else:
        seg, x = _segments_ppp(p.npts_density, lo, hi, rng)
    return np.column_stack([rho[seg] * cos[seg] + x * sin[seg], rho[seg] * sin[seg] - x * cos[seg]])
