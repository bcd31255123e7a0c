"""Procedural wall-dense worlds and exact box geometry queries.

A world is a list of axis-aligned boxes ("walls").  Walls are grouped into
straight, full-height formations pierced by door-like gaps, so every
generated world is traversable by a vehicle narrower than ``gap_width_min``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SENSING_RANGE = 5.0


@dataclass(frozen=True)
class Wall:
    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]

    def __post_init__(self):
        if any(h <= 0.0 for h in self.half_extents):
            raise ValueError(f"wall half extents must be positive, got {self.half_extents}")

    @property
    def lo(self) -> np.ndarray:
        return np.subtract(self.center, self.half_extents)

    @property
    def hi(self) -> np.ndarray:
        return np.add(self.center, self.half_extents)


@dataclass(frozen=True)
class Gap:
    """Opening in a formation; ``center`` is the middle of the doorway at mid height."""

    center: tuple[float, float, float]
    width: float
    axis: int


@dataclass(frozen=True)
class WorldGenConfig:
    extent: tuple[float, float, float] = (100.0, 100.0, 16.0)
    wall_count: int = 300
    wall_thickness_range: tuple[float, float] = (0.2, 0.5)
    gap_width_min: float = 1.2
    gap_count_per_wall: tuple[int, int] = (1, 3)
    formation_length_range: tuple[float, float] = (6.0, 18.0)
    gap_width_max_factor: float = 1.6
    min_segment_length: float = 0.5
    # clearance kept between formation footprints; None means gap_width_min
    formation_clearance: float | None = None
    max_attempts: int = 4000

    def validate(self) -> None:
        if self.gap_width_min <= 0:
            raise ValueError("gap_width_min must be positive")
        if self.wall_count < 0:
            raise ValueError("wall_count must be non-negative")
        lo, hi = self.gap_count_per_wall
        if lo < 1 or hi < lo:
            raise ValueError(f"bad gap_count_per_wall {self.gap_count_per_wall}")
        tlo, thi = self.wall_thickness_range
        if tlo <= 0 or thi < tlo:
            raise ValueError(f"bad wall_thickness_range {self.wall_thickness_range}")
        if any(e <= 0 for e in self.extent):
            raise ValueError("extent must be positive")


@dataclass
class World:
    extent: tuple[float, float, float]
    walls: list[Wall]
    seed: int = 0
    gaps: list[Gap] = field(default_factory=list)

    def __post_init__(self):
        self._lo = np.array([w.lo for w in self.walls], dtype=float).reshape(-1, 3)
        self._hi = np.array([w.hi for w in self.walls], dtype=float).reshape(-1, 3)
        self._center = 0.5 * (self._lo + self._hi)
        self._half = 0.5 * (self._hi - self._lo)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(3), np.asarray(self.extent, dtype=float)

    @property
    def boxes(self) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) corner arrays of shape (n_walls, 3)."""
        return self._lo, self._hi

    def walls_near(self, point, radius: float) -> np.ndarray:
        """Indices of walls whose box comes within ``radius`` of ``point``."""
        q = np.maximum(np.abs(np.asarray(point, float) - self._center) - self._half, 0.0)
        return np.flatnonzero(np.einsum("ij,ij->i", q, q) <= radius * radius)

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "extent": [float(e) for e in self.extent],
            "walls": [
                {"center": [float(c) for c in w.center],
                 "half_extents": [float(h) for h in w.half_extents]}
                for w in self.walls
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "World":
        walls = [Wall(tuple(w["center"]), tuple(w["half_extents"])) for w in data["walls"]]
        return cls(extent=tuple(data["extent"]), walls=walls, seed=int(data["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "World":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _box_gap(lo_a, hi_a, lo_b, hi_b) -> np.ndarray:
    """Euclidean distance between box a (single) and boxes b (n, 3); 0 when overlapping."""
    sep = np.maximum(np.maximum(lo_b - hi_a, lo_a - hi_b), 0.0)
    return np.sqrt(np.einsum("ij,ij->i", sep, sep))


def _split_solid(rng, solid: float, n: int, min_len: float) -> np.ndarray:
    weights = rng.uniform(0.5, 1.5, size=n)
    return min_len + (solid - n * min_len) * weights / weights.sum()


def generate_world(config: WorldGenConfig, seed: int) -> World:
    """Build a maze of gapped wall formations.

    Each formation is a straight line of full-height segments along x or y.
    A formation with ``n`` segments has ``n - 1`` interior doorways; a
    single-segment formation gets its doorway at one end.  Formation
    footprints (segments plus doorways) keep ``formation_clearance`` from
    each other, so no doorway is ever blocked by a neighbour.

    Raises
    ------
    ValueError
        If the config is invalid or the formations cannot be packed into
        the extent within ``max_attempts`` placements.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    extent = np.asarray(config.extent, dtype=float)
    clearance = config.gap_width_min if config.formation_clearance is None else config.formation_clearance
    height = extent[2]
    gw_lo = config.gap_width_min
    gw_hi = config.gap_width_min * config.gap_width_max_factor
    len_lo, len_hi = config.formation_length_range
    if config.wall_count > 0 and (len_lo + 2 * clearance > extent[:2].max()):
        raise ValueError(f"infeasible packing: formations of length {len_lo} m do not fit extent {tuple(extent)}")

    walls: list[Wall] = []
    gaps: list[Gap] = []
    foot_lo = np.empty((0, 3))
    foot_hi = np.empty((0, 3))
    remaining = config.wall_count
    while remaining > 0:
        n_gaps = int(rng.integers(config.gap_count_per_wall[0], config.gap_count_per_wall[1] + 1))
        n_seg = min(n_gaps + 1, remaining)
        if remaining - n_seg == 1 and n_seg > 2:
            n_seg -= 1  # avoid leaving a lone segment behind when a larger split works
        n_gaps = max(n_seg - 1, 1)

        for _ in range(config.max_attempts):
            axis = int(rng.integers(0, 2))
            thick = rng.uniform(*config.wall_thickness_range)
            gap_w = rng.uniform(gw_lo, gw_hi, size=n_gaps)
            min_total = n_seg * config.min_segment_length + gap_w.sum()
            length = max(rng.uniform(len_lo, len_hi), min_total + 0.5)
            if length > extent[axis] or thick > extent[1 - axis]:
                continue
            start = rng.uniform(0.0, extent[axis] - length)
            across = rng.uniform(thick / 2, extent[1 - axis] - thick / 2)
            lo = np.zeros(3)
            hi = np.full(3, height)
            lo[axis], hi[axis] = start, start + length
            lo[1 - axis], hi[1 - axis] = across - thick / 2, across + thick / 2
            if len(foot_lo) and _box_gap(lo, hi, foot_lo, foot_hi).min() < clearance:
                continue
            break
        else:
            raise ValueError(
                f"infeasible packing: could not place formation {len(gaps)} after {config.max_attempts} attempts"
            )

        foot_lo = np.vstack([foot_lo, lo])
        foot_hi = np.vstack([foot_hi, hi])
        if n_seg == 1:
            seg = np.array([length - gap_w[0]])
            end_gap_first = bool(rng.integers(0, 2))
            cursor = start + (gap_w[0] if end_gap_first else 0.0)
            g0 = start + gap_w[0] / 2 if end_gap_first else start + length - gap_w[0] / 2
            gap_mids = [g0]
        else:
            seg = _split_solid(rng, length - gap_w.sum(), n_seg, config.min_segment_length)
            cursor = start
            gap_mids = []
        for i, seg_len in enumerate(seg):
            c = np.empty(3)
            h = np.empty(3)
            c[axis], h[axis] = cursor + seg_len / 2, seg_len / 2
            c[1 - axis], h[1 - axis] = across, thick / 2
            c[2], h[2] = height / 2, height / 2
            walls.append(Wall(tuple(float(x) for x in c), tuple(float(x) for x in h)))
            cursor += seg_len
            if n_seg > 1 and i < n_seg - 1:
                gap_mids.append(cursor + gap_w[i] / 2)
                cursor += gap_w[i]
        for g, width in zip(gap_mids, gap_w):
            gc = np.empty(3)
            gc[axis], gc[1 - axis], gc[2] = g, across, height / 2
            gaps.append(Gap(tuple(float(x) for x in gc), float(width), axis))
        remaining -= n_seg

    return World(extent=tuple(float(e) for e in extent), walls=walls, seed=int(seed), gaps=gaps)


def box_signed_distance(points, lo, hi) -> np.ndarray:
    """Signed distance from points (n, 3) to each box; result shape (n, n_boxes)."""
    p = np.asarray(points, dtype=float)[:, None, :]
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    q = np.abs(p - c) - h
    outside = np.sqrt(np.sum(np.maximum(q, 0.0) ** 2, axis=-1))
    inside = np.minimum(q.max(axis=-1), 0.0)
    return outside + inside


def signed_distance(world: World, point, sentinel: float = SENSING_RANGE):
    """Distance to the nearest wall surface, negative inside a wall.

    Accepts a single point (3,) or a batch (n, 3).  An empty world
    returns ``sentinel`` so that downstream metrics stay finite.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    if not world.walls:
        d = np.full(len(pts), float(sentinel))
    else:
        lo, hi = world.boxes
        d = box_signed_distance(pts, lo, hi).min(axis=1)
    return float(d[0]) if single else d


def slab_intersect(origins, directions, lo, hi, t_max):
    """Entry parameter of rays against boxes via the slab method.

    ``origins``/``directions`` are (n, 3); ``lo``/``hi`` are (m, 3).  Returns
    an (n,) array holding the smallest entry ``t`` in (0, t_max] over all
    boxes, or ``inf`` where nothing is hit.  Directions need not be unit
    length; ``t`` is measured in multiples of the direction vector.
    """
    o = np.asarray(origins, dtype=float)[:, None, :]
    d = np.asarray(directions, dtype=float)[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (lo[None] - o) * inv
        t2 = (hi[None] - o) * inv
    # parallel ray components: inside the slab gives (-inf, inf), outside gives empty
    par = d == 0.0
    inside = (o >= lo[None]) & (o <= hi[None])
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    t_enter = tmin.max(axis=-1)
    t_exit = tmax.min(axis=-1)
    hit = (t_enter <= t_exit) & (t_enter > 0.0) & (t_enter <= t_max)
    t = np.where(hit, t_enter, np.inf)
    return t.min(axis=1) if t.shape[1] else np.full(len(o), np.inf)


def ray_hit(world: World, origin, direction, t_max: float) -> float | None:
    """First entry distance of a unit-direction ray into any wall, or ``None``."""
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("ray direction must be unit length")
    if not world.walls:
        return None
    lo, hi = world.boxes
    t = slab_intersect(np.asarray(origin, float)[None], direction[None], lo, hi, t_max)[0]
    return None if np.isinf(t) else float(t)


def sample_free_point(world: World, rng, clearance: float, z_range=(1.0, 3.0), margin: float = 2.0,
                      max_tries: int = 10000) -> np.ndarray:
    """Uniform point in the world's horizontal extent with at least ``clearance`` to every wall."""
    ext = np.asarray(world.extent, dtype=float)
    for _ in range(max_tries):
        p = np.array([rng.uniform(margin, ext[0] - margin),
                      rng.uniform(margin, ext[1] - margin),
                      rng.uniform(*z_range)])
        if signed_distance(world, p) >= clearance:
            return p
    raise RuntimeError("could not find a free point; world too dense")
