"""Occupancy grids, Euclidean distance fields, lidar raycasting, and scan fusion.

Grids are immutable value objects; every operation returns a new grid.
World coordinates are meters, cell (0, 0) sits at the grid origin corner and
row 0 is the minimum-y row.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import OutOfBoundsError, ParseError, ValidationError

# Stand-in for +inf when a field value has to be written to a text output.
INF_SENTINEL_M = 1.0e9


class CellState(enum.IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


_CHAR_OF = {CellState.FREE: ".", CellState.OCCUPIED: "#", CellState.UNKNOWN: "?"}
_STATE_OF = {v: k for k, v in _CHAR_OF.items()}


class UnknownAs(enum.Enum):
    """How a distance transform treats Unknown cells."""

    FREE = "free"
    OCCUPIED = "occupied"


@dataclass(frozen=True)
class OccupancyGrid:
    width: int
    height: int
    resolution: float
    origin: tuple[float, float]
    cells: np.ndarray  # (height, width) uint8 of CellState values

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("grid must be at least 1x1")
        if not self.resolution > 0:
            raise ValidationError("grid resolution must be positive")
        arr = np.asarray(self.cells, dtype=np.uint8)
        if arr.shape != (self.height, self.width):
            raise ValidationError(
                f"cells shape {arr.shape} does not match ({self.height}, {self.width})"
            )
        if arr.max(initial=0) > 2:
            raise ValidationError("cell values must be 0 (free), 1 (occupied) or 2 (unknown)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)

    @classmethod
    def full_free(cls, width, height, resolution, origin=(0.0, 0.0)):
        return cls(width, height, resolution, origin,
                   np.zeros((height, width), dtype=np.uint8))

    @property
    def size_x(self) -> float:
        return self.width * self.resolution

    @property
    def size_y(self) -> float:
        return self.height * self.resolution

    def contains(self, x: float, y: float) -> bool:
        ox, oy = self.origin
        return ox <= x < ox + self.size_x and oy <= y < oy + self.size_y

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        """Cell (ix, iy) containing the world point; raises if outside."""
        if not self.contains(x, y):
            raise OutOfBoundsError(f"point ({x:.3f}, {y:.3f}) outside grid")
        ox, oy = self.origin
        ix = int(math.floor((x - ox) / self.resolution))
        iy = int(math.floor((y - oy) / self.resolution))
        return min(ix, self.width - 1), min(iy, self.height - 1)

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + (ix + 0.5) * self.resolution, oy + (iy + 0.5) * self.resolution)

    def with_cells(self, cells: np.ndarray) -> "OccupancyGrid":
        return OccupancyGrid(self.width, self.height, self.resolution, self.origin, cells)

    def state_at(self, x: float, y: float) -> CellState:
        ix, iy = self.cell_index(x, y)
        return CellState(int(self.cells[iy, ix]))

    def count(self, state: CellState) -> int:
        return int((self.cells == state).sum())


@dataclass(frozen=True)
class DistanceField:
    """Per-cell distance (meters) to the nearest occupied cell center."""

    width: int
    height: int
    resolution: float
    origin: tuple[float, float]
    values: np.ndarray  # (height, width) float64; +inf if the grid has no obstacle

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise ValidationError("distance field shape mismatch")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_all_finite", bool(np.isfinite(vals).all()))

    @property
    def size_x(self) -> float:
        return self.width * self.resolution

    @property
    def size_y(self) -> float:
        return self.height * self.resolution

    def contains(self, x: float, y: float) -> bool:
        ox, oy = self.origin
        return ox <= x < ox + self.size_x and oy <= y < oy + self.size_y


@dataclass(frozen=True)
class ScanSpec:
    """Planar lidar model: 270 degree fan, 0.25 degree steps, 0.1-30 m."""

    angle_min: float = -0.75 * math.pi
    angle_max: float = 0.75 * math.pi
    angle_increment: float = math.radians(0.25)
    range_min: float = 0.1
    range_max: float = 30.0

    def __post_init__(self):
        if self.angle_max <= self.angle_min:
            raise ValidationError("angle_max must exceed angle_min")
        if self.angle_increment <= 0:
            raise ValidationError("angle_increment must be positive")
        if not (0 <= self.range_min < self.range_max):
            raise ValidationError("need 0 <= range_min < range_max")


def beam_count(spec: ScanSpec) -> int:
    span = (spec.angle_max - spec.angle_min) / spec.angle_increment
    return int(math.floor(span + 1e-9)) + 1


@dataclass(frozen=True)
class LaserScan:
    angle_min: float
    angle_max: float
    angle_increment: float
    range_min: float
    range_max: float
    ranges: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranges, dtype=np.float64)
        expected = beam_count(ScanSpec(self.angle_min, self.angle_max,
                                       self.angle_increment, self.range_min, self.range_max))
        if r.shape != (expected,):
            raise ValidationError(f"expected {expected} ranges, got {r.shape}")
        finite = r[np.isfinite(r)]
        if finite.size and (finite.min() < self.range_min - 1e-9
                            or finite.max() > self.range_max + 1e-9):
            raise ValidationError("scan ranges outside [range_min, range_max]")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "ranges", r)

    def angles(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(len(self.ranges))


# ---------------------------------------------------------------------------
# distance transform + interpolation


def distance_transform(grid: OccupancyGrid, unknown_as: UnknownAs = UnknownAs.FREE) -> DistanceField:
    """Exact Euclidean distance (m) from every cell center to the nearest
    occupied cell center.  Grids without any obstacle yield +inf everywhere."""
    occ = grid.cells == CellState.OCCUPIED
    if unknown_as is UnknownAs.OCCUPIED:
        occ = occ | (grid.cells == CellState.UNKNOWN)
    if not occ.any():
        values = np.full((grid.height, grid.width), np.inf)
    else:
        values = ndimage.distance_transform_edt(~occ, sampling=grid.resolution)
    return DistanceField(grid.width, grid.height, grid.resolution, grid.origin, values)


def signed_distance_field(grid: OccupancyGrid,
                          unknown_as: UnknownAs = UnknownAs.FREE) -> DistanceField:
    """Signed variant for gradient-based planners: positive clearance outside
    obstacles, negative penetration depth inside, so the gradient keeps
    pointing out of occupied regions."""
    occ = grid.cells == CellState.OCCUPIED
    if unknown_as is UnknownAs.OCCUPIED:
        occ = occ | (grid.cells == CellState.UNKNOWN)
    if not occ.any():
        values = np.full((grid.height, grid.width), np.inf)
    elif occ.all():
        values = np.full((grid.height, grid.width), -np.inf)
    else:
        values = ndimage.distance_transform_edt(~occ, sampling=grid.resolution) \
            - ndimage.distance_transform_edt(occ, sampling=grid.resolution)
    return DistanceField(grid.width, grid.height, grid.resolution, grid.origin, values)


def _catmull_rom_weights(s: np.ndarray):
    s2 = s * s
    s3 = s2 * s
    return (
        -0.5 * s3 + s2 - 0.5 * s,
        1.5 * s3 - 2.5 * s2 + 1.0,
        -1.5 * s3 + 2.0 * s2 + 0.5 * s,
        0.5 * s3 - 0.5 * s2,
    )


def _catmull_rom_dweights(s: np.ndarray):
    s2 = s * s
    return (
        -1.5 * s2 + 2.0 * s - 0.5,
        4.5 * s2 - 5.0 * s,
        -4.5 * s2 + 4.0 * s + 0.5,
        1.5 * s2 - 1.0 * s,
    )


def sample_field(field: DistanceField, xs, ys, *, clamp=False,
                 with_gradient=False, floor=True):
    """Catmull-Rom interpolation of field values at world points (vectorized).

    The 4x4 stencil is edge-clamped, which keeps the interpolant continuous
    across the whole grid; values are clamped below at zero unless
    ``floor=False`` (signed fields).  With ``clamp=True`` out-of-grid queries
    are snapped to the boundary instead of being the caller's responsibility.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ox, oy = field.origin
    res = field.resolution
    w, h = field.width, field.height

    u_raw = (xs - ox) / res - 0.5
    v_raw = (ys - oy) / res - 0.5
    u = np.clip(u_raw, 0.0, w - 1.0)
    v = np.clip(v_raw, 0.0, h - 1.0)
    i0 = np.floor(u).astype(np.int64)
    j0 = np.floor(v).astype(np.int64)
    fu = u - i0
    fv = v - j0

    vals = field.values
    if not field._all_finite:
        vals = np.where(np.isfinite(vals), vals,
                        np.where(vals > 0, INF_SENTINEL_M, -INF_SENTINEL_M))

    wu = _catmull_rom_weights(fu)
    wv = _catmull_rom_weights(fv)
    cols = [np.clip(i0 + k - 1, 0, w - 1) for k in range(4)]
    rows = [np.clip(j0 + k - 1, 0, h - 1) for k in range(4)]

    value = np.zeros_like(u)
    row_vals = []
    for j in range(4):
        acc = np.zeros_like(u)
        for i in range(4):
            acc += wu[i] * vals[rows[j], cols[i]]
        row_vals.append(acc)
        value += wv[j] * acc
    raw = value
    if floor:
        value = np.maximum(raw, 0.0)

    if not with_gradient:
        return value

    dwu = _catmull_rom_dweights(fu)
    dwv = _catmull_rom_dweights(fv)
    dvalue_du = np.zeros_like(u)
    dvalue_dv = np.zeros_like(u)
    for j in range(4):
        acc_du = np.zeros_like(u)
        for i in range(4):
            acc_du += dwu[i] * vals[rows[j], cols[i]]
        dvalue_du += wv[j] * acc_du
        dvalue_dv += dwv[j] * row_vals[j]
    gx = dvalue_du / res
    gy = dvalue_dv / res
    # Gradient vanishes where the coordinate was clamped or the value floored.
    inside_x = (u_raw > 0.0) & (u_raw < w - 1.0)
    inside_y = (v_raw > 0.0) & (v_raw < h - 1.0)
    live = (raw > 0.0) if floor else np.ones_like(raw, dtype=bool)
    gx = np.where(inside_x & live, gx, 0.0)
    gy = np.where(inside_y & live, gy, 0.0)
    return value, gx, gy


def distance_at(field: DistanceField, x: float, y: float) -> float:
    """Interpolated clearance at a world point; raises outside the grid."""
    if not field.contains(x, y):
        raise OutOfBoundsError(f"query ({x:.3f}, {y:.3f}) outside distance field")
    return float(sample_field(field, x, y))


def distance_at_clamped(field: DistanceField, x: float, y: float) -> float:
    """Like distance_at but snaps out-of-grid queries to the boundary."""
    return float(sample_field(field, x, y, clamp=True))


# ---------------------------------------------------------------------------
# raycasting and scan integration


def _dda_setup(grid: OccupancyGrid, px, py, dx, dy):
    """Per-beam traversal state for exact cell-crossing marching."""
    ox, oy = grid.origin
    res = grid.resolution
    ix = np.floor((px - ox) / res).astype(np.int64)
    iy = np.floor((py - oy) / res).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tdx = np.where(dx != 0.0, res / np.abs(dx), np.inf)
        tdy = np.where(dy != 0.0, res / np.abs(dy), np.inf)
        bx = ox + np.where(dx > 0, ix + 1, ix) * res
        by = oy + np.where(dy > 0, iy + 1, iy) * res
        tmx = np.where(dx != 0.0, (bx - px) / dx, np.inf)
        tmy = np.where(dy != 0.0, (by - py) / dy, np.inf)
    tmx = np.where(np.isnan(tmx), np.inf, tmx)
    tmy = np.where(np.isnan(tmy), np.inf, tmy)
    sx = np.sign(dx).astype(np.int64)
    sy = np.sign(dy).astype(np.int64)
    return ix, iy, tmx, tmy, tdx, tdy, sx, sy


def raycast(world: OccupancyGrid, pose, spec: ScanSpec = ScanSpec()) -> LaserScan:
    """Simulate one lidar scan from pose (x, y, theta) against the grid.

    Beams march cell crossings exactly; the entry distance into the first
    occupied cell is the hit range.  Unknown cells do not block beams.  Beams
    that exit the grid or exceed range_max report the max-range sentinel.
    """
    x, y, theta = pose
    if not world.contains(x, y):
        raise OutOfBoundsError("raycast pose outside grid")
    n = beam_count(spec)
    ang = theta + spec.angle_min + spec.angle_increment * np.arange(n)
    dx = np.cos(ang)
    dy = np.sin(ang)
    px = x + spec.range_min * dx
    py = y + spec.range_min * dy

    ranges = np.full(n, spec.range_max, dtype=np.float64)
    budget = spec.range_max - spec.range_min

    ix, iy, tmx, tmy, tdx, tdy, sx, sy = _dda_setup(world, px, py, dx, dy)
    t_entry = np.zeros(n)
    active = (ix >= 0) & (ix < world.width) & (iy >= 0) & (iy < world.height)
    cells = world.cells
    occupied = CellState.OCCUPIED

    while active.any():
        idx = np.nonzero(active)[0]
        hit = cells[iy[idx], ix[idx]] == occupied
        if hit.any():
            hidx = idx[hit]
            ranges[hidx] = spec.range_min + t_entry[hidx]
            active[hidx] = False
            idx = idx[~hit]
            if idx.size == 0:
                continue
        step_x = tmx[idx] <= tmy[idx]
        xs_i = idx[step_x]
        ys_i = idx[~step_x]
        t_entry[xs_i] = tmx[xs_i]
        ix[xs_i] += sx[xs_i]
        tmx[xs_i] += tdx[xs_i]
        t_entry[ys_i] = tmy[ys_i]
        iy[ys_i] += sy[ys_i]
        tmy[ys_i] += tdy[ys_i]
        dead = (t_entry[idx] >= budget) | (ix[idx] < 0) | (ix[idx] >= world.width) \
            | (iy[idx] < 0) | (iy[idx] >= world.height)
        active[idx[dead]] = False

    return LaserScan(spec.angle_min, spec.angle_max, spec.angle_increment,
                     spec.range_min, spec.range_max, ranges)


def integrate_scan(known: OccupancyGrid, pose, scan: LaserScan) -> OccupancyGrid:
    """Fuse a scan into the map: carve traversed cells Free, mark hit cells
    Occupied.  Cells already Occupied in `known` are never demoted."""
    x, y, theta = pose
    res = known.resolution
    eps = res * 1e-6
    n = len(scan.ranges)
    ang = theta + scan.angles()
    dx = np.cos(ang)
    dy = np.sin(ang)
    px = x + scan.range_min * dx
    py = y + scan.range_min * dy

    r = np.asarray(scan.ranges)
    has_hit = r < scan.range_max - 1e-9
    t_lim = np.minimum(r, scan.range_max) - scan.range_min

    ix, iy, tmx, tmy, tdx, tdy, sx, sy = _dda_setup(known, px, py, dx, dy)
    t_entry = np.zeros(n)
    active = (ix >= 0) & (ix < known.width) & (iy >= 0) & (iy < known.height)
    active &= t_lim > eps

    carve = np.zeros((known.height, known.width), dtype=bool)
    while active.any():
        idx = np.nonzero(active)[0]
        carve[iy[idx], ix[idx]] = True
        step_x = tmx[idx] <= tmy[idx]
        xs_i = idx[step_x]
        ys_i = idx[~step_x]
        t_entry[xs_i] = tmx[xs_i]
        ix[xs_i] += sx[xs_i]
        tmx[xs_i] += tdx[xs_i]
        t_entry[ys_i] = tmy[ys_i]
        iy[ys_i] += sy[ys_i]
        tmy[ys_i] += tdy[ys_i]
        dead = (t_entry[idx] >= t_lim[idx] - eps) | (ix[idx] < 0) | (ix[idx] >= known.width) \
            | (iy[idx] < 0) | (iy[idx] >= known.height)
        active[idx[dead]] = False

    new = np.array(known.cells)
    new[carve & (new != CellState.OCCUPIED)] = CellState.FREE

    if has_hit.any():
        # Endpoint cell: nudge past the entry crossing so floor() lands inside.
        ex = x + (r[has_hit] + eps) * dx[has_hit]
        ey = y + (r[has_hit] + eps) * dy[has_hit]
        exi = np.floor((ex - known.origin[0]) / res).astype(np.int64)
        eyi = np.floor((ey - known.origin[1]) / res).astype(np.int64)
        ok = (exi >= 0) & (exi < known.width) & (eyi >= 0) & (eyi < known.height)
        new[eyi[ok], exi[ok]] = CellState.OCCUPIED

    return known.with_cells(new)


# ---------------------------------------------------------------------------
# masking and cropping


def mask_unknown_region(grid: OccupancyGrid, rect) -> OccupancyGrid:
    """Set every cell whose center lies in rect = (x, y, w, h) to Unknown."""
    rx, ry, rw, rh = rect
    if rw <= 0 or rh <= 0:
        raise ValidationError("mask rectangle must have positive extent")
    ox, oy = grid.origin
    if rx + rw <= ox or rx >= ox + grid.size_x or ry + rh <= oy or ry >= oy + grid.size_y:
        raise ValidationError("mask rectangle does not intersect the grid")
    cx = ox + (np.arange(grid.width) + 0.5) * grid.resolution
    cy = oy + (np.arange(grid.height) + 0.5) * grid.resolution
    in_x = (cx >= rx) & (cx <= rx + rw)
    in_y = (cy >= ry) & (cy <= ry + rh)
    mask = np.outer(in_y, in_x)
    new = np.array(grid.cells)
    new[mask] = CellState.UNKNOWN
    return grid.with_cells(new)


def crop_local(grid: OccupancyGrid, center, side: float) -> OccupancyGrid:
    """Square sub-grid of `side` meters centered at `center`, clamped to the
    parent bounds; resolution and world alignment are preserved."""
    if side <= 0:
        raise ValidationError("crop side must be positive")
    cx, cy = center
    icx, icy = grid.cell_index(cx, cy)  # raises OutOfBoundsError if outside
    n = max(1, int(round(side / grid.resolution)))
    nx = min(n, grid.width)
    ny = min(n, grid.height)
    x0 = min(max(icx - n // 2, 0), grid.width - nx)
    y0 = min(max(icy - n // 2, 0), grid.height - ny)
    sub = np.array(grid.cells[y0:y0 + ny, x0:x0 + nx])
    origin = (grid.origin[0] + x0 * grid.resolution, grid.origin[1] + y0 * grid.resolution)
    return OccupancyGrid(nx, ny, grid.resolution, origin, sub)


# ---------------------------------------------------------------------------
# plain-text map files


def save_grid(grid: OccupancyGrid, path) -> None:
    lines = [f"grid {grid.width} {grid.height} {grid.resolution:.10g} "
             f"{grid.origin[0]:.10g} {grid.origin[1]:.10g}"]
    lut = np.array([_CHAR_OF[CellState.FREE], _CHAR_OF[CellState.OCCUPIED],
                    _CHAR_OF[CellState.UNKNOWN]])
    for iy in range(grid.height):
        lines.append("".join(lut[grid.cells[iy]]))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_grid(path) -> OccupancyGrid:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("empty grid file", path=path, line=1)
    head = lines[0].split()
    if len(head) != 6 or head[0] != "grid":
        raise ParseError("expected header 'grid <w> <h> <res> <ox> <oy>'", path=path, line=1)
    try:
        w, h = int(head[1]), int(head[2])
        res = float(head[3])
        origin = (float(head[4]), float(head[5]))
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}", path=path, line=1)
    if len(lines) < 1 + h:
        raise ParseError(f"expected {h} rows, found {len(lines) - 1}", path=path, line=len(lines))
    cells = np.zeros((h, w), dtype=np.uint8)
    for iy in range(h):
        row = lines[1 + iy]
        if len(row) != w:
            raise ParseError(f"row has {len(row)} cells, expected {w}", path=path, line=2 + iy)
        for ix, ch in enumerate(row):
            state = _STATE_OF.get(ch)
            if state is None:
                raise ParseError(f"unknown cell character {ch!r}", path=path, line=2 + iy)
            cells[iy, ix] = state
    return OccupancyGrid(w, h, res, origin, cells)
