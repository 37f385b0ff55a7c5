"""Scenario model: map + start/goal pairs + moving agents + unknown masking.

A Scenario owns the ground-truth grid and the prior handed to the planners
(identical unless part of the map is masked Unknown).  Dynamic agents move
along fixed waypoint polylines at constant speed and get stamped into the
planning grids each control tick.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import ParseError, ValidationError
from .gridmap import (CellState, OccupancyGrid, ScanSpec, UnknownAs,
                      distance_at, distance_transform, load_grid,
                      mask_unknown_region, save_grid)

AGENT_MODES = ("loop", "ping_pong")


@dataclass(frozen=True)
class DynamicAgent:
    """Disc obstacle following a waypoint polyline at constant speed.

    `arc` is the current distance along the polyline from the first waypoint;
    loop mode closes the polyline, ping_pong reflects at both ends.
    """

    radius: float
    speed: float
    waypoints: tuple[tuple[float, float], ...]
    mode: str = "ping_pong"
    arc: float = 0.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ValidationError("agent speed must be positive")
        if not self.radius > 0:
            raise ValidationError("agent radius must be positive")
        wps = tuple((float(x), float(y)) for x, y in self.waypoints)
        if len(wps) < 2:
            raise ValidationError("agent needs at least two waypoints")
        for a, b in zip(wps, wps[1:]):
            if math.hypot(b[0] - a[0], b[1] - a[1]) < 1e-12:
                raise ValidationError("consecutive agent waypoints must be distinct")
        if self.mode not in AGENT_MODES:
            raise ValidationError(f"agent mode must be one of {AGENT_MODES}")
        object.__setattr__(self, "waypoints", wps)

    def _segments(self):
        pts = list(self.waypoints)
        if self.mode == "loop":
            pts.append(pts[0])
        pts = np.asarray(pts)
        deltas = np.diff(pts, axis=0)
        lengths = np.linalg.norm(deltas, axis=1)
        return pts, deltas, lengths

    @property
    def path_length(self) -> float:
        return float(self._segments()[2].sum())

    @property
    def position(self) -> tuple[float, float]:
        pts, deltas, lengths = self._segments()
        total = lengths.sum()
        s = self._folded_arc(total)
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(max(i, 0), len(lengths) - 1)
        frac = (s - cum[i]) / lengths[i]
        p = pts[i] + frac * deltas[i]
        return (float(p[0]), float(p[1]))

    def _folded_arc(self, total: float) -> float:
        if self.mode == "loop":
            return self.arc % total
        m = self.arc % (2.0 * total)
        return 2.0 * total - m if m > total else m


def step_agents(agents, dt: float):
    """Advance every agent speed*dt along its polyline (exact across segment
    boundaries); returns a new agent list."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    out = []
    for a in agents:
        total = a.path_length
        arc = a.arc + a.speed * dt
        # Keep the stored arc bounded so long trials do not lose precision.
        period = total if a.mode == "loop" else 2.0 * total
        arc = arc % period
        out.append(replace(a, arc=arc))
    return out


def stamp_agents(grid: OccupancyGrid, agents) -> OccupancyGrid:
    """Mark cells whose centers fall inside any agent disc as Occupied."""
    if not agents:
        return grid
    new = np.array(grid.cells)
    ox, oy = grid.origin
    res = grid.resolution
    for a in agents:
        px, py = a.position
        ix0 = int(math.floor((px - a.radius - ox) / res))
        ix1 = int(math.floor((px + a.radius - ox) / res))
        iy0 = int(math.floor((py - a.radius - oy) / res))
        iy1 = int(math.floor((py + a.radius - oy) / res))
        ix0, ix1 = max(ix0, 0), min(ix1, grid.width - 1)
        iy0, iy1 = max(iy0, 0), min(iy1, grid.height - 1)
        if ix0 > ix1 or iy0 > iy1:
            continue
        cx = ox + (np.arange(ix0, ix1 + 1) + 0.5) * res
        cy = oy + (np.arange(iy0, iy1 + 1) + 0.5) * res
        dx = cx[None, :] - px
        dy = cy[:, None] - py
        inside = dx * dx + dy * dy <= a.radius * a.radius
        block = new[iy0:iy1 + 1, ix0:ix1 + 1]
        block[inside] = CellState.OCCUPIED
    return grid.with_cells(new)


@dataclass(frozen=True)
class Scenario:
    name: str
    map: OccupancyGrid                 # ground truth
    prior_map: OccupancyGrid           # what planners start from
    start_goal_pairs: tuple            # ((x, y, th), (x, y, th)) per pair
    agents: tuple = ()
    scan_spec: ScanSpec = ScanSpec()
    masks: tuple = ()                  # (x, y, w, h) rectangles applied to prior

    def __post_init__(self):
        object.__setattr__(self, "start_goal_pairs",
                           tuple((tuple(s), tuple(g)) for s, g in self.start_goal_pairs))
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "masks", tuple(tuple(m) for m in self.masks))

    @property
    def has_unknown_prior(self) -> bool:
        return bool((self.prior_map.cells == CellState.UNKNOWN).any())

    def validate(self, radius: float = 0.17) -> None:
        """Enforce the scenario invariants; raises ValidationError."""
        if not self.start_goal_pairs:
            raise ValidationError("scenario has no start/goal pairs")
        field_ = distance_transform(self.map, UnknownAs.FREE)
        free = self.map.cells != CellState.OCCUPIED
        labels, _ = ndimage.label(free, structure=np.ones((3, 3), dtype=int))
        for k, (s, g) in enumerate(self.start_goal_pairs):
            for tag, pose in (("start", s), ("goal", g)):
                x, y = pose[0], pose[1]
                if not self.map.contains(x, y):
                    raise ValidationError(f"pair {k}: {tag} outside map")
                if self.map.state_at(x, y) != CellState.FREE:
                    raise ValidationError(f"pair {k}: {tag} not free")
                if distance_at(field_, x, y) < radius:
                    raise ValidationError(f"pair {k}: {tag} clearance below robot radius")
            si = self.map.cell_index(s[0], s[1])
            gi = self.map.cell_index(g[0], g[1])
            if labels[si[1], si[0]] != labels[gi[1], gi[0]]:
                raise ValidationError(f"pair {k}: start and goal not connected")


# ---------------------------------------------------------------------------
# scene files


def save_scenario(scn: Scenario, path, map_filename: str | None = None) -> None:
    """Write a .scene file plus its .grid map next to it."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if map_filename is None:
        base = os.path.splitext(os.path.basename(path))[0]
        map_filename = base + ".grid"
    save_grid(scn.map, os.path.join(directory, map_filename))
    lines = [f"name {scn.name}", f"map {map_filename}"]
    for m in scn.masks:
        lines.append("mask " + " ".join(f"{v:.10g}" for v in m))
    for s, g in scn.start_goal_pairs:
        lines.append("pair " + " ".join(f"{v:.10g}" for v in (*s, *g)))
    for a in scn.agents:
        wp = " ".join(f"{v:.10g}" for p in a.waypoints for v in p)
        lines.append(f"agent {a.radius:.10g} {a.speed:.10g} {a.mode} {wp}")
    sp = scn.scan_spec
    if sp != ScanSpec():
        lines.append("scan " + " ".join(f"{v:.10g}" for v in (
            math.degrees(sp.angle_min), math.degrees(sp.angle_max),
            math.degrees(sp.angle_increment), sp.range_min, sp.range_max)))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_scenario(path, radius: float = 0.17) -> Scenario:
    """Parse and fully validate a .scene file."""
    with open(path, "r", encoding="utf-8") as f:
        raw = f.read().splitlines()
    directory = os.path.dirname(os.path.abspath(path))
    name = None
    grid = None
    masks = []
    pairs = []
    agents = []
    scan = ScanSpec()

    def fail(msg, ln):
        raise ParseError(msg, path=path, line=ln)

    for ln, line in enumerate(raw, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if key == "name":
                name = rest
            elif key == "map":
                grid = load_grid(os.path.join(directory, rest))
            elif key == "mask":
                vals = [float(v) for v in rest.split()]
                if len(vals) != 4:
                    fail("mask needs 4 values: x y w h", ln)
                masks.append(tuple(vals))
            elif key == "pair":
                vals = [float(v) for v in rest.split()]
                if len(vals) != 6:
                    fail("pair needs 6 values: sx sy sth gx gy gth", ln)
                pairs.append((tuple(vals[:3]), tuple(vals[3:])))
            elif key == "agent":
                parts = rest.split()
                if len(parts) < 7 or len(parts) % 2 == 0:
                    fail("agent needs: radius speed mode x1 y1 x2 y2 [...]", ln)
                radius_a, speed = float(parts[0]), float(parts[1])
                mode = parts[2]
                coords = [float(v) for v in parts[3:]]
                wps = list(zip(coords[::2], coords[1::2]))
                agents.append(DynamicAgent(radius_a, speed, tuple(wps), mode))
            elif key == "scan":
                vals = [float(v) for v in rest.split()]
                if len(vals) != 5:
                    fail("scan needs: amin_deg amax_deg incr_deg rmin rmax", ln)
                scan = ScanSpec(math.radians(vals[0]), math.radians(vals[1]),
                                math.radians(vals[2]), vals[3], vals[4])
            else:
                fail(f"unknown scene key {key!r}", ln)
        except ParseError:
            raise
        except (ValueError, ValidationError) as exc:
            fail(str(exc), ln)

    if name is None:
        raise ParseError("scene file has no 'name' line", path=path)
    if grid is None:
        raise ParseError("scene file has no 'map' line", path=path)
    prior = grid
    for m in masks:
        prior = mask_unknown_region(prior, m)
    scn = Scenario(name=name, map=grid, prior_map=prior,
                   start_goal_pairs=tuple(pairs), agents=tuple(agents),
                   scan_spec=scan, masks=tuple(masks))
    scn.validate(radius=radius)
    return scn
