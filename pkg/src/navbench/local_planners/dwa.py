"""Sampling-based local planner: dynamic-window velocity search.

Velocity pairs are sampled on a lattice inside the acceleration-reachable
window, forward-simulated with exact arcs, filtered for collisions, and the
survivor with the best weighted (heading, clearance, velocity) score wins.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..errors import PlanInputError, ValidationError
from ..robot import VelocityCommand
from .common import (LocalPlanRequest, PlannerOutput, PlannerStatus,
                     recovery_output, rollout_for_scoring, score_components,
                     terminal_output, trajectory_min_clearance)


@dataclass(frozen=True)
class DwaConfig:
    n_v: int = 11
    n_omega: int = 21
    sim_horizon: float = 1.6
    sim_dt: float = 0.1
    w_heading: float = 0.8
    w_clearance: float = 0.3
    w_velocity: float = 0.3

    def __post_init__(self):
        if self.n_v < 3 or self.n_omega < 3:
            raise ValidationError("need at least 3 samples per axis")
        if not (self.sim_horizon > self.sim_dt > 0):
            raise ValidationError("need sim_horizon > sim_dt > 0")
        weights = (self.w_heading, self.w_clearance, self.w_velocity)
        if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise ValidationError("weights must be non-negative and not all zero")


def dynamic_window(req: LocalPlanRequest) -> tuple[float, float, float, float]:
    """Velocity box intersected with what acceleration allows in one control
    period: (v_lo, v_hi, omega_lo, omega_hi)."""
    lim = req.limits
    r = req.robot
    dt = req.dt_control
    return (
        max(lim.v_min, r.v + lim.a_min * dt),
        min(lim.v_max, r.v + lim.a_max * dt),
        max(lim.omega_min, r.omega + lim.alpha_min * dt),
        min(lim.omega_max, r.omega + lim.alpha_max * dt),
    )


def dwa_plan(req: LocalPlanRequest, cfg: DwaConfig = DwaConfig()) -> PlannerOutput:
    t0 = time.perf_counter()
    if len(req.reference) == 0:
        raise PlanInputError("empty reference path")
    term = terminal_output(req, t0)
    if term is not None:
        return term

    v_lo, v_hi, w_lo, w_hi = dynamic_window(req)
    vs = np.linspace(v_lo, v_hi, cfg.n_v)
    ws = np.linspace(w_lo, w_hi, cfg.n_omega)
    n_steps = int(round(cfg.sim_horizon / cfg.sim_dt))
    radius = req.limits.radius

    best_score = -np.inf
    best = None
    simulated = 0
    for v in vs:
        for w in ws:
            simulated += 1
            traj = rollout_for_scoring(req, float(v), float(w), n_steps, cfg.sim_dt)
            if trajectory_min_clearance(traj, req) < radius:
                continue
            h, c, vel = score_components(traj, req)
            score = cfg.w_heading * h + cfg.w_clearance * c + cfg.w_velocity * vel
            if score > best_score:
                best_score = score
                best = (float(v), float(w), traj)

    if best is None:
        return recovery_output(req, t0, simulated)

    v, w, traj = best
    ms = (time.perf_counter() - t0) * 1e3
    return PlannerOutput(VelocityCommand(v, w), tuple(map(tuple, traj)),
                         ms, simulated, PlannerStatus.OK)
