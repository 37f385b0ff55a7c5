"""Shared local-planner interface: request/output types, trajectory scoring,
and the rotate-in-place recovery used when a planner reports infeasibility.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import PlanInputError, ValidationError
from ..global_planner import GlobalPath
from ..gridmap import DistanceField, OccupancyGrid, sample_field
from ..robot import (KinematicLimits, RobotState, VelocityCommand,
                     clamp_command, step, wrap_angle)


class PlannerStatus(enum.Enum):
    OK = "ok"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class LocalPlanRequest:
    """Everything a local planner sees for one control cycle."""

    local_map: OccupancyGrid
    local_field: DistanceField
    robot: RobotState
    reference: GlobalPath
    goal: tuple[float, float, float]
    limits: KinematicLimits
    dt_control: float = 0.2
    d_safe: float = 0.34     # clearance cap used by trajectory scoring
    goal_tol: float = 0.1    # position radius for the terminal rotate/stop

    def __post_init__(self):
        if not self.local_map.contains(self.robot.x, self.robot.y):
            raise ValidationError("robot pose outside the local map")
        if self.dt_control <= 0:
            raise ValidationError("dt_control must be positive")


@dataclass(frozen=True)
class PlannerOutput:
    cmd: VelocityCommand
    trajectory: tuple            # (x, y, theta, t) tuples, starts at the robot pose
    compute_ms: float            # wall-clock planning time
    iterations: int              # deterministic work count (samples / solver evals)
    status: PlannerStatus
    objective_trace: tuple | None = None  # TEB: objective after each accepted step

    def compute_cost(self, mode: str) -> float:
        if mode == "wallclock":
            return self.compute_ms
        if mode == "iterations":
            return float(self.iterations)
        raise ValueError(f"unknown compute-cost mode {mode!r}")


def reference_target(req: LocalPlanRequest) -> tuple[float, float, float]:
    """Lookahead point: the end of the local reference with its heading (the
    goal heading when the reference is a single point)."""
    pts = req.reference.points
    if not pts:
        raise PlanInputError("empty reference path")
    tx, ty = pts[-1]
    if len(pts) >= 2:
        ax, ay = pts[-2]
        th = math.atan2(ty - ay, tx - ax)
    else:
        th = req.goal[2]
    return (tx, ty, th)


def forward_simulate(state: RobotState, v: float, omega: float,
                     n_steps: int, dt: float) -> np.ndarray:
    """Roll a constant command out with exact arc steps.

    Returns an (n_steps + 1, 4) array of (x, y, theta, t) starting at the
    current pose.
    """
    out = np.empty((n_steps + 1, 4))
    out[0] = (state.x, state.y, state.theta, 0.0)
    cmd = VelocityCommand(v, omega)
    s = state
    for k in range(1, n_steps + 1):
        s = step(s, cmd, dt)
        out[k] = (s.x, s.y, s.theta, k * dt)
    return out


def rollout_for_scoring(req: LocalPlanRequest, v: float, omega: float,
                        n_steps: int, dt: float) -> np.ndarray:
    """Candidate rollout for scoring: simulate the constant command, then cut
    the tail at the closest approach to the local goal.  A rollout that would
    drive past the goal is scored where it meets it instead of where it ends
    up afterwards, which keeps the heading term meaningful near the goal."""
    traj = forward_simulate(req.robot, v, omega, n_steps, dt)
    gx, gy = req.goal[0], req.goal[1]
    d = np.hypot(traj[:, 0] - gx, traj[:, 1] - gy)
    k = int(np.argmin(d))
    if k < len(traj) - 1 and d[k] < d[-1]:
        traj = traj[:max(k, 1) + 1]
    return traj


def trajectory_min_clearance(trajectory, req: LocalPlanRequest) -> float:
    """Smallest interpolated clearance along the trajectory (boundary-clamped
    sampling, so poses nudging outside the local map stay defined)."""
    traj = np.asarray(trajectory, dtype=np.float64).reshape(-1, 4)
    vals = sample_field(req.local_field, traj[:, 0], traj[:, 1], clamp=True)
    return float(np.min(vals))


def score_components(trajectory, req: LocalPlanRequest) -> tuple[float, float, float]:
    """(heading, clearance, velocity) scores, each normalized to [0, 1].

    heading: alignment of the final pose with the bearing to the reference
    lookahead; clearance: min clearance capped at d_safe; velocity: the
    rollout speed recovered from the first chord and heading change,
    normalized by v_max.
    """
    traj = np.asarray(trajectory, dtype=np.float64).reshape(-1, 4)
    if traj.shape[0] == 0:
        raise PlanInputError("empty trajectory")
    tx, ty, tth = reference_target(req)
    fx, fy, fth = traj[-1, 0], traj[-1, 1], traj[-1, 2]
    dx, dy = tx - fx, ty - fy
    if math.hypot(dx, dy) < 1e-9:
        bearing = tth
    else:
        bearing = math.atan2(dy, dx)
    heading = 1.0 - abs(wrap_angle(bearing - fth)) / math.pi

    min_d = trajectory_min_clearance(traj, req)
    clearance = min(min_d, req.d_safe) / req.d_safe

    velocity = 0.0
    if traj.shape[0] >= 2:
        chord = math.hypot(traj[1, 0] - traj[0, 0], traj[1, 1] - traj[0, 1])
        dt = traj[1, 3] - traj[0, 3]
        if dt > 0:
            dphi = abs(wrap_angle(traj[1, 2] - traj[0, 2]))
            if dphi < 1e-9:
                speed = chord / dt
            else:
                # invert the constant-twist chord: c = v*dt*sin(phi/2)/(phi/2)
                speed = (chord / dt) * (dphi / 2.0) / math.sin(dphi / 2.0)
            velocity = min(1.0, speed / req.limits.v_max)

    return (min(max(heading, 0.0), 1.0), min(max(clearance, 0.0), 1.0), velocity)


def _rotation_direction(req: LocalPlanRequest) -> float:
    tx, ty, tth = reference_target(req)
    r = req.robot
    dx, dy = tx - r.x, ty - r.y
    if math.hypot(dx, dy) < 1e-9:
        err = wrap_angle(tth - r.theta)
    else:
        err = wrap_angle(math.atan2(dy, dx) - r.theta)
    return 1.0 if err >= 0 else -1.0


def recovery_output(req: LocalPlanRequest, t_start: float, iterations: int) -> PlannerOutput:
    """Rotate in place toward the reference heading at omega_max / 2; stop
    entirely if the current pose is already in collision."""
    r = req.robot
    here = sample_field(req.local_field, r.x, r.y, clamp=True)
    if float(here) < req.limits.radius:
        desired = VelocityCommand(0.0, 0.0)
    else:
        desired = VelocityCommand(0.0, _rotation_direction(req) * req.limits.omega_max / 2.0)
    cmd = clamp_command(desired, VelocityCommand(r.v, r.omega), req.limits, req.dt_control)
    traj = ((r.x, r.y, r.theta, 0.0),)
    ms = (time.perf_counter() - t_start) * 1e3
    return PlannerOutput(cmd, traj, ms, iterations, PlannerStatus.INFEASIBLE)


def terminal_output(req: LocalPlanRequest, t_start: float) -> PlannerOutput | None:
    """Within the goal position tolerance: stop, or rotate onto the goal yaw.
    Returns None when the robot is still traveling."""
    r = req.robot
    gx, gy, gth = req.goal
    if math.hypot(gx - r.x, gy - r.y) > req.goal_tol:
        return None
    yaw_err = wrap_angle(gth - r.theta)
    if abs(yaw_err) <= 0.05:
        desired = VelocityCommand(0.0, 0.0)
    else:
        mag = min(req.limits.omega_max / 2.0, abs(yaw_err) / req.dt_control)
        desired = VelocityCommand(0.0, math.copysign(mag, yaw_err))
    cmd = clamp_command(desired, VelocityCommand(r.v, r.omega), req.limits, req.dt_control)
    traj = ((r.x, r.y, r.theta, 0.0),)
    ms = (time.perf_counter() - t_start) * 1e3
    return PlannerOutput(cmd, traj, ms, 1, PlannerStatus.OK)
