"""Differential-drive kinematics: limits, command clamping, exact arc stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gridmap import DistanceField, distance_at

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    r = theta - TWO_PI * round(theta / TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    elif r > math.pi:
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class KinematicLimits:
    """Velocity/acceleration box shared by both local planners."""

    v_max: float = 0.55
    v_min: float = -0.2
    omega_max: float = 1.0
    omega_min: float = -1.0
    a_max: float = 2.5
    a_min: float = -2.5
    alpha_max: float = 3.2
    alpha_min: float = -3.2
    radius: float = 0.17

    def __post_init__(self):
        for lo, hi in ((self.v_min, self.v_max), (self.omega_min, self.omega_max),
                       (self.a_min, self.a_max), (self.alpha_min, self.alpha_max)):
            if not hi > lo:
                raise ValueError("each limit pair needs max > min")
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError("velocity command must be finite")


@dataclass(frozen=True)
class RobotState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    omega: float = 0.0

    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


def clamp_command(desired: VelocityCommand, prev: VelocityCommand,
                  limits: KinematicLimits, dt: float) -> VelocityCommand:
    """Clip a command to the velocity box intersected with the window
    reachable from `prev` within `dt` under the acceleration limits."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_lo = max(limits.v_min, prev.v + limits.a_min * dt)
    v_hi = min(limits.v_max, prev.v + limits.a_max * dt)
    w_lo = max(limits.omega_min, prev.omega + limits.alpha_min * dt)
    w_hi = min(limits.omega_max, prev.omega + limits.alpha_max * dt)
    v = min(max(desired.v, v_lo), v_hi)
    w = min(max(desired.omega, w_lo), w_hi)
    return VelocityCommand(v, w)


def step(state: RobotState, cmd: VelocityCommand, dt: float) -> RobotState:
    """Advance the unicycle model one step with exact constant-twist arcs.

    Uses the half-angle form of the arc displacement,
    v*dt*sinc(w*dt/2)*[cos|sin](theta + w*dt/2), which equals
    (v/w)*(sin(theta+w*dt) - sin(theta)) without the catastrophic
    cancellation that form suffers at small |w|.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, w = cmd.v, cmd.omega
    th = state.theta
    half = 0.5 * w * dt
    sinc = 1.0 if abs(half) < 1e-12 else math.sin(half) / half
    x = state.x + v * dt * sinc * math.cos(th + half)
    y = state.y + v * dt * sinc * math.sin(th + half)
    return RobotState(x, y, wrap_angle(th + w * dt), v, w)


def collision_check(state: RobotState, field: DistanceField, radius: float) -> bool:
    """True iff the circular footprint overlaps an obstacle (center distance
    below radius).  Poses outside the field count as collision."""
    if not field.contains(state.x, state.y):
        return True
    return distance_at(field, state.x, state.y) < radius
