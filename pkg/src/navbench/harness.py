"""Closed-loop trial runner and suite orchestration.

Each control tick: sense (raycast + scan fusion), stamp agents, refresh the
distance fields, refresh the global reference, call the local planner, clamp
the command, integrate physics in sub-steps, and append one log record.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import BenchError, NoPathError, ParseError, PlanInputError, ValidationError
from .global_planner import extract_local_reference, plan_global
from .gridmap import (CellState, UnknownAs, crop_local, distance_at_clamped,
                      distance_transform, integrate_scan, raycast)
from .local_planners import DwaConfig, TebConfig, LocalPlanRequest, PlannerStatus, plan
from .metrics import (LogRecord, MetricsConfig, MetricsReport, NavLog, Outcome,
                      compute_report, write_log_csv)
from .robot import KinematicLimits, RobotState, VelocityCommand, clamp_command, step, wrap_angle
from .world import Scenario, load_scenario, stamp_agents, step_agents

SUITE_GROUPS = ("static", "partially_unknown", "dynamic")


@dataclass(frozen=True)
class TrialConfig:
    control_period: float = 0.2
    physics_dt: float = 0.05
    goal_pos_tol: float = 0.1
    goal_yaw_tol: float = 0.25
    timeout: float = 300.0
    seed: int = 0
    compute_cost_mode: str = "wallclock"  # or "iterations"
    recovery_budget: int = 25             # consecutive infeasible ticks allowed
    local_map_side: float = 5.5
    d_safe: float = 0.34

    def __post_init__(self):
        if self.control_period <= 0 or self.physics_dt <= 0:
            raise ValidationError("periods must be positive")
        k = round(self.control_period / self.physics_dt)
        if k < 1 or abs(k * self.physics_dt - self.control_period) > 1e-9:
            raise ValidationError("physics_dt must divide control_period")
        if self.goal_pos_tol <= 0 or self.goal_yaw_tol <= 0 or self.timeout <= 0:
            raise ValidationError("tolerances and timeout must be positive")
        if self.compute_cost_mode not in ("wallclock", "iterations"):
            raise ValidationError("compute_cost_mode must be wallclock or iterations")


@dataclass
class TrialResult:
    scenario: Scenario
    scenario_name: str
    planner: str
    pair_index: int
    log: NavLog
    report: MetricsReport
    metadata: dict
    unknown_counts: tuple  # sensed-map Unknown cells, one entry per tick

    @property
    def outcome(self) -> Outcome:
        return self.log.outcome


def _config_hash(*cfgs) -> str:
    text = "|".join(repr(dataclasses.asdict(c)) for c in cfgs)
    return hashlib.sha1(text.encode()).hexdigest()[:12]


def _goal_reached(robot: RobotState, goal, cfg: TrialConfig) -> bool:
    if math.hypot(goal[0] - robot.x, goal[1] - robot.y) > cfg.goal_pos_tol:
        return False
    return abs(wrap_angle(goal[2] - robot.theta)) <= cfg.goal_yaw_tol


def run_trial(scenario: Scenario, planner_name: str, pair_index: int,
              cfg: TrialConfig = TrialConfig(),
              dwa_cfg: DwaConfig | None = None,
              teb_cfg: TebConfig | None = None) -> TrialResult:
    if not 0 <= pair_index < len(scenario.start_goal_pairs):
        raise ValidationError(f"pair index {pair_index} invalid for {scenario.name!r}")
    planner_cfg = {"dwa": dwa_cfg or DwaConfig(), "teb": teb_cfg or TebConfig()}[planner_name]

    wall_start = time.perf_counter()
    limits = KinematicLimits()
    start, goal = scenario.start_goal_pairs[pair_index]
    robot = RobotState(*start)
    agents = list(scenario.agents)
    truth = scenario.map
    sensed = scenario.prior_map
    static_truth_field = distance_transform(truth, UnknownAs.FREE)
    replan_every_tick = scenario.has_unknown_prior or bool(agents)

    records = []
    unknown_counts = []
    t = 0.0
    infeasible_streak = 0
    global_path = None
    outcome = None
    substeps = round(cfg.control_period / cfg.physics_dt)
    max_ticks = int(math.ceil(cfg.timeout / cfg.control_period)) + 2

    for _ in range(max_ticks):
        if not truth.contains(robot.x, robot.y):
            outcome = Outcome.COLLISION
            break
        if _goal_reached(robot, goal, cfg):
            if not records:
                tick_map = stamp_agents(sensed, agents)
                f = distance_transform(tick_map, UnknownAs.FREE)
                d = distance_at_clamped(f, robot.x, robot.y)
                records.append(LogRecord(0.0, robot.x, robot.y, robot.theta,
                                         0.0, 0.0, d, 0.0,
                                         d_true=distance_at_clamped(
                                             static_truth_field, robot.x, robot.y)))
            outcome = Outcome.SUCCESS
            break
        if t >= cfg.timeout - 1e-9:
            outcome = Outcome.TIMEOUT
            break

        # sense: map-building scans are cast against the static truth; agents
        # enter the planning grids through per-tick stamping only.
        scan = raycast(truth, robot.pose(), scenario.scan_spec)
        sensed = integrate_scan(sensed, robot.pose(), scan)
        unknown_counts.append(sensed.count(CellState.UNKNOWN))
        tick_map = stamp_agents(sensed, agents)
        sensed_field = distance_transform(tick_map, UnknownAs.FREE)
        if agents:
            truth_field = distance_transform(stamp_agents(truth, agents), UnknownAs.FREE)
        else:
            truth_field = static_truth_field

        if global_path is None or replan_every_tick:
            try:
                global_path = plan_global(tick_map, (robot.x, robot.y),
                                          (goal[0], goal[1]), limits.radius,
                                          field=sensed_field)
            except (NoPathError, PlanInputError):
                pass  # keep the previous reference, if any

        infeasible = False
        if global_path is None:
            bearing = math.atan2(goal[1] - robot.y, goal[0] - robot.x)
            err = wrap_angle(bearing - robot.theta)
            desired = VelocityCommand(0.0, math.copysign(limits.omega_max / 2.0, err))
            cmd = clamp_command(desired, VelocityCommand(robot.v, robot.omega),
                                limits, cfg.control_period)
            c_val = 0.0
            infeasible = True
        else:
            local_map = crop_local(tick_map, (robot.x, robot.y), cfg.local_map_side)
            local_field = distance_transform(local_map, UnknownAs.OCCUPIED)
            ref = extract_local_reference(global_path, (robot.x, robot.y),
                                          cfg.local_map_side / 2.0)
            ref_end = ref.points[-1]
            path_end = global_path.points[-1]
            if math.hypot(ref_end[0] - path_end[0], ref_end[1] - path_end[1]) <= 1e-9:
                req_goal = tuple(goal)
            else:
                if len(ref.points) >= 2:
                    a = ref.points[-2]
                    heading = math.atan2(ref_end[1] - a[1], ref_end[0] - a[0])
                else:
                    heading = robot.theta
                req_goal = (ref_end[0], ref_end[1], heading)
            req = LocalPlanRequest(local_map, local_field, robot, ref, req_goal,
                                   limits, cfg.control_period,
                                   d_safe=cfg.d_safe, goal_tol=cfg.goal_pos_tol)
            out = plan(planner_name, req, planner_cfg)
            c_val = out.compute_cost(cfg.compute_cost_mode)
            cmd = clamp_command(out.cmd, VelocityCommand(robot.v, robot.omega),
                                limits, cfg.control_period)
            infeasible = out.status is PlannerStatus.INFEASIBLE

        for _ in range(substeps):
            robot = step(robot, cmd, cfg.physics_dt)
            if agents:
                agents = step_agents(agents, cfg.physics_dt)
        t += cfg.control_period

        d = distance_at_clamped(sensed_field, robot.x, robot.y)
        d_true = distance_at_clamped(truth_field, robot.x, robot.y)
        records.append(LogRecord(t, robot.x, robot.y, robot.theta,
                                 robot.v, robot.omega, d, c_val, d_true=d_true))

        if d < limits.radius:
            outcome = Outcome.COLLISION
            break
        if infeasible:
            infeasible_streak += 1
            if infeasible_streak > cfg.recovery_budget:
                outcome = Outcome.PLANNER_FAILURE
                break
        else:
            infeasible_streak = 0
    if outcome is None:
        outcome = Outcome.TIMEOUT

    log = NavLog(tuple(records), outcome)
    report = compute_report(log, MetricsConfig(d_safe=cfg.d_safe))
    wall_ms = (time.perf_counter() - wall_start) * 1e3
    metadata = {
        "scenario": scenario.name,
        "planner": planner_name,
        "pair": pair_index,
        "seed": cfg.seed,
        "cost_mode": cfg.compute_cost_mode,
        "control_period": cfg.control_period,
        "physics_dt": cfg.physics_dt,
        "config_hash": _config_hash(cfg, planner_cfg),
        "outcome": outcome.value,
        "wall_ms": f"{wall_ms:.3f}",
    }
    return TrialResult(scenario, scenario.name, planner_name, pair_index,
                       log, report, metadata, tuple(unknown_counts))


# ---------------------------------------------------------------------------
# suites


def parse_suite(path) -> list[tuple[str, str]]:
    """Manifest lines: `group <static|partially_unknown|dynamic>` followed by
    `scene <relative path>` entries.  Returns (group, scene_path) pairs."""
    entries = []
    group = None
    directory = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f.read().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            rest = rest.strip()
            if key == "group":
                if rest not in SUITE_GROUPS:
                    raise ParseError(f"unknown group {rest!r}", path=path, line=ln)
                group = rest
            elif key == "scene":
                if group is None:
                    raise ParseError("scene before any group line", path=path, line=ln)
                entries.append((group, os.path.join(directory, rest)))
            else:
                raise ParseError(f"unknown suite key {key!r}", path=path, line=ln)
    if not entries:
        raise ParseError("suite manifest lists no scenes", path=path)
    return entries


def trial_filename(group: str, scenario: str, pair: int, planner: str) -> str:
    return f"{group}__{scenario}__pair{pair}__{planner}.csv"


def _run_one(args):
    scenario, planner, pair, cfg, dwa_cfg, teb_cfg = args
    return run_trial(scenario, planner, pair, cfg, dwa_cfg=dwa_cfg, teb_cfg=teb_cfg)


@dataclass
class SuiteResult:
    results: list
    crashed: list          # (trial description, exception text)
    out_dir: str
    table_paths: list


def run_suite(manifest_path, planners, cfg: TrialConfig, out_dir,
              jobs: int = 1, svg: bool = False,
              dwa_cfg: DwaConfig | None = None,
              teb_cfg: TebConfig | None = None) -> SuiteResult:
    from .report import write_group_tables
    from .svgplot import emit_trajectory_svg

    entries = parse_suite(manifest_path)
    os.makedirs(out_dir, exist_ok=True)
    scenarios = [(group, load_scenario(path)) for group, path in entries]

    jobs_spec = []
    for group, scn in scenarios:
        for pair in range(len(scn.start_goal_pairs)):
            for planner in planners:
                jobs_spec.append((group, scn, planner, pair))

    results = []
    crashed = []
    work = [(scn, planner, pair, cfg, dwa_cfg, teb_cfg)
            for _, scn, planner, pair in jobs_spec]
    outputs = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, w) for w in work]
            for fut in futures:
                try:
                    outputs.append(fut.result())
                except Exception as exc:
                    outputs.append(exc)
    else:
        for w in work:
            try:
                outputs.append(_run_one(w))
            except Exception as exc:
                outputs.append(exc)

    for (group, scn, planner, pair), out in zip(jobs_spec, outputs):
        if isinstance(out, Exception):
            crashed.append((f"{group}/{scn.name}/pair{pair}/{planner}", repr(out)))
            continue
        out.metadata["group"] = group
        results.append((group, out))
        csv_path = os.path.join(out_dir, trial_filename(group, scn.name, pair, planner))
        write_log_csv(out.log, csv_path, out.metadata)
        if svg:
            emit_trajectory_svg(out, csv_path[:-4] + ".svg")

    table_paths = write_group_tables(out_dir)
    return SuiteResult([r for _, r in results], crashed, out_dir, table_paths)
