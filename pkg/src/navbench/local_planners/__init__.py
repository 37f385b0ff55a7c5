"""The two benchmarked local planners behind one interface."""

from __future__ import annotations

import dataclasses

from ..errors import ParseError
from .common import (LocalPlanRequest, PlannerOutput, PlannerStatus,
                     forward_simulate, recovery_output, reference_target,
                     score_components, terminal_output, trajectory_min_clearance)
from .dwa import DwaConfig, dwa_plan, dynamic_window
from .teb import BandProblem, TebConfig, optimize_band, teb_plan

PLANNERS = ("dwa", "teb")


def plan(name: str, req: LocalPlanRequest, cfg=None) -> PlannerOutput:
    if name == "dwa":
        return dwa_plan(req, cfg or DwaConfig())
    if name == "teb":
        return teb_plan(req, cfg or TebConfig())
    raise ValueError(f"unknown planner {name!r}; expected one of {PLANNERS}")


def default_config(name: str):
    if name == "dwa":
        return DwaConfig()
    if name == "teb":
        return TebConfig()
    raise ValueError(f"unknown planner {name!r}")


def load_planner_config(path, name: str):
    """Parse a `.cfg` file of `key value` lines into a planner config.
    Unknown keys are rejected."""
    cls = {"dwa": DwaConfig, "teb": TebConfig}.get(name)
    if cls is None:
        raise ValueError(f"unknown planner {name!r}")
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f.read().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected 'key value'", path=path, line=ln)
            key, raw = parts
            if key not in fields:
                raise ParseError(f"unknown {name} config key {key!r}", path=path, line=ln)
            try:
                values[key] = int(raw) if key.startswith("n_") or key.endswith("_iterations") \
                    else float(raw)
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=ln)
    return cls(**values)
