"""Configuration schemas and loaders for world, mission and simulation files."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from .body import TransitionTrajectory
from .errors import ConfigError
from .geometry import ManwayRect, TrayWorld
from .mission import MissionPlan, SearchMotion


class ManwayConfig(BaseModel):
    center: tuple[float, float]
    theta: float = 0.0
    L_l: float
    L_s: float


class WorldConfig(BaseModel):
    """On-disk world schema; all lengths in meters."""

    tray_radius_m: float
    layer_gap_m: float
    layers: int = 1
    manway: ManwayConfig
    epsilon_m: float = 0.25
    pad_l_m: float = 0.15
    pad_s_m: float = 0.15
    buffer_margin_m: float = 0.05

    def build(self) -> TrayWorld:
        rect = ManwayRect.from_center(
            self.manway.center, self.manway.theta, self.manway.L_l, self.manway.L_s
        )
        return TrayWorld.from_manway(
            rect,
            plate_radius=self.tray_radius_m,
            base_offset=self.epsilon_m,
            layer_count=self.layers,
            layer_gap=self.layer_gap_m,
            tray_center=(0.0, 0.0),
            pad_long=self.pad_l_m,
            pad_short=self.pad_s_m,
            buffer_margin=self.buffer_margin_m,
        )

    @classmethod
    def from_world(cls, world: TrayWorld) -> "WorldConfig":
        rect = world.manway
        return cls(
            tray_radius_m=world.plate_radius,
            layer_gap_m=world.layer_gap,
            layers=world.layer_count,
            manway=ManwayConfig(
                center=(float(rect.center[0]), float(rect.center[1])),
                theta=rect.theta,
                L_l=rect.long_side,
                L_s=rect.short_side,
            ),
            epsilon_m=world.base_offset,
            pad_l_m=world.pad_long,
            pad_s_m=world.pad_short,
            buffer_margin_m=world.buffer_margin,
        )


class PoseConfig(BaseModel):
    position: tuple[float, float]
    yaw: float = 0.0


class StartConfig(PoseConfig):
    layer: int = 0


class SearchConfig(BaseModel):
    amplitude_rad: float = 0.3
    period_s: float = 2.0
    samples: int = 100


class TrajectoryRef(BaseModel):
    """Either a file reference (resolved at load) or inline knots."""

    file: Optional[str] = None
    knots: Optional[list[dict]] = None


class IntermediateConfig(BaseModel):
    q_stand: list[float]
    q_transition: list[float]
    horizon: int = 6
    step_duration_s: float = 1.0


class MissionConfig(BaseModel):
    start: StartConfig
    inspection_goals: dict[str, list[tuple[float, float]]] = Field(default_factory=dict)
    waypoint: tuple[float, float]
    transition_ready: PoseConfig
    landing: PoseConfig
    safe_location: tuple[float, float]
    goal_tolerance_m: float = 0.05
    yaw_tolerance_rad: float = 0.25
    search: SearchConfig = Field(default_factory=SearchConfig)
    timeouts_s: dict[str, float] = Field(default_factory=lambda: {"default": 60.0})
    transition_direction: dict[str, Literal["up", "down"]] = Field(default_factory=dict)
    transition_trajectories: dict[str, TrajectoryRef] = Field(default_factory=dict)
    intermediate: IntermediateConfig

    def plan(self) -> MissionPlan:
        return MissionPlan(
            inspection_goals={
                int(k): tuple(tuple(g) for g in v) for k, v in self.inspection_goals.items()
            },
            waypoint=self.waypoint,
            transition_ready_position=self.transition_ready.position,
            transition_ready_yaw=self.transition_ready.yaw,
            landing_position=self.landing.position,
            safe_location=self.safe_location,
            goal_tolerance=self.goal_tolerance_m,
            yaw_tolerance=self.yaw_tolerance_rad,
            search=SearchMotion(
                self.search.amplitude_rad, self.search.period_s, self.search.samples
            ),
            node_timeouts={k: v for k, v in self.timeouts_s.items() if k != "default"},
            transition_direction={int(k): v for k, v in self.transition_direction.items()},
            default_timeout=self.timeouts_s.get("default", 60.0),
        )

    def trajectory(self, name: str) -> TransitionTrajectory:
        ref = self.transition_trajectories.get(name)
        if ref is None or ref.knots is None:
            raise ConfigError(
                f"transition trajectory {name!r} missing or unresolved; "
                "load via load_mission_config or inline the knots"
            )
        return TransitionTrajectory.from_json_obj({"knots": ref.knots})


class FaultConfig(BaseModel):
    transition_failure_layers: list[int] = Field(default_factory=list)


class GaitConfig(BaseModel):
    swing_duration_s: float = 0.4
    settle_duration_s: float = 0.1
    apex_height_m: float = 0.06
    raibert_gain_s: float = 0.3
    reach_m: float = 0.18
    polygon_shrink_m: float = 0.03
    hip_x_m: float = 0.15
    hip_y_m: float = 0.10
    lean_bias_m: float = 0.03
    hold_patience_s: float = 1.5
    progress_window_s: float = 1.0


class FilterConfig(BaseModel):
    gamma_manway: float = 1.0
    gamma_tray: float = 1.0
    v_bound_mps: float = 0.3
    position_gain: float = 1.0


class SimConfig(BaseModel):
    """Simulator knobs; a fixed seed makes runs bit-identical."""

    dt_s: float = 0.01
    max_ticks: int = 30000
    seed: int = 0
    noise_sigma_m: float = 0.01
    velocity_lag: bool = False
    velocity_lag_tau_s: float = 0.1
    faults: FaultConfig = Field(default_factory=FaultConfig)
    gait: GaitConfig = Field(default_factory=GaitConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)


def _load_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def load_world_config(path: str | Path) -> WorldConfig:
    try:
        return WorldConfig.model_validate(_load_json(path))
    except ValidationError as exc:
        raise ConfigError(f"bad world config {path}: {exc}") from exc


def load_mission_config(path: str | Path) -> MissionConfig:
    """Load a mission file, inlining any referenced transition trajectories."""
    path = Path(path)
    try:
        cfg = MissionConfig.model_validate(_load_json(path))
    except ValidationError as exc:
        raise ConfigError(f"bad mission config {path}: {exc}") from exc
    resolved = {}
    for name, ref in cfg.transition_trajectories.items():
        if ref.knots is not None:
            resolved[name] = ref
        elif ref.file is not None:
            knots_obj = _load_json(path.parent / ref.file)
            knots = knots_obj["knots"] if isinstance(knots_obj, dict) else knots_obj
            resolved[name] = TrajectoryRef(knots=knots)
        else:
            raise ConfigError(f"transition trajectory {name!r} has neither file nor knots")
    return cfg.model_copy(update={"transition_trajectories": resolved})


def load_sim_config(path: str | Path) -> SimConfig:
    try:
        return SimConfig.model_validate(_load_json(path))
    except ValidationError as exc:
        raise ConfigError(f"bad sim config {path}: {exc}") from exc
