"""Scenario configuration files (TOML) and their validation."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .fuel import FuelCoefficients, fuel_profile
from .model import (
    ConfigurationError,
    Direction,
    IntersectionGeometry,
    Lane,
    VehicleLimits,
    four_approach_geometry,
)
from .scheduler import FirstVehiclePolicy

SECTIONS = ("geometry", "limits", "arrivals")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LaneSpec(_Section):
    id: str
    heading: Literal["N", "E", "S", "W"]


class GeometrySpec(_Section):
    L: float = Field(gt=0)
    S: float = Field(gt=0)
    delta: float = Field(gt=0)
    r: Optional[float] = Field(default=None, gt=0)
    lanes: Optional[list[LaneSpec]] = None

    @model_validator(mode="after")
    def _check(self) -> GeometrySpec:
        if self.delta >= self.S:
            raise ValueError(f"delta ({self.delta}) must be smaller than S ({self.S})")
        if self.r is not None and self.r > self.S:
            raise ValueError(f"r ({self.r}) must not exceed S ({self.S})")
        return self


class LimitsSpec(_Section):
    u_min: float = Field(lt=0)
    u_max: float = Field(gt=0)
    v_min: float = Field(ge=0)
    v_max: float = Field(gt=0)

    @model_validator(mode="after")
    def _check(self) -> LimitsSpec:
        if self.v_min >= self.v_max:
            raise ValueError(f"v_min ({self.v_min}) must be below v_max ({self.v_max})")
        return self


class PolicySpec(_Section):
    first_vehicle: Literal["energy_optimal", "throughput_optimal", "explicit"] = "energy_optimal"
    first_vehicle_tm: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> PolicySpec:
        if (self.first_vehicle == "explicit") != (self.first_vehicle_tm is not None):
            raise ValueError("first_vehicle_tm is required for, and only for, the explicit policy")
        return self


class VehicleSpec(_Section):
    t0: float = Field(ge=0)
    v0: float = Field(ge=0)
    lane: str


class ArrivalsSpec(_Section):
    kind: Literal["poisson", "deterministic"]
    seed: int = 0
    rate_veh_per_h: Optional[float] = Field(default=None, gt=0)
    horizon: Optional[float] = Field(default=None, gt=0)
    v_lo: Optional[float] = Field(default=None, ge=0)
    v_hi: Optional[float] = Field(default=None, ge=0)
    vehicles: Optional[list[VehicleSpec]] = None

    @model_validator(mode="after")
    def _check(self) -> ArrivalsSpec:
        if self.kind == "poisson":
            missing = [n for n in ("rate_veh_per_h", "horizon", "v_lo", "v_hi") if getattr(self, n) is None]
            if missing:
                raise ValueError(f"poisson arrivals need {', '.join(missing)}")
            if self.v_lo > self.v_hi:
                raise ValueError(f"v_lo ({self.v_lo}) exceeds v_hi ({self.v_hi})")
        elif self.vehicles is None:
            raise ValueError("deterministic arrivals need a vehicles list")
        return self


class SimulationSpec(_Section):
    sample_step: float = Field(default=0.1, gt=0)
    retry_delay: float = Field(default=0.5, gt=0)
    max_retries: int = Field(default=2000, ge=0)
    min_mz_speed: float = Field(default=1.0, gt=0)
    feasibility_tolerance: float = Field(default=1e-9, ge=0)
    reset_counter_when_empty: bool = False


class OutputSpec(_Section):
    dir: str = "out"
    trajectories: str = "trajectories.csv"
    metrics: str = "metrics.json"
    events: str = "events.jsonl"
    schedule: str = "schedule.csv"
    raster: str = "feasibility.csv"


class FuelSpec(_Section):
    profile: str = "kamal_illustrative"
    q0: Optional[float] = None
    q1: Optional[float] = None
    q2: Optional[float] = None
    q3: Optional[float] = None
    r0: Optional[float] = None
    r1: Optional[float] = None
    r2: Optional[float] = None


class BaselineSpec(_Section):
    green_ew: float = Field(default=30.0, gt=0)
    green_ns: float = Field(default=30.0, gt=0)
    all_red: float = Field(default=3.0, ge=0)
    offset: float = Field(default=0.0, ge=0)
    dt: float = Field(default=0.1, gt=0)
    desired_speed: Optional[float] = Field(default=None, gt=0)
    idm_accel: float = Field(default=1.0, gt=0)
    idm_decel: float = Field(default=2.0, gt=0)
    idm_headway: float = Field(default=1.5, gt=0)
    idm_jam_gap: float = Field(default=7.0, ge=0)
    idm_exponent: float = Field(default=4.0, gt=0)
    max_brake: float = Field(default=6.0, gt=0)


class FeasibilitySpec(_Section):
    k_t0: float = 0.0
    k_v0: float = Field(default=10.0, gt=0)
    k_tm: Optional[float] = None
    tau_min: float = 0.0
    tau_max: float = 60.0
    upsilon_min: float = 2.0
    upsilon_max: float = 13.0
    resolution: int = Field(default=200, ge=2)


class ScenarioConfig(_Section):
    name: str = "scenario"
    geometry: GeometrySpec
    limits: LimitsSpec
    policy: PolicySpec = PolicySpec()
    arrivals: ArrivalsSpec
    simulation: SimulationSpec = SimulationSpec()
    output: OutputSpec = OutputSpec()
    fuel: FuelSpec = FuelSpec()
    baseline: BaselineSpec = BaselineSpec()
    feasibility: FeasibilitySpec = FeasibilitySpec()

    @model_validator(mode="after")
    def _check(self) -> ScenarioConfig:
        lane_ids = {lane.id for lane in self.geometry.lanes} if self.geometry.lanes else {d.value for d in Direction}
        lim = self.limits
        arr = self.arrivals
        problems = []
        if arr.kind == "poisson" and not (lim.v_min <= arr.v_lo and arr.v_hi <= lim.v_max):
            problems.append(f"arrivals.v_lo/v_hi must lie within [{lim.v_min}, {lim.v_max}]")
        for n, veh in enumerate(arr.vehicles or []):
            if veh.lane not in lane_ids:
                problems.append(f"arrivals.vehicles[{n}].lane: unknown lane {veh.lane!r}")
            if not lim.v_min <= veh.v0 <= lim.v_max:
                problems.append(f"arrivals.vehicles[{n}].v0: {veh.v0} outside speed limits")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def to_geometry(self) -> IntersectionGeometry:
        g = self.geometry
        if g.lanes is None:
            return four_approach_geometry(g.L, g.S, g.delta, g.r)
        lanes = tuple(Lane(spec.id, Direction(spec.heading)) for spec in g.lanes)
        return IntersectionGeometry(g.L, g.S, lanes, g.delta, g.r)

    def to_limits(self) -> VehicleLimits:
        lim = self.limits
        return VehicleLimits(lim.u_min, lim.u_max, lim.v_min, lim.v_max)

    def to_policy(self) -> FirstVehiclePolicy:
        if self.policy.first_vehicle == "explicit":
            return FirstVehiclePolicy.explicit(self.policy.first_vehicle_tm)
        return FirstVehiclePolicy(self.policy.first_vehicle)

    def to_fuel(self) -> FuelCoefficients:
        overrides = {k: v for k, v in self.fuel.model_dump().items() if k != "profile" and v is not None}
        return fuel_profile(self.fuel.profile, **overrides)


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        out.append(f"{path}: {item['msg']}")
    return out


def validate_config(data: dict) -> ScenarioConfig:
    """Validate a raw mapping; every problem is reported, each with its field path."""
    data = dict(data)
    # Missing sections are validated as empty so their own required fields are listed.
    for section in SECTIONS:
        data.setdefault(section, {})
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigurationError("invalid scenario:\n  " + "\n  ".join(_format_errors(err))) from None


def parse_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigurationError(f"cannot read {path}: {err}") from None
    except tomli.TOMLDecodeError as err:
        raise ConfigurationError(f"{path}: {err}") from None
    return validate_config(raw)


def dump_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))


def with_overrides(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Apply dotted-path overrides such as ``arrivals.seed=3``; ``None`` values are skipped."""
    data = cfg.model_dump(mode="json", exclude_none=True)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return validate_config(data)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``case1``, ``poisson450`` ...)."""
    ref = resources.files("signalfree") / "scenarios" / f"{name}.cfg"
    path = Path(str(ref))
    if not path.exists():
        raise ConfigurationError(f"no bundled scenario named {name!r}")
    return path


def bundled_scenarios() -> list[str]:
    folder = Path(str(resources.files("signalfree") / "scenarios"))
    return sorted(p.stem for p in folder.glob("*.cfg"))
