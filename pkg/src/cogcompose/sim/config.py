"""Simulation configuration and the YAML experiment file schema."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..attention import C1, NAMED_CONFIGS, GlobalParams
from ..errors import ConfigInvalid

MOBILITY_CLASSES = {"slow": (0.0, 2.0), "medium": (2.0, 8.0), "fast": (8.0, 13.0)}
MODES = ("flexibility", "adaptability")


@dataclass(frozen=True)
class SimConfig:
    users: int = 1
    density: int = 20
    cl: int = 5
    mobility: str = "slow"
    abstract_services: int = 10
    concrete_per_abstract: int = 4
    comm_range: float = 250.0
    matchmaking_delay: float = 0.2
    runs: int = 100
    conds_min: int = 1
    conds_max: int = 4
    seed: int = 0
    arena: tuple[float, float] = (1000.0, 1000.0)
    mode: str = "flexibility"
    params: GlobalParams = C1
    config_id: str = "C1"
    cycle_budget: int = 2000
    stall_timeout: float = 10.0
    move_step: float = 0.25
    mobility_epoch: float = 2.0
    context_period: int = 10
    context_pool: int = 3
    latency_range: tuple[float, float] = (0.1, 1.0)
    level_weights: tuple[float, float, float, float] = (0.3, 0.3, 0.3, 0.1)
    replacement_services: int = 2
    churn_uptime: float = 60.0
    churn_downtime: float = 15.0
    fail_active_cm: bool = False
    hosting: str = "random"  # or "round-robin"
    audit: bool = False
    trace: bool = False
    services: tuple = ()
    goals: tuple = ()

    def __post_init__(self):
        validate(self)

    @property
    def switch_after(self) -> int:
        return math.ceil(self.cl / 2)

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


def validate(c: SimConfig) -> None:
    problems = []
    if c.users < 0:
        problems.append("users must be >= 0")
    if c.density < 1:
        problems.append("density must be >= 1")
    if c.mobility not in MOBILITY_CLASSES:
        problems.append(f"mobility must be one of {sorted(MOBILITY_CLASSES)}")
    if c.mode not in MODES:
        problems.append(f"mode must be one of {MODES}")
    if c.cl < 1:
        problems.append("composition length must be >= 1")
    if c.runs < 1:
        problems.append("runs must be >= 1")
    if not 1 <= c.conds_min <= c.conds_max:
        problems.append("need 1 <= conds_min <= conds_max")
    if c.comm_range <= 0 or min(c.arena) <= 0:
        problems.append("range and arena must be positive")
    if c.concrete_per_abstract < 1:
        problems.append("need at least one concrete service per abstract service")
    if c.matchmaking_delay < 0 or c.stall_timeout <= 0 or c.cycle_budget < 1:
        problems.append("delays, stall timeout and cycle budget must be positive")
    if c.churn_uptime < 0 or c.churn_downtime < 0:
        problems.append("churn times must be non-negative (0 disables churn)")
    if abs(sum(c.level_weights) - 1.0) > 1e-9 or len(c.level_weights) != 4:
        problems.append("level_weights must be four probabilities summing to 1")
    if c.hosting not in ("random", "round-robin"):
        problems.append("hosting must be 'random' or 'round-robin'")
    if problems:
        raise ConfigInvalid("; ".join(problems))


def resolve_params(spec: Any) -> tuple[GlobalParams, str]:
    """Accept ``"C1"``, ``"C2"``, a 5-sequence, a mapping, or a YAML/JSON file path."""
    if isinstance(spec, GlobalParams):
        return spec, "custom"
    if isinstance(spec, str):
        if spec.upper() in NAMED_CONFIGS:
            return NAMED_CONFIGS[spec.upper()], spec.upper()
        path = Path(spec)
        if not path.exists():
            raise ConfigInvalid(f"unknown attention configuration {spec!r}")
        data = yaml.safe_load(path.read_text())
        params, _ = resolve_params(data.get("params", data) if isinstance(data, dict) else data)
        return params, (data.get("id") if isinstance(data, dict) else None) or path.stem
    try:
        if isinstance(spec, Mapping):
            p = GlobalParams(**{k: float(spec[k]) for k in ("theta", "pi", "phi", "gamma", "delta")})
        else:
            p = GlobalParams.from_tuple(spec)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigInvalid(f"bad attention parameters {spec!r}: {e}") from None
    for name, named in NAMED_CONFIGS.items():
        if named == p:
            return p, name
    return p, "custom"


_TUPLE_FIELDS = {"arena", "latency_range", "level_weights"}


def from_mapping(sim: Mapping[str, Any] | None, services=(), goals=()) -> SimConfig:
    sim = dict(sim or {})
    known = {f.name for f in fields(SimConfig)}
    unknown = set(sim) - known - {"attention"}
    if unknown:
        raise ConfigInvalid(f"unknown simulation keys: {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for k, v in sim.items():
        if k == "attention":
            kw["params"], kw["config_id"] = resolve_params(v)
        elif k == "params":
            kw["params"], cid = resolve_params(v)
            kw.setdefault("config_id", cid)
        elif k in _TUPLE_FIELDS:
            kw[k] = tuple(float(x) for x in v)
        else:
            kw[k] = v
    try:
        return SimConfig(services=tuple(services or ()), goals=tuple(goals or ()), **kw)
    except TypeError as e:
        raise ConfigInvalid(str(e)) from None


@dataclass
class ExperimentFile:
    simulation: SimConfig
    grid: dict[str, list] = field(default_factory=dict)


GRID_AXES = {"mobility", "density", "cl", "attention", "users", "mode"}


def load_experiment(path: str | Path) -> ExperimentFile:
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigInvalid(f"cannot read {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")
    unknown = set(data) - {"simulation", "grid", "services", "goals"}
    if unknown:
        raise ConfigInvalid(f"{path}: unknown sections {sorted(unknown)}")
    cfg = from_mapping(data.get("simulation"), data.get("services") or (), data.get("goals") or ())
    grid = data.get("grid") or {}
    if not isinstance(grid, dict) or set(grid) - GRID_AXES:
        raise ConfigInvalid(f"{path}: grid axes must be among {sorted(GRID_AXES)}")
    return ExperimentFile(cfg, {k: list(v) for k, v in grid.items()})


def expand_grid(base: SimConfig, grid: Mapping[str, list]) -> list[SimConfig]:
    """Cartesian product over the grid axes, in axis-name order."""
    cells = [base]
    for axis in sorted(grid):
        nxt = []
        for c in cells:
            for v in grid[axis]:
                if axis == "attention":
                    p, cid = resolve_params(v)
                    nxt.append(replace(c, params=p, config_id=cid))
                else:
                    nxt.append(replace(c, **{axis: v}))
        cells = nxt
    return cells


def config_summary(c: SimConfig) -> dict:
    d = asdict(c)
    d["params"] = list(c.params.as_tuple())
    d.pop("services")
    d.pop("goals")
    return d
