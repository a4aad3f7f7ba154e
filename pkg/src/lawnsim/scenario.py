"""Node data model and random deployments of the low-altitude network."""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

from lawnsim.errors import ConfigError
from lawnsim.rng import make_rng


class NodeRole(str, enum.Enum):
    EMT_UAV = "EmtUav"
    EMT_TERRESTRIAL = "EmtTerrestrial"
    DMT = "Dmt"
    COMPUTING_CENTER = "ComputingCenter"
    COMM_USER = "CommUser"
    CHARGING_USER = "ChargingUser"
    SENSING_TARGET = "SensingTarget"

    @property
    def is_emt(self) -> bool:
        return self in (NodeRole.EMT_UAV, NodeRole.EMT_TERRESTRIAL)


@dataclass(frozen=True)
class Position3:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite position {self}")
        if self.z < 0:
            raise ValueError(f"negative altitude {self.z}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def distance_to(self, other: Position3) -> float:
        return math.dist(self.as_tuple(), other.as_tuple())


@dataclass(frozen=True)
class NodeFeatures:
    battery: float = 1.0
    compute_capacity: float = 1.0
    task_priority: int = 0
    active: bool = True

    def __post_init__(self):
        if not 0.0 <= self.battery <= 1.0:
            raise ValueError(f"battery {self.battery} outside [0, 1]")
        if self.compute_capacity < 0:
            raise ValueError("compute_capacity must be nonnegative")
        if self.task_priority < 0:
            raise ValueError("task_priority must be nonnegative")


@dataclass(frozen=True)
class Node:
    id: int
    role: NodeRole
    pos: Position3
    features: NodeFeatures = field(default_factory=NodeFeatures)
    # Airborne platform flag; terrestrial nodes sit at z = 0.
    aerial: bool = False

    @property
    def is_emt(self) -> bool:
        return self.role.is_emt


@dataclass(frozen=True)
class ScenarioConfig:
    area_x: float = 2000.0
    area_y: float = 2000.0
    alt_min: float = 10.0
    alt_max: float = 50.0
    n_emt_uav: int = 64
    n_emt_terrestrial: int = 64
    n_comm_users: int = 0
    frac_uav_users: float = 0.8
    n_charging_users: int = 4
    n_sensing_targets: int = 1
    seed: int = 0

    def __post_init__(self):
        counts = (self.n_emt_uav, self.n_emt_terrestrial, self.n_comm_users,
                  self.n_charging_users, self.n_sensing_targets)
        if any(int(c) != c or c < 0 for c in counts):
            raise ConfigError("node counts must be nonnegative integers")
        if not 0.0 <= self.frac_uav_users <= 1.0:
            raise ConfigError("frac_uav_users must lie in [0, 1]")
        if not 0.0 <= self.alt_min <= self.alt_max:
            raise ConfigError("need 0 <= alt_min <= alt_max")
        if self.area_x <= 0 or self.area_y <= 0:
            raise ConfigError("area dimensions must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def n_uav_users(self) -> int:
        return int(round(self.frac_uav_users * self.n_comm_users))

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ScenarioConfig:
        return _dataclass_from_dict(cls, doc)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    nodes: tuple[Node, ...]

    def __post_init__(self):
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise ValueError(f"node ids must be dense 0..N-1, got {node.id} at {i}")

    def __len__(self) -> int:
        return len(self.nodes)

    def ids_with_role(self, *roles: NodeRole) -> list[int]:
        return [n.id for n in self.nodes if n.role in roles]

    @property
    def emt_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_emt]

    def role_counts(self) -> dict[NodeRole, int]:
        counts = {r: 0 for r in NodeRole}
        for n in self.nodes:
            counts[n.role] += 1
        return counts

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "nodes": [
                {
                    "id": n.id,
                    "role": n.role.value,
                    "aerial": n.aerial,
                    "pos": list(n.pos.as_tuple()),
                    "features": dataclasses.asdict(n.features),
                }
                for n in self.nodes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> Scenario:
        nodes = tuple(
            Node(
                id=int(d["id"]),
                role=NodeRole(d["role"]),
                pos=Position3(*map(float, d["pos"])),
                features=NodeFeatures(**d["features"]),
                aerial=bool(d.get("aerial", False)),
            )
            for d in doc["nodes"]
        )
        return cls(ScenarioConfig.from_dict(doc["config"]), nodes)


def _dataclass_from_dict(cls, doc: Mapping[str, Any]):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**doc)


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Place all nodes uniformly at random, deterministically in ``config.seed``.

    Ids (and draw order) run: terrestrial E-MTs, UAV E-MTs, UAV comm users,
    terrestrial comm users, charging users, sensing targets. Each node draws
    x then y, then z if airborne; charging users finally draw their battery.
    """
    rng = make_rng(config.seed)
    cfg = config
    n_uav_users = cfg.n_uav_users
    groups: list[tuple[NodeRole, int, bool]] = [
        (NodeRole.EMT_TERRESTRIAL, cfg.n_emt_terrestrial, False),
        (NodeRole.EMT_UAV, cfg.n_emt_uav, True),
        (NodeRole.COMM_USER, n_uav_users, True),
        (NodeRole.COMM_USER, cfg.n_comm_users - n_uav_users, False),
        (NodeRole.CHARGING_USER, cfg.n_charging_users, True),
        (NodeRole.SENSING_TARGET, cfg.n_sensing_targets, True),
    ]
    nodes: list[Node] = []
    for role, count, aerial in groups:
        for _ in range(count):
            x = rng.uniform(0.0, cfg.area_x)
            y = rng.uniform(0.0, cfg.area_y)
            z = rng.uniform(cfg.alt_min, cfg.alt_max) if aerial else 0.0
            features = NodeFeatures()
            if role is NodeRole.CHARGING_USER:
                features = NodeFeatures(battery=float(rng.uniform(0.05, 0.20)))
            nodes.append(Node(len(nodes), role, Position3(float(x), float(y), float(z)),
                              features, aerial))
    return Scenario(config, tuple(nodes))


def charging_priority(battery: float, battery_threshold: float) -> int:
    """Priority grows from 0 toward 10 as the battery drains below the threshold."""
    return max(0, math.floor((battery_threshold - battery) / battery_threshold * 10))


def reclassify_nodes(scenario: Scenario, battery_threshold: float) -> Scenario:
    """Turn low-battery UAVs into charging users with battery-driven priority.

    Sensing targets are not network members and are never reclassified.
    """
    if not 0.0 < battery_threshold < 1.0:
        raise ValueError("battery_threshold must lie strictly inside (0, 1)")
    out = []
    for node in scenario.nodes:
        low = node.features.battery < battery_threshold
        if node.aerial and low and node.role is not NodeRole.SENSING_TARGET:
            prio = charging_priority(node.features.battery, battery_threshold)
            node = replace(node, role=NodeRole.CHARGING_USER,
                           features=replace(node.features, task_priority=prio))
        out.append(node)
    return Scenario(scenario.config, tuple(out))


def scenario_from_nodes(nodes: Iterable[Node], config: ScenarioConfig | None = None) -> Scenario:
    """Wrap hand-built nodes (renumbered densely) into a Scenario."""
    nodes = [replace(n, id=i) for i, n in enumerate(nodes)]
    return Scenario(config or ScenarioConfig(n_emt_uav=0, n_emt_terrestrial=0,
                                             n_charging_users=0, n_sensing_targets=0),
                    tuple(nodes))
