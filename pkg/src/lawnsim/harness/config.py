"""Experiment specification: one JSON document per run.

Layout::

    {"case": "Delivery", "n_seeds": 1, "base_seed": 0,
     "threshold_db": "auto", "target_mean_degree": 3.5,
     "scenario": {...}, "channel": {...},
     "delivery": {...}}

Exactly one case block (``selection``, ``delivery`` or ``exttarget``) must be
present and it must match ``case``. Unknown keys anywhere raise ConfigError.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Union

from lawnsim.channel import ChannelParams
from lawnsim.errors import ConfigError
from lawnsim.exttarget import ExtTargetConfig, GpParams, NoiseParams
from lawnsim.scenario import ScenarioConfig, _dataclass_from_dict
from lawnsim.selection import ObjectiveWeights

# Threshold produced by calibrate_threshold() on the E-MT-only delivery
# deployment (DELIVERY_SCENARIO, seed 0) at a target mean degree of 3.5.
CALIBRATED_THRESHOLD_DB = -80.83108962197097

# Selection hotspot: the default E-MT density (128 per 4 km^2) on a patch
# holding four E-MTs.
HOTSPOT_SIDE_M = math.sqrt(4 * 2000.0 * 2000.0 / 128)


# Delivery involves E-MTs only: 64 UAV + 64 terrestrial, no users or targets.
DELIVERY_SCENARIO = ScenarioConfig(n_charging_users=0, n_sensing_targets=0)


class Case(str, enum.Enum):
    SELECTION = "Selection"
    DELIVERY = "Delivery"
    EXTTARGET = "ExtTarget"

    @property
    def block(self) -> str:
        return self.value.lower()


@dataclass(frozen=True)
class SelectionBlock:
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    qos_floor_db: float = 0.0
    brute_force: bool = False
    max_users: int = 12

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> SelectionBlock:
        doc = dict(doc)
        if "weights" in doc:
            doc["weights"] = _from_dict(ObjectiveWeights, doc["weights"], "selection.weights")
        return _from_dict(cls, doc, "selection")


@dataclass(frozen=True)
class DeliveryBlock:
    n_trials: int = 10_000
    t_proc_s: float = 1e-3
    write_trials: bool = False

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        if self.t_proc_s < 0:
            raise ConfigError("t_proc_s must be nonnegative")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> DeliveryBlock:
        return _from_dict(cls, doc, "delivery")


def _exttarget_from_dict(doc: Mapping[str, Any]) -> ExtTargetConfig:
    doc = dict(doc)
    if "noise" in doc:
        doc["noise"] = _from_dict(NoiseParams, doc["noise"], "exttarget.noise")
    if "gp" in doc:
        doc["gp"] = _from_dict(GpParams, doc["gp"], "exttarget.gp")
    return _from_dict(ExtTargetConfig, doc, "exttarget")


CaseBlock = Union[SelectionBlock, DeliveryBlock, ExtTargetConfig]
_BLOCK_PARSERS = {
    Case.SELECTION: SelectionBlock.from_dict,
    Case.DELIVERY: DeliveryBlock.from_dict,
    Case.EXTTARGET: _exttarget_from_dict,
}
_BLOCK_TYPES = {Case.SELECTION: SelectionBlock, Case.DELIVERY: DeliveryBlock,
                Case.EXTTARGET: ExtTargetConfig}
_TOP_KEYS = {"case", "n_seeds", "base_seed", "threshold_db", "target_mean_degree",
             "scenario", "channel"}


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _from_dict(cls, doc: Any, where: str):
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected an object")
    try:
        return _dataclass_from_dict(cls, doc)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class ExperimentSpec:
    case: Case
    block: CaseBlock
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    # A number in dB, or "auto" to calibrate each seed's graph to target_mean_degree.
    threshold_db: float | str = "auto"
    target_mean_degree: float = 3.5
    n_seeds: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.block, _BLOCK_TYPES[self.case]):
            raise ConfigError(f"case {self.case.value} needs a {self.case.block!r} block")
        if isinstance(self.threshold_db, str):
            if self.threshold_db != "auto":
                raise ConfigError("threshold_db must be a number or \"auto\"")
        elif not _is_number(self.threshold_db) or not math.isfinite(self.threshold_db):
            raise ConfigError("threshold_db must be a finite number or \"auto\"")
        if not _is_number(self.target_mean_degree) or not self.target_mean_degree > 0:
            raise ConfigError("target_mean_degree must be a positive number")
        if not _is_int(self.n_seeds) or self.n_seeds < 1:
            raise ConfigError("n_seeds must be a positive integer")
        if not _is_int(self.base_seed) or not 0 <= self.base_seed <= 2**64 - self.n_seeds:
            raise ConfigError("seeds must stay within the unsigned 64-bit range")

    @property
    def seeds(self) -> range:
        return range(self.base_seed, self.base_seed + self.n_seeds)

    def with_seeds(self, n_seeds: int) -> ExperimentSpec:
        return dataclasses.replace(self, n_seeds=n_seeds)

    def to_dict(self) -> dict[str, Any]:
        return {
            "case": self.case.value,
            "n_seeds": self.n_seeds,
            "base_seed": self.base_seed,
            "threshold_db": self.threshold_db,
            "target_mean_degree": self.target_mean_degree,
            "scenario": self.scenario.to_dict(),
            "channel": self.channel.to_dict(),
            self.case.block: dataclasses.asdict(self.block),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def spec_hash(self) -> str:
        """Digest of the canonical document; equal specs hash equally whatever their key order."""
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ExperimentSpec:
        if not isinstance(doc, Mapping):
            raise ConfigError("spec must be a JSON object")
        try:
            case = Case(doc.get("case"))
        except ValueError:
            raise ConfigError(f"unknown case {doc.get('case')!r}; "
                              f"expected one of {[c.value for c in Case]}") from None
        blocks = [c for c in Case if c.block in doc]
        if blocks != [case]:
            raise ConfigError(f"spec must contain exactly one case block, {case.block!r}")
        unknown = set(doc) - _TOP_KEYS - {case.block}
        if unknown:
            raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {k: doc[k] for k in
                                  ("n_seeds", "base_seed", "threshold_db", "target_mean_degree")
                                  if k in doc}
        return cls(case=case,
                   block=_BLOCK_PARSERS[case](doc[case.block]),
                   scenario=_from_dict(ScenarioConfig, doc.get("scenario", {}), "scenario"),
                   channel=_from_dict(ChannelParams, doc.get("channel", {}), "channel"),
                   **kwargs)


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return ExperimentSpec.from_dict(doc)


def default_spec(case: Case | str) -> ExperimentSpec:
    """Reference configuration for each case."""
    case = Case(case)
    if case is Case.DELIVERY:
        return ExperimentSpec(case, DeliveryBlock(), scenario=DELIVERY_SCENARIO,
                              threshold_db="auto", target_mean_degree=3.5)
    if case is Case.SELECTION:
        scen = ScenarioConfig(area_x=HOTSPOT_SIDE_M, area_y=HOTSPOT_SIDE_M, n_emt_uav=2,
                              n_emt_terrestrial=2, n_comm_users=16, n_charging_users=4,
                              n_sensing_targets=1)
        return ExperimentSpec(case, SelectionBlock(), scenario=scen,
                              threshold_db=CALIBRATED_THRESHOLD_DB, n_seeds=200)
    return ExperimentSpec(case, ExtTargetConfig(), n_seeds=100)
