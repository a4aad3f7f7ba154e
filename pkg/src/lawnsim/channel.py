"""Line-of-sight free-space channel with a two-level array gain."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Mapping

from lawnsim.errors import ConfigError, DomainError
from lawnsim.scenario import Node, _dataclass_from_dict

SPEED_OF_LIGHT = 299_792_458.0  # m/s
_FSPL_CONST_DB = 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class ChannelParams:
    carrier_freq: float = 2.6e9
    tx_power_dbm: float = 30.0
    # -174 dBm/Hz over 10 MHz plus a 10 dB noise figure
    noise_dbm: float = -94.0
    mainlobe_gain_linear: float = 4.0
    offbeam_gain_linear: float = 1.0
    reflection_loss_db: float = 10.0
    wpt_efficiency: float = 0.5
    slot_duration_s: float = 1e-3

    def __post_init__(self):
        if self.carrier_freq <= 0:
            raise ConfigError("carrier_freq must be positive")
        if self.mainlobe_gain_linear <= 0 or self.offbeam_gain_linear <= 0:
            raise ConfigError("array gains must be positive")
        if not 0.0 < self.wpt_efficiency <= 1.0:
            raise ConfigError("wpt_efficiency must lie in (0, 1]")
        if self.slot_duration_s <= 0:
            raise ConfigError("slot_duration_s must be positive")

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def array_gain_db(self, steered: bool) -> float:
        g = self.mainlobe_gain_linear if steered else self.offbeam_gain_linear
        return 10.0 * math.log10(g)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ChannelParams:
        return _dataclass_from_dict(cls, doc)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class LinkGain:
    gain_db: float
    distance_m: float

    @property
    def linear(self) -> float:
        return db_to_linear(self.gain_db)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def fspl_db(distance: float, freq: float) -> float:
    """Friis free-space path loss ``20 log10(4 pi d f / c)`` in dB."""
    if not distance > 0:
        raise DomainError(f"path loss undefined for distance {distance}")
    if not freq > 0:
        raise DomainError(f"path loss undefined for frequency {freq}")
    return 20.0 * math.log10(distance) + 20.0 * math.log10(freq) + _FSPL_CONST_DB


def gain_at_distance(distance: float, params: ChannelParams, steered: bool) -> float:
    return params.array_gain_db(steered) - fspl_db(distance, params.carrier_freq)


def link_gain(tx: Node, rx: Node, params: ChannelParams, steered: bool) -> LinkGain:
    d = tx.pos.distance_to(rx.pos)
    if d <= 0:
        raise DomainError(f"nodes {tx.id} and {rx.id} are co-located")
    return LinkGain(gain_at_distance(d, params, steered), d)


def rss_dbm(tx_power_dbm: float, gain: LinkGain) -> float:
    return tx_power_dbm + gain.gain_db


def echo_gain_db(tx: Node, target: Node, rx: Node, params: ChannelParams) -> float:
    """Two-hop echo gain: both hops steered at the target, minus reflection loss."""
    d1 = tx.pos.distance_to(target.pos)
    d2 = target.pos.distance_to(rx.pos)
    if d1 <= 0 or d2 <= 0:
        raise DomainError("echo hop of zero length")
    return (gain_at_distance(d1, params, True) + gain_at_distance(d2, params, True)
            - params.reflection_loss_db)
