"""SLO thresholds, per-metric compliance levels and the aggregate compliance score."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from slobench.errors import ConfigError, DomainError

MBPS = 125_000.0  # decimal megabit per second in bytes/s

SLO_NAMES = ("rs", "sf", "lat", "tp", "ts")
QOE = ("rs", "sf")
QOS = ("lat", "tp", "ts")


@dataclass(frozen=True)
class SloThresholds:
    tp_max: float   # bytes/s
    lat_max: float  # s
    sf_min: float   # streams
    rs_max: float
    ts_max: float   # thermal level

    def __post_init__(self):
        for name in ("tp_max", "lat_max", "sf_min", "rs_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}={getattr(self, name)} must be > 0")
        if not self.ts_max >= 0:
            raise ConfigError(f"ts_max={self.ts_max} must be >= 0")

    @classmethod
    def from_mapping(cls, values: dict) -> "SloThresholds":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown SLO keys {sorted(unknown)}")
        missing = known - set(values)
        if missing:
            raise ConfigError(f"missing SLO keys {sorted(missing)}")
        return cls(**{k: float(v) for k, v in values.items()})


_BASIC = SloThresholds(tp_max=10 * MBPS, lat_max=1 / 15, sf_min=5, rs_max=1.6, ts_max=1)

PRESETS: dict[str, SloThresholds] = {
    "basic": _BASIC,
    "instant-shift": _BASIC,
    "gradual-1": _BASIC,
    "gradual-2": _BASIC,
    "slo-change-1": SloThresholds(tp_max=0.256 * MBPS, lat_max=1 / 30, sf_min=20,
                                  rs_max=0.25, ts_max=1),
    "slo-change-2": SloThresholds(tp_max=5 * MBPS, lat_max=1 / 15, sf_min=10,
                                  rs_max=1.0, ts_max=1),
}


def preset(name: str) -> SloThresholds:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown SLO preset {name!r}; choose from {sorted(PRESETS)}") from None


def slo_level(value: float, *, upper: float | None = None, lower: float | None = None) -> float:
    """Compliance of one reading against a one-sided bound, clipped to 1."""
    if (upper is None) == (lower is None):
        raise ValueError("exactly one of upper/lower must be given")
    if value < 0:
        raise DomainError(f"negative metric value {value}")
    if upper is not None:
        if value == 0:
            return 1.0
        return min(1.0, upper / value)
    return min(1.0, value / lower)


@dataclass(frozen=True)
class ComplianceBreakdown:
    s_rs: float
    s_sf: float
    s_lat: float
    s_tp: float
    s_ts: float
    s_qoe: float
    s_qos: float
    s_overall: float

    @classmethod
    def from_levels(cls, s_rs, s_sf, s_lat, s_tp, s_ts) -> "ComplianceBreakdown":
        qoe = (s_rs + s_sf) / 2.0
        qos = (s_lat + s_tp + s_ts) / 3.0
        return cls(s_rs, s_sf, s_lat, s_tp, s_ts, qoe, qos, (qoe + qos) / 2.0)

    def level(self, name: str) -> float:
        return getattr(self, "s_" + name)


def compliance(sample, slos: SloThresholds) -> ComplianceBreakdown:
    return ComplianceBreakdown.from_levels(
        s_rs=slo_level(sample.render_scale, upper=slos.rs_max),
        s_sf=slo_level(sample.stream_count, lower=slos.sf_min),
        s_lat=slo_level(sample.latency, upper=slos.lat_max),
        s_tp=slo_level(sample.throughput, upper=slos.tp_max),
        s_ts=slo_level(sample.thermal, upper=slos.ts_max),
    )


def reward(breakdown: ComplianceBreakdown) -> float:
    return breakdown.s_overall


def _upper(values: np.ndarray, bound: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.minimum(1.0, bound / values)
    out[values == 0] = 1.0
    return out


def compliance_levels(batch, slos: SloThresholds) -> np.ndarray:
    """(n, 5) matrix of the per-SLO levels in SLO_NAMES order for a MetricsBatch."""
    for name in ("render_scale", "latency", "throughput"):
        if np.any(getattr(batch, name) < 0):
            raise DomainError(f"negative {name} in batch")
    return np.stack([
        _upper(batch.render_scale, slos.rs_max),
        np.minimum(1.0, np.asarray(batch.stream_count, dtype=float) / slos.sf_min),
        _upper(batch.latency, slos.lat_max),
        _upper(batch.throughput, slos.tp_max),
        _upper(batch.thermal, slos.ts_max),
    ], axis=1)


def overall(levels: np.ndarray) -> np.ndarray:
    """Aggregate (n, 5) level rows into the overall score S."""
    qoe = (levels[:, 0] + levels[:, 1]) / 2.0
    qos = (levels[:, 2] + levels[:, 3] + levels[:, 4]) / 3.0
    return (qoe + qos) / 2.0


def batch_rewards(batch, slos: SloThresholds) -> np.ndarray:
    return overall(compliance_levels(batch, slos))
