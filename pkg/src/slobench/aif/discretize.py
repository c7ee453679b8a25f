"""Mapping of raw metrics and SLO levels onto the agent's ordinal bins."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from slobench.errors import DomainError

# metric bins [0,.2], (.2,.4], (.4,.6], (.6,.8], (.8,inf) -> labels 1..5
METRIC_EDGES = np.array([0.2, 0.4, 0.6, 0.8])
# SLO bins [0,.2), [.2,.4), [.4,.6), [.6,.8), [.8,1), {1} -> labels 0..5
SLO_EDGES = np.array([0.2, 0.4, 0.6, 0.8, 1.0])

VARIABLES = ("action", "cpu", "mem", "s_rs", "s_sf", "s_lat", "s_tp", "s_ts")
CARDINALITY = (108, 5, 5, 6, 6, 6, 6, 6)
SLO_VARIABLES = VARIABLES[3:]
QOE_VARIABLES = ("s_rs", "s_sf")
QOS_VARIABLES = ("s_lat", "s_tp", "s_ts")


def metric_bin(value):
    """Label 1..5 for a non-SLO metric ratio."""
    return np.searchsorted(METRIC_EDGES, value, side="left") + 1


def slo_bin(level):
    """Label 0..5 for a compliance level in [0, 1]."""
    return np.searchsorted(SLO_EDGES, level, side="right")


def mu(label):
    """Approximate compliance represented by an SLO bin."""
    arr = np.asarray(label)
    if np.any((arr < 0) | (arr > 5)) or not np.all(np.equal(np.mod(arr, 1), 0)):
        raise DomainError(f"SLO bin {label} outside 0..5")
    out = np.minimum(1.0, 0.2 * arr + 0.1)
    return float(out) if out.ndim == 0 else out


MU = mu(np.arange(6))


@dataclass(frozen=True)
class DiscretizedObservation:
    cpu_bin: int
    mem_bin: int
    s_rs_bin: int
    s_sf_bin: int
    s_lat_bin: int
    s_tp_bin: int
    s_ts_bin: int
    action_index: int

    def row(self) -> np.ndarray:
        """State indices in VARIABLES order (metric labels shifted to start at 0)."""
        return np.array([self.action_index, self.cpu_bin - 1, self.mem_bin - 1, self.s_rs_bin,
                         self.s_sf_bin, self.s_lat_bin, self.s_tp_bin, self.s_ts_bin],
                        dtype=np.int64)


def discretize(sample, breakdown, action_index: int) -> DiscretizedObservation:
    return DiscretizedObservation(
        cpu_bin=int(metric_bin(sample.cpu)), mem_bin=int(metric_bin(sample.mem)),
        s_rs_bin=int(slo_bin(breakdown.s_rs)), s_sf_bin=int(slo_bin(breakdown.s_sf)),
        s_lat_bin=int(slo_bin(breakdown.s_lat)), s_tp_bin=int(slo_bin(breakdown.s_tp)),
        s_ts_bin=int(slo_bin(breakdown.s_ts)), action_index=int(action_index))


def discretize_batch(batch, levels: np.ndarray, action_index: int) -> np.ndarray:
    """(n, 8) state-index matrix for a MetricsBatch and its (n, 5) SLO levels.

    ``levels`` columns follow the rs, sf, lat, tp, ts order of the SLO engine,
    which matches the SLO variable order here.
    """
    n = len(batch)
    out = np.empty((n, len(VARIABLES)), dtype=np.int64)
    out[:, 0] = action_index
    out[:, 1] = metric_bin(batch.cpu) - 1
    out[:, 2] = metric_bin(batch.mem) - 1
    out[:, 3:] = slo_bin(levels)
    return out
