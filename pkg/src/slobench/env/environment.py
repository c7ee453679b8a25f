"""The streaming environment seen by the agents: sampling plus scenario transformations."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from slobench.env.actions import StreamConfig
from slobench.env.metrics import MetricsBatch
from slobench.env.thermal import ThermalSim, thermal_level, thermal_step
from slobench.errors import ContractViolation
from slobench.slo import SloThresholds, batch_rewards


def apply_cap(batch: MetricsBatch, cap: float) -> MetricsBatch:
    """Clamp the aggregate byte rate of each sample to ``cap``.

    Throughput is per stream, so the aggregate is ``throughput * streams``.
    Where it exceeds the cap, throughput shrinks and latency grows by the same
    factor (frames queue behind the bottleneck). Idempotent.
    """
    limit = cap / batch.stream_count
    if np.all(batch.throughput <= limit):
        return batch
    throughput = np.minimum(batch.throughput, limit)
    return replace(batch, throughput=throughput,
                   latency=batch.latency * (batch.throughput / throughput))


def apply_thermal(batch: MetricsBatch, sim: ThermalSim) -> MetricsBatch:
    """Replace the thermal readings by the heating model, one step per sample."""
    levels = np.empty(len(batch), dtype=np.int64)
    for i, tp in enumerate(batch.throughput):
        levels[i] = thermal_step(sim, float(tp))[1]
    return replace(batch, thermal=levels)


def sample_batch(source, config: StreamConfig, n: int, cap: float | None = None,
                 thermal: ThermalSim | None = None) -> MetricsBatch:
    """Draw n samples for ``config`` and apply the scenario transformations."""
    if n < 1:
        raise ContractViolation(f"batch size must be >= 1, got {n}")
    batch = source.draw(config.index, n)
    if cap is not None:
        batch = apply_cap(batch, cap)
    if thermal is not None:
        batch = apply_thermal(batch, thermal)
    return batch


class StreamingEnv:
    """One client device. The agent's configuration applies to every sample drawn."""

    def __init__(self, source, slos: SloThresholds, cap: float | None = None,
                 thermal_k: float | None = None, start: StreamConfig | int = 0):
        self.source = source
        self.slos = slos
        self.cap = cap
        self.thermal = ThermalSim(k=thermal_k) if thermal_k is not None else None
        self.config = start if isinstance(start, StreamConfig) else StreamConfig.from_index(start)

    def set_slos(self, slos: SloThresholds):
        """Swap the thresholds; takes effect for the next batch drawn."""
        self.slos = slos

    def configure(self, action) -> None:
        self.config = action if isinstance(action, StreamConfig) else StreamConfig.from_index(action)

    def sample(self, n: int) -> tuple[MetricsBatch, np.ndarray]:
        """n samples at the current configuration with their rewards."""
        batch = sample_batch(self.source, self.config, n, self.cap, self.thermal)
        return batch, batch_rewards(batch, self.slos)

    @property
    def thermal_state(self) -> int:
        return 0 if self.thermal is None else thermal_level(self.thermal.T)
