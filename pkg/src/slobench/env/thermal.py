"""Device heating driven by throughput, relaxed with Newton's law of cooling."""
from __future__ import annotations

import math
from dataclasses import dataclass

KAPPA = 0.364
LAMBDA = 0.05  # per MiB/s


def target_temperature(throughput: float, kappa: float = KAPPA, lam: float = LAMBDA) -> float:
    return min(1.0, kappa * math.exp(lam * throughput / (1024 * 1024)))


def thermal_level(temperature: float) -> int:
    """Four equal bins of [0, 1] -> nominal, fair, serious, critical."""
    return min(3, int(math.floor(4.0 * temperature)))


@dataclass
class ThermalSim:
    k: float
    T: float = 0.0
    kappa: float = KAPPA
    lam: float = LAMBDA

    def __post_init__(self):
        if not 0.0 <= self.T <= 1.0:
            raise ValueError(f"temperature {self.T} outside [0, 1]")

    def target(self, throughput: float) -> float:
        return target_temperature(throughput, self.kappa, self.lam)


def thermal_step(sim: ThermalSim, throughput: float) -> tuple[float, int]:
    """Advance one environment step; mutates ``sim.T`` and returns (T, level)."""
    t_star = sim.target(throughput)
    new_t = t_star + (sim.T - t_star) * math.exp(-sim.k)
    sim.T = min(1.0, max(0.0, new_t))
    return sim.T, thermal_level(sim.T)
