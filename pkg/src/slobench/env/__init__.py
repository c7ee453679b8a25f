from slobench.env.actions import (CORNER_INDICES, FPS, GRID_SHAPE, N_ACTIONS, RESOLUTIONS,
                                  STREAMS, StreamConfig, corner_configs, enumerate_actions)
from slobench.env.metrics import FrameTrace, MetricsBatch, MetricsSample, compute_metrics
from slobench.env.thermal import ThermalSim, thermal_step

__all__ = ["CORNER_INDICES", "FPS", "GRID_SHAPE", "N_ACTIONS", "RESOLUTIONS", "STREAMS",
           "StreamConfig", "corner_configs", "enumerate_actions", "FrameTrace", "MetricsBatch",
           "MetricsSample", "compute_metrics", "ThermalSim", "thermal_step"]
