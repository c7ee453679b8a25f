"""24-wide observation vectors for the RL agents."""
from __future__ import annotations

import numpy as np

from slobench.env.actions import FPS, RESOLUTIONS, STREAMS, StreamConfig
from slobench.env.metrics import MetricsBatch
from slobench.errors import DomainError

OBS_DIM = 5 + 4 + len(STREAMS) + len(RESOLUTIONS) + len(FPS)
BLOCKS = {"continuous": slice(0, 5), "thermal": slice(5, 9), "streams": slice(9, 15),
          "resolution": slice(15, 18), "fps": slice(18, 24)}


def _scale(std: np.ndarray) -> np.ndarray:
    # zero-variance features are only centred
    return np.where(std > 0, std, 1.0)


def featurize_batch(batch, config: StreamConfig, stats) -> np.ndarray:
    """(n, 24) observations for samples collected at ``config``."""
    if not isinstance(config, StreamConfig):
        raise DomainError(f"{config!r} is not a StreamConfig")
    n = len(batch)
    out = np.zeros((n, OBS_DIM))
    out[:, :5] = (batch.continuous() - stats.mean) / _scale(np.asarray(stats.std))
    thermal = np.asarray(batch.thermal)
    if np.any((thermal < 0) | (thermal > 3)):
        raise DomainError("thermal state outside 0..3")
    out[np.arange(n), 5 + thermal] = 1.0
    i, j, k = config.grid_index
    out[:, 9 + i] = 1.0
    out[:, 15 + j] = 1.0
    out[:, 18 + k] = 1.0
    return out


def featurize(sample, config: StreamConfig, stats) -> np.ndarray:
    """Single observation; ``sample`` is a MetricsSample."""
    return featurize_batch(MetricsBatch.from_samples([sample]), config, stats)[0]
