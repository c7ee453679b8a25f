"""Per-batch evaluation statistics and trailing-window smoothing."""
from __future__ import annotations

import numpy as np

from slobench.errors import ContractViolation


def aggregate(raw, batch: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Mean and total-variance std per batch of ``batch`` steps across N sequences.

    ``raw`` is (N, L) with L a multiple of ``batch``. Within a batch the
    variance is the mean over steps of the across-sequence variance plus the
    variance of the per-step means.
    """
    try:
        raw = np.asarray(raw, dtype=float)
    except ValueError as exc:
        raise ContractViolation(f"sequences must have equal length: {exc}") from None
    if raw.ndim != 2:
        raise ContractViolation(f"expected (N, L) rewards, got shape {raw.shape}")
    n, length = raw.shape
    if length % batch:
        raise ContractViolation(f"sequence length {length} is not a multiple of {batch}")
    x = raw.reshape(n, length // batch, batch)            # (N, B, T)
    # shifted by one sample per batch so constant batches give exactly zero spread
    ref = x[0, :, :1]
    y = x - ref
    step_mean = y.mean(axis=0)                            # (B, T)
    shifted_mu = step_mean.mean(axis=1)
    within = ((y - step_mean) ** 2).mean(axis=(0, 2))
    between = ((step_mean - shifted_mu[:, None]) ** 2).mean(axis=1)
    return ref[:, 0] + shifted_mu, np.sqrt(within + between)


def smooth(series, window: int = 15) -> np.ndarray:
    """Element k is the mean of elements max(0, k-window+1)..k."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    return np.array([x[max(0, k - window + 1):k + 1].mean() for k in range(len(x))])


def first_reaching(series, threshold: float) -> int | None:
    """Index of the first element >= threshold, or None."""
    hit = np.flatnonzero(np.asarray(series) >= threshold)
    return int(hit[0]) if len(hit) else None
