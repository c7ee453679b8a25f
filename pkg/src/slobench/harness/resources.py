"""Process CPU time and resident memory sampling."""
from __future__ import annotations

import time

try:
    import psutil
except ImportError:  # pragma: no cover - psutil is a declared dependency
    psutil = None


class ResourceMeter:
    """CPU milliseconds since the previous call plus current RSS in bytes."""

    def __init__(self):
        self._proc = psutil.Process() if psutil is not None else None
        self._last = time.process_time()

    def reset(self):
        """Restart the CPU-time baseline without recording (e.g. after an evaluation)."""
        self._last = time.process_time()

    def rss(self) -> int | None:
        if self._proc is None:
            return None
        try:
            return int(self._proc.memory_info().rss)
        except (psutil.Error, OSError):
            return None

    def measure(self) -> tuple[float, int | None]:
        now = time.process_time()
        delta = max(0.0, (now - self._last) * 1000.0)
        self._last = now
        return delta, self.rss()


def measure_resources(meter: ResourceMeter) -> tuple[float, int | None]:
    return meter.measure()
