"""Frame traces and the six client metrics computed from them."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Iterator, Sequence

import numpy as np

from slobench.errors import DomainError, MalformedTraceError

U_REF = 2.0    # 200 % CPU
R_REF = 200.0  # MiB


@dataclass(frozen=True)
class MetricsSample:
    cpu: float
    mem: float
    throughput: float  # bytes/s
    latency: float  # s
    render_scale: float
    thermal: int
    stream_count: int

    def __post_init__(self):
        for name in ("cpu", "mem", "throughput", "latency", "render_scale"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name}={getattr(self, name)} must be >= 0")
        if self.thermal not in (0, 1, 2, 3):
            raise DomainError(f"thermal={self.thermal} not in 0..3")


METRIC_COLUMNS = ("cpu", "mem", "throughput", "latency", "render_scale")


@dataclass
class MetricsBatch(Sequence[MetricsSample]):
    """Column-oriented batch of samples; behaves as a sequence of MetricsSample."""

    cpu: np.ndarray
    mem: np.ndarray
    throughput: np.ndarray
    latency: np.ndarray
    render_scale: np.ndarray
    thermal: np.ndarray
    stream_count: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            dtype = np.int64 if f.name in ("thermal", "stream_count") else np.float64
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=dtype).reshape(-1))
        n = len(self.cpu)
        if any(len(getattr(self, f.name)) != n for f in fields(self)):
            raise ValueError("ragged metrics batch")

    def __len__(self):
        return len(self.cpu)

    def __getitem__(self, i):
        if isinstance(i, slice) or isinstance(i, np.ndarray):
            return self.take(np.arange(len(self))[i] if isinstance(i, slice) else i)
        return MetricsSample(
            cpu=float(self.cpu[i]), mem=float(self.mem[i]), throughput=float(self.throughput[i]),
            latency=float(self.latency[i]), render_scale=float(self.render_scale[i]),
            thermal=int(self.thermal[i]), stream_count=int(self.stream_count[i]))

    def __iter__(self) -> Iterator[MetricsSample]:
        for i in range(len(self)):
            yield self[i]

    def take(self, idx) -> "MetricsBatch":
        return MetricsBatch(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def continuous(self) -> np.ndarray:
        """(n, 5) matrix of the continuous metrics in METRIC_COLUMNS order."""
        return np.stack([getattr(self, c) for c in METRIC_COLUMNS], axis=1)

    @classmethod
    def from_samples(cls, samples: Iterable[MetricsSample]) -> "MetricsBatch":
        samples = list(samples)
        return cls(**{f.name: [getattr(s, f.name) for s in samples] for f in fields(cls)})

    @classmethod
    def concat(cls, batches: Sequence["MetricsBatch"]) -> "MetricsBatch":
        return cls(**{f.name: np.concatenate([getattr(b, f.name) for b in batches])
                      for f in fields(cls)})


@dataclass
class FrameTrace:
    """Per-stream frame records for one configuration timestep.

    Arrays are shaped (streams, frames). ``src_w``/``src_h`` hold the stream's
    own pixel dimensions, ``tile_w``/``tile_h`` the rendered area on screen.
    """

    timestamps: np.ndarray
    sizes: np.ndarray
    tile_w: np.ndarray
    tile_h: np.ndarray
    src_w: np.ndarray
    src_h: np.ndarray

    @property
    def n_streams(self) -> int:
        return self.timestamps.shape[0]

    @property
    def n_frames(self) -> int:
        return self.timestamps.shape[1]

    def validate(self):
        shape = self.timestamps.shape
        if self.timestamps.ndim != 2 or shape[0] < 1:
            raise MalformedTraceError(f"bad trace shape {shape}")
        if shape[1] < 2:
            raise MalformedTraceError(f"trace has T_c={shape[1]} < 2 frames")
        for name in ("sizes", "tile_w", "tile_h", "src_w", "src_h"):
            if getattr(self, name).shape != shape:
                raise MalformedTraceError(f"{name} shape {getattr(self, name).shape} != {shape}")
        if not np.all(np.diff(self.timestamps, axis=1) > 0):
            raise MalformedTraceError("timestamps must be strictly increasing per stream")
        for name in ("sizes", "tile_w", "tile_h", "src_w", "src_h"):
            if not np.all(getattr(self, name) > 0):
                raise MalformedTraceError(f"{name} must be positive")


def compute_metrics(trace: FrameTrace, cpu_series, mem_series, thermal_series,
                    u_ref: float = U_REF, r_ref: float = R_REF) -> MetricsSample:
    """Evaluate latency, throughput, render scale, CPU, memory and thermal state.

    ``cpu_series`` is the actual CPU usage per frame timestep in cores
    (1.0 = 100 %), ``mem_series`` the resident memory in MiB and
    ``thermal_series`` the discrete device state; all have length T_c. Sums
    start at the second frame timestep.
    """
    trace.validate()
    n_frames = trace.n_frames
    cpu_series = np.asarray(cpu_series, dtype=float)
    mem_series = np.asarray(mem_series, dtype=float)
    thermal_series = np.asarray(thermal_series)
    for name, s in (("cpu", cpu_series), ("mem", mem_series), ("thermal", thermal_series)):
        if s.shape != (n_frames,):
            raise MalformedTraceError(f"{name} series has shape {s.shape}, expected ({n_frames},)")

    alpha = 1.0 / (n_frames - 1)
    beta = 1.0 / trace.n_streams
    gaps = np.diff(trace.timestamps, axis=1)
    latency = alpha * np.sum(beta * gaps.sum(axis=0))
    throughput = alpha * np.sum(beta * (trace.sizes[:, 1:] / gaps).sum(axis=0))
    ratio = (trace.tile_w * trace.tile_h) / (trace.src_w * trace.src_h)
    render_scale = alpha * np.sum(beta * np.sqrt(ratio[:, 1:]).sum(axis=0))
    cpu = alpha * np.sum(cpu_series[1:] / u_ref)
    mem = alpha * np.sum(mem_series[1:] / r_ref)
    thermal = int(np.max(thermal_series[1:]))
    return MetricsSample(cpu=float(cpu), mem=float(mem), throughput=float(throughput),
                         latency=float(latency), render_scale=float(render_scale),
                         thermal=thermal, stream_count=trace.n_streams)
