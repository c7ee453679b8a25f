"""Synthetic client device: frame traces plus CPU, memory and thermal series.

The generator replaces the measured traces of a real phone. Frame sizes
follow ``resolution**2 * bits_per_pixel / 8`` and inter-arrival gaps follow
``1/fps`` plus a decode delay that grows with the decoded pixel rate. A
bandwidth cap clamps the aggregate byte rate by stretching the gaps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from slobench.env.actions import FPS, RESOLUTIONS, STREAMS, StreamConfig
from slobench.env.metrics import R_REF, U_REF, FrameTrace, MetricsBatch

SCREEN = (390, 780)
MAX_PIXELS = STREAMS[-1] * RESOLUTIONS[-1] ** 2
MAX_PIXEL_RATE = MAX_PIXELS * FPS[-1]


@dataclass(frozen=True)
class TraceModel:
    bits_per_pixel: float = 0.08
    jitter_sigma: float = 0.1
    size_sigma: float = 0.1
    metric_sigma: float = 0.1
    delay_base_s: float = 0.015
    delay_load_s: float = 0.02
    window_s: float = 1.0
    cpu_peak: float = 0.9   # fraction of U_REF reached by the largest config
    mem_peak: float = 0.9   # fraction of R_REF
    hot_cpu_fraction: float = 0.7
    hot_probability: float = 0.1

    @classmethod
    def ideal(cls, **overrides) -> "TraceModel":
        """Noise-free device with no decode delay and no random heating."""
        base = cls(jitter_sigma=0.0, size_sigma=0.0, metric_sigma=0.0,
                   delay_base_s=0.0, delay_load_s=0.0, hot_probability=0.0)
        return replace(base, **overrides)


def tile_size(streams: int, screen: tuple[int, int] = SCREEN) -> int:
    """Side of the square tile each stream gets on a portrait grid layout."""
    cols = math.ceil(math.sqrt(streams))
    rows = math.ceil(streams / cols)
    return int(min(screen[0] / cols, screen[1] / rows))


def nominal_gap(config: StreamConfig, model: TraceModel, cap: float | None = None) -> float:
    load = config.streams * config.resolution ** 2 * config.fps / MAX_PIXEL_RATE
    gap = 1.0 / config.fps + model.delay_base_s + model.delay_load_s * load
    if cap is not None:
        rate = config.streams * frame_bytes(config, model) / gap
        if rate > cap:
            gap *= rate / cap
    return gap


def frame_bytes(config: StreamConfig, model: TraceModel) -> float:
    return config.resolution ** 2 * model.bits_per_pixel / 8.0


def n_frames(config: StreamConfig, model: TraceModel, cap: float | None = None) -> int:
    return max(2, math.ceil(model.window_s / nominal_gap(config, model, cap) - 1e-9))


def _lognormal(rng, sigma: float, shape) -> np.ndarray:
    # mean-one multiplicative noise; exactly 1 when sigma == 0
    z = rng.standard_normal(shape)
    return np.exp(sigma * z - 0.5 * sigma * sigma)


def _draw(config: StreamConfig, n: int, model: TraceModel, cap: float | None, rng):
    """Raw arrays for n independent one-second traces of ``config``."""
    gap0 = nominal_gap(config, model, cap)
    t_c = n_frames(config, model, cap)
    s = config.streams
    gaps = gap0 * _lognormal(rng, model.jitter_sigma, (n, s, t_c - 1))
    sizes = frame_bytes(config, model) * _lognormal(rng, model.size_sigma, (n, s, t_c))
    if cap is not None:
        # aggregate rate summed over streams; stretch gaps where it exceeds the cap
        agg = (sizes[:, :, 1:] / gaps).mean(axis=2).sum(axis=1)
        stretch = np.maximum(1.0, agg / cap)
        gaps = gaps * stretch[:, None, None]
    timestamps = np.concatenate([np.zeros((n, s, 1)), np.cumsum(gaps, axis=2)], axis=2)

    pixel_rate = s * config.resolution ** 2 * config.fps
    cpu = (model.cpu_peak * U_REF * pixel_rate / MAX_PIXEL_RATE
           * _lognormal(rng, model.metric_sigma, (n, t_c)))
    mem = (model.mem_peak * R_REF * s * config.resolution ** 2 / MAX_PIXELS
           * _lognormal(rng, model.metric_sigma, (n, t_c)))
    # one thermal draw per trace: level 1 w.p. hot_probability on a busy device
    hot = rng.random(n) < model.hot_probability
    busy = cpu[:, 1:].mean(axis=1) > model.hot_cpu_fraction * U_REF
    thermal = np.repeat((busy & hot).astype(np.int64)[:, None], t_c, axis=1)
    return timestamps, sizes, cpu, mem, thermal


def simulate_second(config: StreamConfig, model: TraceModel = TraceModel(),
                    cap: float | None = None, rng=None):
    """One trace plus its CPU (cores), memory (MiB) and thermal series."""
    rng = np.random.default_rng() if rng is None else rng
    timestamps, sizes, cpu, mem, thermal = _draw(config, 1, model, cap, rng)
    tile = float(tile_size(config.streams))
    shape = timestamps.shape[1:]
    trace = FrameTrace(timestamps=timestamps[0], sizes=sizes[0],
                       tile_w=np.full(shape, tile), tile_h=np.full(shape, tile),
                       src_w=np.full(shape, float(config.resolution)),
                       src_h=np.full(shape, float(config.resolution)))
    return trace, cpu[0], mem[0], thermal[0]


def generate_frame_trace(config: StreamConfig, model: TraceModel = TraceModel(),
                         cap: float | None = None, rng=None) -> FrameTrace:
    return simulate_second(config, model, cap, rng)[0]


def synthesize(config: StreamConfig, n: int, model: TraceModel = TraceModel(),
               cap: float | None = None, rng=None) -> MetricsBatch:
    """n metric samples for ``config``, vectorised over traces.

    For n == 1 and equal generator state the result equals
    ``compute_metrics`` applied to ``simulate_second``'s output.
    """
    rng = np.random.default_rng() if rng is None else rng
    timestamps, sizes, cpu, mem, thermal = _draw(config, n, model, cap, rng)
    gaps = np.diff(timestamps, axis=2)
    latency = gaps.mean(axis=(1, 2))
    throughput = (sizes[:, :, 1:] / gaps).mean(axis=(1, 2))
    render_scale = np.full(n, tile_size(config.streams) / config.resolution)
    return MetricsBatch(
        cpu=cpu[:, 1:].mean(axis=1) / U_REF,
        mem=mem[:, 1:].mean(axis=1) / R_REF,
        throughput=throughput,
        latency=latency,
        render_scale=render_scale,
        thermal=thermal[:, 1:].max(axis=1),
        stream_count=np.full(n, config.streams),
    )
