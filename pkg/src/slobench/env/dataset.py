"""Per-configuration metric datasets: CSV storage, statistics and sampling sources."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from slobench.env.actions import N_ACTIONS, StreamConfig, enumerate_actions
from slobench.env.generator import TraceModel, synthesize
from slobench.env.metrics import METRIC_COLUMNS, MetricsBatch
from slobench.errors import ConfigError, MissingConfigError

CSV_HEADER = ("streams", "resolution", "fps", "cpu", "mem", "throughput_bps",
              "latency_s", "render_scale", "thermal")
RECORDS_PER_CONFIG = 512
MIN_RECORDS = 32


@dataclass
class FeatureStats:
    """Mean and population standard deviation of the five continuous metrics."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_batch(cls, batch: MetricsBatch) -> "FeatureStats":
        x = batch.continuous()
        return cls(mean=x.mean(axis=0), std=x.std(axis=0))


@dataclass
class Dataset:
    records: dict[int, MetricsBatch]
    stats: FeatureStats | None = None
    name: str = "dataset"
    _all: MetricsBatch | None = field(default=None, repr=False)

    def __post_init__(self):
        missing = [i for i in range(N_ACTIONS) if i not in self.records]
        if missing:
            raise MissingConfigError(f"dataset lacks {len(missing)} configurations, e.g. "
                                     f"{StreamConfig.from_index(missing[0])}")
        short = [i for i, b in self.records.items() if len(b) < MIN_RECORDS]
        if short:
            raise ConfigError(f"configuration {StreamConfig.from_index(short[0])} has fewer "
                              f"than {MIN_RECORDS} records")
        if self.stats is None:
            self.stats = FeatureStats.from_batch(self.all_records())

    def all_records(self) -> MetricsBatch:
        if self._all is None:
            self._all = MetricsBatch.concat([self.records[i] for i in range(N_ACTIONS)])
        return self._all

    def __len__(self):
        return sum(len(b) for b in self.records.values())


def generate_dataset(seed: int, model: TraceModel = TraceModel(), cap: float | None = None,
                     records: int = RECORDS_PER_CONFIG, name: str = "synthetic") -> Dataset:
    children = np.random.SeedSequence(seed).spawn(N_ACTIONS)
    recs = {c.index: synthesize(c, records, model, cap, np.random.default_rng(children[c.index]))
            for c in enumerate_actions()}
    return Dataset(records=recs, name=name)


def stats_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".stats.csv")


def save_dataset(dataset: Dataset, path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for cfg in enumerate_actions():
            b = dataset.records[cfg.index]
            for i in range(len(b)):
                w.writerow([cfg.streams, cfg.resolution, cfg.fps, repr(float(b.cpu[i])),
                            repr(float(b.mem[i])), repr(float(b.throughput[i])),
                            repr(float(b.latency[i])), repr(float(b.render_scale[i])),
                            int(b.thermal[i])])
    with open(stats_path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("metric", "mean", "std"))
        for name, m, s in zip(METRIC_COLUMNS, dataset.stats.mean, dataset.stats.std):
            w.writerow((name, repr(float(m)), repr(float(s))))


def load_dataset(path) -> Dataset:
    path = Path(path)
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected header {header}")
        for line, row in enumerate(reader, start=2):
            try:
                cfg = StreamConfig(int(row[0]), int(row[1]), int(row[2]))
                rows.setdefault(cfg.index, []).append(
                    (float(row[3]), float(row[4]), float(row[5]), float(row[6]),
                     float(row[7]), int(row[8]), cfg.streams))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}:{line}: {exc}") from exc
    records = {}
    for idx, vals in rows.items():
        a = list(zip(*vals))
        records[idx] = MetricsBatch(cpu=a[0], mem=a[1], throughput=a[2], latency=a[3],
                                    render_scale=a[4], thermal=a[5], stream_count=a[6])
    stats = None
    sp = stats_path(path)
    if sp.exists():
        table = {}
        with open(sp, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                table[row["metric"]] = (float(row["mean"]), float(row["std"]))
        if set(table) != set(METRIC_COLUMNS):
            raise ConfigError(f"{sp}: expected metrics {METRIC_COLUMNS}")
        stats = FeatureStats(mean=np.array([table[c][0] for c in METRIC_COLUMNS]),
                             std=np.array([table[c][1] for c in METRIC_COLUMNS]))
    return Dataset(records=records, stats=stats, name=os.path.basename(path))


class DatasetSource:
    """Uniform sampling with replacement from a dataset's records."""

    def __init__(self, dataset: Dataset, rng: np.random.Generator):
        self.dataset = dataset
        self.rng = rng

    def draw(self, index: int, n: int) -> MetricsBatch:
        try:
            records = self.dataset.records[index]
        except KeyError:
            raise MissingConfigError(f"no records for action {index}") from None
        return records.take(self.rng.integers(0, len(records), size=n))


class SyntheticSource:
    """Fresh samples from the generator.

    Every configuration owns an independent random stream and samples are
    produced in chunks, so the values drawn for a configuration do not depend
    on the order in which other configurations are visited.
    """

    def __init__(self, seed_seq: np.random.SeedSequence, model: TraceModel = TraceModel(),
                 cap: float | None = None, chunk: int = 64):
        self.model = model
        self.cap = cap
        self.chunk = chunk
        children = seed_seq.spawn(N_ACTIONS)
        self._rngs = [np.random.default_rng(c) for c in children]
        self._buf: dict[int, MetricsBatch] = {}
        self._pos: dict[int, int] = {}

    def draw(self, index: int, n: int) -> MetricsBatch:
        if not 0 <= index < N_ACTIONS:
            raise MissingConfigError(f"no configuration {index}")
        parts, need = [], n
        while need:
            buf = self._buf.get(index)
            pos = self._pos.get(index, 0)
            if buf is None or pos >= len(buf):
                buf = synthesize(StreamConfig.from_index(index), self.chunk,
                                 self.model, self.cap, self._rngs[index])
                self._buf[index], pos = buf, 0
            take = min(need, len(buf) - pos)
            parts.append(buf.take(slice(pos, pos + take)))
            self._pos[index] = pos + take
            need -= take
        return parts[0] if len(parts) == 1 else MetricsBatch.concat(parts)
