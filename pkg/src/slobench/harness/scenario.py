"""The six experiment definitions and their environments."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from slobench.env.dataset import Dataset, DatasetSource, SyntheticSource, generate_dataset, load_dataset
from slobench.env.environment import StreamingEnv
from slobench.env.generator import TraceModel
from slobench.errors import ConfigError
from slobench.slo import MBPS, SloThresholds, preset

DESK_BUDGET = 64_000
DESK_CADENCE = 3_200
PAPER_BUDGET = 1_280_000
PAPER_CADENCE = 6_400
BATCH = 32
CAP_BYTES = 1 * MBPS

# stream ids used to derive independent seeds from the run seed
TRAIN_STREAM = 0
EVAL_STREAM = 1


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    slos: SloThresholds
    mode: str = "synthetic"              # "synthetic" or "dataset"
    cap: float | None = None             # bytes/s
    thermal_k: float | None = None
    slo_switch: bool = False
    budget: int = DESK_BUDGET
    cadence: int = DESK_CADENCE
    pretrained: str | None = None        # scenario whose final checkpoint seeds this one
    dataset_path: str | None = None
    dataset_seed: int = 0
    model: TraceModel = field(default_factory=TraceModel)

    def __post_init__(self):
        if self.mode not in ("synthetic", "dataset"):
            raise ConfigError(f"mode must be 'synthetic' or 'dataset', not {self.mode!r}")
        if self.budget <= 0 or self.cadence <= 0:
            raise ConfigError("budget and cadence must be positive")
        if self.budget % self.cadence:
            raise ConfigError(f"budget {self.budget} is not a multiple of cadence {self.cadence}")
        if self.cadence % BATCH:
            raise ConfigError(f"cadence {self.cadence} is not a multiple of the batch size {BATCH}")
        if self.cap is not None and self.thermal_k is not None:
            raise ConfigError("bandwidth cap and thermal model are mutually exclusive")
        if self.cap is not None and not self.cap > 0:
            raise ConfigError("cap must be positive")
        if self.thermal_k is not None and not self.thermal_k > 0:
            raise ConfigError("cooling constant must be positive")

    def scaled(self, budget: int | None = None, cadence: int | None = None) -> "ScenarioSpec":
        return replace(self, budget=budget or self.budget, cadence=cadence or self.cadence)

    @property
    def n_evals(self) -> int:
        return self.budget // self.cadence

    # ----- environment construction -----------------------------------
    def dataset(self) -> Dataset:
        if self.dataset_path is not None:
            return _load_cached(str(Path(self.dataset_path).resolve()))
        return _generate_cached(self.dataset_seed, self.model, self.cap)

    def source(self, seed_seq: np.random.SeedSequence):
        if self.mode == "synthetic":
            return SyntheticSource(seed_seq, self.model, self.cap)
        return DatasetSource(self.dataset(), np.random.default_rng(seed_seq))

    def make_env(self, seed: int, stream: int = TRAIN_STREAM, index: int = 0,
                 start: int = 0) -> StreamingEnv:
        seq = np.random.SeedSequence([seed, stream, index])
        # synthetic sources are already capped at generation time; the
        # post-hoc cap is idempotent, dataset mode relies on it
        return StreamingEnv(self.source(seq), self.slos, cap=self.cap,
                            thermal_k=self.thermal_k, start=start)

    def stats(self):
        """Feature statistics for the RL observation encoder."""
        if self.mode == "dataset":
            return self.dataset().stats
        return _reference_stats(self.model)


@lru_cache(maxsize=4)
def _load_cached(path: str) -> Dataset:
    return load_dataset(path)


@lru_cache(maxsize=4)
def _generate_cached(seed: int, model: TraceModel, cap) -> Dataset:
    return generate_dataset(seed, model, cap)


@lru_cache(maxsize=4)
def _reference_stats(model: TraceModel):
    # synthetic runs standardise with the uncapped reference dataset, so the
    # encoder stays fixed when a pretrained agent meets a shifted environment
    return generate_dataset(0, model).stats


def _scenarios() -> dict[str, ScenarioSpec]:
    return {
        "basic": ScenarioSpec("basic", preset("basic")),
        "instant-shift": ScenarioSpec("instant-shift", preset("instant-shift"), cap=CAP_BYTES,
                                      pretrained="basic"),
        "gradual-1": ScenarioSpec("gradual-1", preset("gradual-1"), thermal_k=0.03,
                                  pretrained="basic"),
        "gradual-2": ScenarioSpec("gradual-2", preset("gradual-2"), thermal_k=0.07,
                                  pretrained="basic"),
        "slo-change-1": ScenarioSpec("slo-change-1", preset("slo-change-1"), slo_switch=True,
                                     pretrained="basic"),
        "slo-change-2": ScenarioSpec("slo-change-2", preset("slo-change-2"), slo_switch=True,
                                     pretrained="basic"),
    }


SCENARIOS = _scenarios()
SCENARIO_NAMES = tuple(SCENARIOS)


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {list(SCENARIOS)}") from None
