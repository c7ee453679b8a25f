"""On-disk record of one training run."""
from __future__ import annotations

import csv
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

import slobench
from slobench.errors import ConfigError
from slobench.harness.stats import smooth

EVAL_COLUMNS = ("eval_index", "batch_index", "mu", "sigma", "mu_smoothed")
RESOURCE_COLUMNS = ("batch_index", "cpu_ms", "rss_bytes")
FILES = ("meta.toml", "train_rewards.csv", "eval_stats.csv", "resources.csv", "checkpoint.bin")


@dataclass
class RunLog:
    scenario: str
    agent: str
    seed: int
    budget: int
    cadence: int
    train_rewards: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eval_mu: np.ndarray = field(default_factory=lambda: np.zeros((0, 20)))
    eval_sigma: np.ndarray = field(default_factory=lambda: np.zeros((0, 20)))
    eval_raw: np.ndarray | None = None
    resources: list = field(default_factory=list)   # (batch_index, cpu_ms, rss_bytes)
    checkpoint: bytes = b""
    checkpoint_sha256: str = ""
    pretrained_sha256: str = ""
    oracle: dict = field(default_factory=dict)
    gate_trace: list = field(default_factory=list)  # AIF only: (batch, surprise, params, structure)

    @property
    def mu_series(self) -> np.ndarray:
        return np.asarray(self.eval_mu, dtype=float).reshape(-1)

    @property
    def sigma_series(self) -> np.ndarray:
        return np.asarray(self.eval_sigma, dtype=float).reshape(-1)

    @property
    def mu_smoothed(self) -> np.ndarray:
        return smooth(self.mu_series, 15)

    def meta(self) -> dict:
        return {
            "scenario": self.scenario, "agent": self.agent, "seed": self.seed,
            "budget": self.budget, "cadence": self.cadence,
            "versions": {"slobench": slobench.__version__, "numpy": np.__version__,
                         "python": platform.python_version()},
            "oracle": self.oracle,
            "checkpoint_sha256": self.checkpoint_sha256,
            "pretrained_sha256": self.pretrained_sha256,
        }

    # ----- persistence -------------------------------------------------
    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "meta.toml").write_bytes(tomli_w.dumps(self.meta()).encode())
        with open(d / "train_rewards.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("step", "reward"))
            for i, r in enumerate(self.train_rewards):
                w.writerow((i, repr(float(r))))
        with open(d / "eval_stats.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EVAL_COLUMNS)
            mu, sigma, sm = self.mu_series, self.sigma_series, self.mu_smoothed
            per = self.eval_mu.shape[1] if self.eval_mu.ndim == 2 else 0
            for k in range(len(mu)):
                w.writerow((k // per, k, repr(float(mu[k])), repr(float(sigma[k])),
                            repr(float(sm[k]))))
        with open(d / "resources.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESOURCE_COLUMNS)
            for b, cpu, rss in self.resources:
                w.writerow((b, repr(float(cpu)), "" if rss is None else int(rss)))
        (d / "checkpoint.bin").write_bytes(self.checkpoint)
        if self.eval_raw is not None:
            np.savez_compressed(d / "eval_raw.npz", rewards=self.eval_raw)
        if self.gate_trace:
            with open(d / "aif_gates.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("batch_index", "surprise", "relearn_parameters", "relearn_structure"))
                for b, s, p, st in self.gate_trace:
                    w.writerow((b, repr(float(s)), int(p), int(st)))
        return d

    @classmethod
    def read(cls, directory) -> "RunLog":
        d = Path(directory)
        missing = [f for f in FILES if not (d / f).exists()]
        if missing:
            raise ConfigError(f"{d} is not a complete run directory (missing {missing})")
        meta = tomllib.loads((d / "meta.toml").read_text())
        rewards = np.loadtxt(d / "train_rewards.csv", delimiter=",", skiprows=1, ndmin=2)
        rows = list(csv.DictReader(open(d / "eval_stats.csv", newline="")))
        n_evals = len({int(r["eval_index"]) for r in rows})
        mu = np.array([float(r["mu"]) for r in rows])
        sigma = np.array([float(r["sigma"]) for r in rows])
        per = len(rows) // n_evals if n_evals else 20
        resources = []
        for r in csv.DictReader(open(d / "resources.csv", newline="")):
            rss = int(r["rss_bytes"]) if r["rss_bytes"] else None
            resources.append((int(r["batch_index"]), float(r["cpu_ms"]), rss))
        gates = []
        if (d / "aif_gates.csv").exists():
            for r in csv.DictReader(open(d / "aif_gates.csv", newline="")):
                gates.append((int(r["batch_index"]), float(r["surprise"]),
                              bool(int(r["relearn_parameters"])), bool(int(r["relearn_structure"]))))
        raw = None
        if (d / "eval_raw.npz").exists():
            with np.load(d / "eval_raw.npz") as z:
                raw = z["rewards"]
        return cls(scenario=meta["scenario"], agent=meta["agent"], seed=meta["seed"],
                   budget=meta["budget"], cadence=meta["cadence"],
                   train_rewards=rewards[:, 1] if rewards.size else np.zeros(0),
                   eval_mu=mu.reshape(n_evals, per), eval_sigma=sigma.reshape(n_evals, per),
                   eval_raw=raw, resources=resources,
                   checkpoint=(d / "checkpoint.bin").read_bytes(),
                   checkpoint_sha256=meta.get("checkpoint_sha256", ""),
                   pretrained_sha256=meta.get("pretrained_sha256", ""),
                   oracle=meta.get("oracle", {}), gate_trace=gates)


def run_dir(out_root, scenario: str, agent: str, seed: int) -> Path:
    return Path(out_root) / scenario / f"{agent}-s{seed}"
