"""Dependency-ordered execution of experiment plans."""
from __future__ import annotations

import logging
import multiprocessing as mp
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from slobench import checkpoint
from slobench.aif.agent import AifParams
from slobench.errors import CheckpointError, ConfigError
from slobench.harness.runlog import run_dir
from slobench.harness.scenario import SCENARIOS, ScenarioSpec
from slobench.harness.train import AGENT_NAMES, train

log = logging.getLogger(__name__)

PLANS = {"basic": ("basic",), "full": tuple(SCENARIOS)}


@dataclass(frozen=True)
class RunSpec:
    scenario: ScenarioSpec
    agent: str
    seed: int
    aif_params: AifParams = field(default_factory=AifParams)


def load_pretrained(out_root, spec: RunSpec) -> bytes | None:
    """Final checkpoint of the scenario ``spec`` depends on, verified against its meta hash."""
    parent = spec.scenario.pretrained
    if parent is None:
        return None
    d = run_dir(out_root, parent, spec.agent, spec.seed)
    path = d / "checkpoint.bin"
    if not path.exists():
        raise CheckpointError(f"{spec.scenario.name}/{spec.agent} needs {path}; run scenario "
                              f"{parent!r} first")
    expected = None
    if (d / "meta.toml").exists():
        expected = tomllib.loads((d / "meta.toml").read_text()).get("checkpoint_sha256") or None
    data = path.read_bytes()
    if expected is not None and checkpoint.sha256(data) != expected:
        raise CheckpointError(f"{path} does not match the hash recorded in {d / 'meta.toml'}")
    return data


def execute(spec: RunSpec, out_root) -> Path:
    pretrained = load_pretrained(out_root, spec)
    log.info("running %s/%s seed %d", spec.scenario.name, spec.agent, spec.seed)
    runlog, _ = train(spec.agent, spec.scenario, spec.seed, pretrained=pretrained,
                      aif_params=spec.aif_params)
    return runlog.write(run_dir(out_root, spec.scenario.name, spec.agent, spec.seed))


def _execute_args(args):
    return execute(*args)


def stages(specs: list[RunSpec]) -> list[list[RunSpec]]:
    """Group runs so every run comes after the scenario it depends on."""
    by_name = {s.scenario.name: s.scenario for s in specs}
    depth: dict[str, int] = {}

    def level(name: str, trail=()) -> int:
        if name in trail:
            raise ConfigError(f"dependency cycle through {name!r}")
        if name not in depth:
            sc = by_name.get(name) or SCENARIOS.get(name)
            if sc is None:
                raise ConfigError(f"unknown scenario {name!r}")
            depth[name] = 0 if sc.pretrained is None else level(sc.pretrained, trail + (name,)) + 1
        return depth[name]

    out: dict[int, list] = {}
    for s in specs:
        out.setdefault(level(s.scenario.name), []).append(s)
    return [out[k] for k in sorted(out)]


def build_plan(scenarios, agents=AGENT_NAMES, seeds=(0,), budget=None, cadence=None,
               mode=None, aif_params: AifParams | None = None,
               overrides: dict | None = None) -> list[RunSpec]:
    specs = []
    for name in scenarios:
        sc = SCENARIOS[name] if isinstance(name, str) else name
        sc = sc.scaled(budget, cadence)
        if mode is not None:
            sc = replace(sc, mode=mode)
        if overrides:
            sc = replace(sc, **overrides)
        for agent in agents:
            for seed in seeds:
                specs.append(RunSpec(sc, agent, int(seed), aif_params or AifParams()))
    return specs


def run_suite(specs: list[RunSpec], out_root, jobs: int = 1, isolate: bool = True) -> list[Path]:
    """Execute every stage in order; with ``isolate`` each run gets a fresh worker process."""
    paths = []
    for stage in stages(specs):
        args = [(s, out_root) for s in stage]
        if isolate:
            ctx = mp.get_context("spawn")
            with ctx.Pool(processes=max(1, jobs), maxtasksperchild=1) as pool:
                paths += pool.map(_execute_args, args, chunksize=1)
        else:
            paths += [execute(*a) for a in args]
    return paths
