"""Command-line entry point: gen-data, run, oracle and report."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from slobench.aif.agent import AifParams
from slobench.env.dataset import generate_dataset, save_dataset
from slobench.env.generator import TraceModel
from slobench.errors import CheckpointError, ConfigError, ContractViolation, DomainError
from slobench.harness.oracle import ORACLE_SAMPLES, oracle_best
from slobench.harness.scenario import (CAP_BYTES, PAPER_BUDGET, PAPER_CADENCE, SCENARIOS,
                                       ScenarioSpec, get_scenario)
from slobench.harness.suite import PLANS, build_plan, run_suite
from slobench.harness.train import AGENT_NAMES
from slobench.slo import SloThresholds, preset

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_IO = 0, 2, 3, 4

RUN_KEYS = {"scenario", "plan", "agent", "seed", "budget", "cadence", "paper_scale", "dataset",
            "synthetic", "out", "jobs", "threshold_factor", "memory_cap", "binary_compliance",
            "in_process"}
SCENARIO_KEYS = {"name", "slos", "cap", "thermal_k", "pretrained", "mode", "dataset_seed"}


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(doc) - {"run", "scenario", "gen-data"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    for key in set(doc.get("run", {})) - RUN_KEYS:
        raise ConfigError(f"{path}: unknown key run.{key}")
    for key in set(doc.get("scenario", {})) - SCENARIO_KEYS:
        raise ConfigError(f"{path}: unknown key scenario.{key}")
    return doc


def _pick(cli_value, section: dict, key: str, default=None):
    """Command line wins over the config file, which wins over the default."""
    if cli_value is not None:
        return cli_value
    return section.get(key, default)


def _seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("SLO_BENCH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SLO_BENCH_SEED={env!r} is not an integer") from None
    return 0


def _inline_scenario(table: dict) -> ScenarioSpec:
    slos = table.get("slos")
    if isinstance(slos, str):
        slos = preset(slos)
    elif isinstance(slos, dict):
        slos = SloThresholds.from_mapping(slos)
    else:
        raise ConfigError("scenario.slos must be a preset name or a table of thresholds")
    name = table.get("name", "custom")
    return ScenarioSpec(name=name, slos=slos, cap=table.get("cap"),
                        thermal_k=table.get("thermal_k"), pretrained=table.get("pretrained"),
                        mode=table.get("mode", "synthetic"),
                        dataset_seed=int(table.get("dataset_seed", 0)))


# ----- commands -----------------------------------------------------------
def cmd_gen_data(args) -> int:
    cfg = _read_config(args.config).get("gen-data", {})
    mode = _pick(args.mode, cfg, "mode", "basic")
    if mode not in ("basic", "capped"):
        raise ConfigError(f"gen-data mode must be 'basic' or 'capped', not {mode!r}")
    records = int(_pick(args.records, cfg, "records", 512))
    cap = float(_pick(args.cap, cfg, "cap", CAP_BYTES)) if mode == "capped" else None
    seed = _seed(_pick(args.seed, cfg, "seed"))
    out = Path(_pick(args.out, cfg, "out", f"{mode}.csv"))
    ds = generate_dataset(seed, TraceModel(), cap, records, name=out.name)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    save_dataset(ds, out)
    print(f"wrote {len(ds)} rows to {out}")
    return EXIT_OK


def _resolve_run(args) -> tuple[list, dict]:
    doc = _read_config(args.config)
    run = doc.get("run", {})
    agents = args.agent or run.get("agent") or list(AGENT_NAMES)
    if isinstance(agents, str):
        agents = [agents]
    for a in agents:
        if a not in AGENT_NAMES:
            raise ConfigError(f"unknown agent {a!r}; choose from {AGENT_NAMES}")
    seed = _seed(_pick(args.seed, run, "seed"))
    paper = bool(_pick(args.paper_scale or None, run, "paper_scale", False))
    budget = _pick(args.budget, run, "budget", PAPER_BUDGET if paper else None)
    cadence = _pick(args.cadence, run, "cadence", PAPER_CADENCE if paper else None)
    dataset = _pick(args.dataset, run, "dataset")
    synthetic = bool(_pick(args.synthetic or None, run, "synthetic", False))
    if dataset is not None and synthetic:
        raise ConfigError("--dataset and --synthetic are mutually exclusive")
    plan = _pick(args.plan, run, "plan")
    scenario = _pick(args.scenario, run, "scenario")
    if "scenario" in doc:
        custom = _inline_scenario(doc["scenario"])
        names = [custom]
    elif plan is not None:
        if plan not in PLANS:
            raise ConfigError(f"unknown plan {plan!r}; choose from {sorted(PLANS)}")
        names = list(PLANS[plan])
    elif scenario is not None:
        get_scenario(scenario)
        names = [scenario]
    else:
        raise ConfigError("give --scenario, --plan or a [scenario] section")
    overrides = {}
    if dataset is not None:
        overrides = {"mode": "dataset", "dataset_path": str(dataset)}
    h = _pick(args.threshold_factor, run, "threshold_factor", 2.0)
    cap = _pick(args.memory_cap, run, "memory_cap")
    binary = bool(_pick(args.binary_compliance or None, run, "binary_compliance", False))
    aif = AifParams(threshold_factor=float(h), memory_cap=None if cap is None else int(cap),
                    binary_compliance=binary)
    specs = build_plan(names, agents, [seed], budget, cadence, aif_params=aif,
                       overrides=overrides or None)
    opts = {"out": Path(_pick(args.out, run, "out", "out")),
            "jobs": int(_pick(args.jobs, run, "jobs", 1)),
            "in_process": bool(_pick(args.in_process or None, run, "in_process", False))}
    return specs, opts


def cmd_run(args) -> int:
    specs, opts = _resolve_run(args)
    paths = run_suite(specs, opts["out"], jobs=opts["jobs"], isolate=not opts["in_process"])
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_oracle(args) -> int:
    sc = get_scenario(args.scenario)
    if args.dataset:
        sc = replace(sc, mode="dataset", dataset_path=args.dataset)
    res = oracle_best(sc, samples=args.samples)
    print(f"scenario={sc.name} best={res.config} index={res.index} "
          f"value={res.value!r} stderr={res.stderr!r}")
    return EXIT_OK


def cmd_report(args) -> int:
    from slobench.report import write_report
    dirs = []
    for p in args.runs:
        p = Path(p)
        if (p / "meta.toml").exists():
            dirs.append(p)
        else:
            found = sorted(m.parent for m in p.rglob("meta.toml"))
            if not found:
                raise ConfigError(f"{p} holds no run directories")
            dirs += found
    for path in write_report(dirs, args.out):
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slo-bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a per-configuration metrics dataset")
    g.add_argument("--mode", choices=("basic", "capped"))
    g.add_argument("--records", type=int)
    g.add_argument("--cap", type=float, help="bytes/s for capped mode (default 1 Mb/s)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.add_argument("--config")
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="train and evaluate agents on scenarios")
    r.add_argument("--scenario", choices=tuple(SCENARIOS))
    r.add_argument("--plan", choices=tuple(PLANS))
    r.add_argument("--agent", action="append", choices=AGENT_NAMES)
    r.add_argument("--seed", type=int)
    r.add_argument("--budget", type=int)
    r.add_argument("--cadence", type=int)
    r.add_argument("--paper-scale", action="store_true")
    r.add_argument("--dataset", help="dataset CSV; default is the synthetic generator")
    r.add_argument("--synthetic", action="store_true")
    r.add_argument("--out")
    r.add_argument("--jobs", type=int)
    r.add_argument("--threshold-factor", type=float, help="AIF surprise factor h")
    r.add_argument("--memory-cap", type=int, help="AIF observation ring size")
    r.add_argument("--binary-compliance", action="store_true",
                   help="AIF scores SLO bins as met/unmet instead of graded")
    r.add_argument("--in-process", action="store_true", help="no worker processes")
    r.add_argument("--config")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="best single configuration of a scenario")
    o.add_argument("--scenario", choices=tuple(SCENARIOS), required=True)
    o.add_argument("--dataset")
    o.add_argument("--samples", type=int, default=ORACLE_SAMPLES)
    o.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="summary.csv and SVG charts from run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractViolation, CheckpointError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
