"""Command-line surface and the CSV/SVG report."""
import csv
import re

import numpy as np
import pytest

from slobench.cli import EXIT_CONFIG, EXIT_CONTRACT, EXIT_IO, main
from slobench.errors import ConfigError
from slobench.harness.runlog import RunLog
from slobench.harness.stats import first_reaching, smooth
from slobench.report import Axes, compliance_chart, write_report

RUN_FILES = ("meta.toml", "train_rewards.csv", "eval_stats.csv", "resources.csv", "checkpoint.bin")


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ----- gen-data -----------------------------------------------------------------------
def test_gen_data_basic_is_complete_and_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen-data", "--seed", "3", "--out", str(a)]) == 0
    assert main(["gen-data", "--seed", "3", "--out", str(b)]) == 0
    assert len(_rows(a)) == 108 * 512 == 55_296
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.stats.csv").exists()


def test_gen_data_capped_respects_cap(tmp_path):
    out = tmp_path / "capped.csv"
    assert main(["gen-data", "--mode", "capped", "--records", "64", "--out", str(out)]) == 0
    tp = np.array([float(r["throughput_bps"]) for r in _rows(out)])
    assert len(tp) == 108 * 64 and np.all(tp <= 125_000)


def test_seed_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SLO_BENCH_SEED", "3")
    env_seeded = tmp_path / "env.csv"
    flag_seeded = tmp_path / "flag.csv"
    assert main(["gen-data", "--records", "32", "--out", str(env_seeded)]) == 0
    assert main(["gen-data", "--records", "32", "--seed", "3", "--out", str(flag_seeded)]) == 0
    assert env_seeded.read_bytes() == flag_seeded.read_bytes()
    monkeypatch.setenv("SLO_BENCH_SEED", "x")
    assert main(["gen-data", "--records", "32", "--out", str(env_seeded)]) == EXIT_CONFIG


# ----- run -------------------------------------------------------------------------------
def _run(out, *extra):
    return main(["run", "--scenario", "basic", "--agent", "aif", "--seed", "7", "--budget", "6400",
                 "--out", str(out), *extra])


def test_run_writes_manifest_and_is_reproducible(tmp_path, capsys):
    assert _run(tmp_path / "one") == 0
    d = tmp_path / "one" / "basic" / "aif-s7"
    assert all((d / f).exists() for f in RUN_FILES)
    assert _run(tmp_path / "two", "--in-process") == 0
    e = tmp_path / "two" / "basic" / "aif-s7"
    assert (d / "eval_stats.csv").read_bytes() == (e / "eval_stats.csv").read_bytes()
    rows = _rows(d / "resources.csv")
    assert [int(r["batch_index"]) for r in rows] == list(range(200))
    assert all(r["cpu_ms"] != "" and r["rss_bytes"] != "" for r in rows)


def test_config_file_and_command_line_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[run]\nscenario = "basic"\nagent = ["aif"]\nseed = 1\nbudget = 3200\n'
                   f'cadence = 3200\nout = "{tmp_path / "cfg"}"\nin_process = true\n')
    assert main(["run", "--config", str(cfg), "--seed", "4"]) == 0
    assert (tmp_path / "cfg" / "basic" / "aif-s4" / "eval_stats.csv").exists()
    assert not (tmp_path / "cfg" / "basic" / "aif-s1").exists()


def test_inline_scenario(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[run]\nagent = "aif"\nbudget = 3200\ncadence = 3200\nin_process = true\n'
                   f'out = "{tmp_path / "o"}"\n'
                   '[scenario]\nname = "lax"\nslos = {tp_max = 1e9, lat_max = 1.0, sf_min = 1,'
                   ' rs_max = 4.0, ts_max = 5}\n')
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "o" / "lax" / "aif-s0" / "checkpoint.bin").exists()


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[run]\nscenaro = 'basic'\n")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["run", "--agent", "aif"]) == EXIT_CONFIG
    assert main(["run", "--scenario", "basic", "--budget", "6400", "--cadence", "3000",
                 "--agent", "aif", "--out", str(tmp_path)]) == EXIT_CONFIG
    # dependent scenario without the basic checkpoint
    assert main(["run", "--scenario", "instant-shift", "--agent", "aif", "--budget", "3200",
                 "--cadence", "3200", "--in-process", "--out", str(tmp_path / "x")]) == EXIT_CONTRACT
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["gen-data", "--records", "32", "--out", str(blocker / "d.csv")]) == EXIT_IO
    assert main(["report", str(tmp_path / "missing"), "--out", str(tmp_path / "r")]) == EXIT_CONFIG


def test_oracle_command(capsys):
    assert main(["oracle", "--scenario", "basic", "--samples", "200"]) == 0
    assert re.search(r"best=\S+ index=\d+ value=", capsys.readouterr().out)


@pytest.mark.slow
def test_full_plan_produces_every_run(tmp_path):
    assert main(["run", "--plan", "full", "--budget", "32", "--cadence", "32", "--in-process",
                 "--out", str(tmp_path)]) == 0
    dirs = sorted(p.parent for p in tmp_path.rglob("meta.toml"))
    assert len(dirs) == 24
    basic = {d.name: RunLog.read(d).checkpoint_sha256 for d in dirs if d.parent.name == "basic"}
    for d in dirs:
        if d.parent.name != "basic":
            assert RunLog.read(d).pretrained_sha256 == basic[d.name]


# ----- report -------------------------------------------------------------------------------
def _fake_run(agent="aif", scenario="basic", mu=0.8, sigma=0.1, evals=3, seed=0):
    return RunLog(scenario=scenario, agent=agent, seed=seed, budget=3200 * evals, cadence=3200,
                  train_rewards=np.zeros(3200 * evals), eval_mu=np.full((evals, 20), mu),
                  eval_sigma=np.full((evals, 20), sigma),
                  resources=[(b, 1.0, 2 ** 20) for b in range(100 * evals)],
                  oracle={"value": 0.95, "stderr": 0.001})


def _numbers(points):
    return np.array([[float(v) for v in p.split(",")] for p in points.split()])


def test_band_geometry():
    svg = compliance_chart([_fake_run()])
    assert svg.count('class="band"') == 1 and svg.count('class="curve"') == 1
    band = _numbers(re.search(r'class="band"[^>]*points="([^"]+)"', svg).group(1))
    ax = Axes(59)
    ys = ax.y_inverse(band[:, 1])
    assert np.allclose(ys.min(), 0.7, atol=1e-3) and np.allclose(ys.max(), 0.9, atol=1e-3)
    exp = re.search(r'class="exp" data-value="([^"]+)"[^>]*y1="([^"]+)"', svg)
    assert float(exp.group(1)) == 0.95
    assert ax.y_inverse(float(exp.group(2))) == pytest.approx(0.95, abs=1e-3)
    assert "Exp." in svg


def test_mixed_scenarios_refused():
    with pytest.raises(ConfigError):
        compliance_chart([_fake_run(), _fake_run(scenario="instant-shift")])


def test_report_from_run_directories(tmp_path):
    rng = np.random.default_rng(0)
    dirs = []
    for agent in ("aif", "ppo"):
        run = _fake_run(agent)
        run.eval_mu = rng.uniform(0.5, 1.0, (3, 20))
        dirs.append(run.write(tmp_path / "runs" / agent))
    paths = write_report(dirs, tmp_path / "rep")
    names = sorted(p.name for p in paths)
    assert names == ["basic_compliance.svg", "basic_cpu.svg", "basic_memory.svg", "summary.csv"]
    rows = _rows(tmp_path / "rep" / "summary.csv")
    assert len(rows) == 2
    for row, d in zip(rows, dirs):
        # recomputable from eval_stats.csv alone
        mu = np.array([float(r["mu"]) for r in _rows(d / "eval_stats.csv")])
        sm = smooth(mu, 15)
        reach = first_reaching(sm, 0.95 * 0.95)
        assert row["batches_to_95pct_oracle"] == ("" if reach is None else str(reach))
        assert float(row["final_mu_smoothed"]) == sm[-1]
        assert int(row["peak_rss_bytes"]) == 2 ** 20
    first = (tmp_path / "rep" / "basic_compliance.svg").read_bytes()
    write_report(dirs, tmp_path / "rep")
    assert (tmp_path / "rep" / "basic_compliance.svg").read_bytes() == first
