"""CSV summaries and SVG charts built from RunLog directories only."""
from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from slobench.errors import ConfigError
from slobench.harness.runlog import RunLog
from slobench.harness.stats import first_reaching, smooth

WIDTH, HEIGHT = 720, 360
MARGIN = {"left": 56, "right": 120, "top": 28, "bottom": 40}
PALETTE = {"aif": "#1b9e77", "dqn": "#d95f02", "a2c": "#7570b3", "ppo": "#e7298a"}
SUMMARY_COLUMNS = ("scenario", "agent", "seed", "final_mu_smoothed", "batches_to_95pct_oracle",
                   "peak_rss_bytes", "mean_cpu_ms_per_batch")


class Axes:
    """Linear map from data coordinates to SVG pixels."""

    def __init__(self, x_max: float, y_min: float = 0.0, y_max: float = 1.0):
        self.x_max = max(x_max, 1.0)
        self.y_min, self.y_max = y_min, y_max
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def x(self, v):
        return self.x0 + (np.asarray(v, float) / self.x_max) * (self.x1 - self.x0)

    def y(self, v):
        frac = (np.asarray(v, float) - self.y_min) / (self.y_max - self.y_min)
        return self.y0 + frac * (self.y1 - self.y0)

    def y_inverse(self, px):
        frac = (np.asarray(px, float) - self.y0) / (self.y1 - self.y0)
        return self.y_min + frac * (self.y_max - self.y_min)


def _points(xs, ys) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))


def _frame(ax: Axes, title: str, y_label: str, y_ticks) -> list[str]:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<text x="{WIDTH / 2:.1f}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{ax.x0}" y="{ax.y1}" width="{ax.x1 - ax.x0}" height="{ax.y0 - ax.y1}" '
           'fill="none" stroke="#444"/>']
    for t in y_ticks:
        py = float(ax.y(t))
        out.append(f'<line x1="{ax.x0 - 4}" y1="{py:.3f}" x2="{ax.x1}" y2="{py:.3f}" '
                   'stroke="#ddd"/>')
        out.append(f'<text x="{ax.x0 - 6}" y="{py + 4:.3f}" text-anchor="end">{t:g}</text>')
    for t in np.linspace(0, ax.x_max, 5):
        px = float(ax.x(t))
        out.append(f'<text x="{px:.3f}" y="{ax.y0 + 16}" text-anchor="middle">{int(round(t))}</text>')
    out.append(f'<text x="{(ax.x0 + ax.x1) / 2:.1f}" y="{HEIGHT - 6}" text-anchor="middle">'
               'evaluation batch</text>')
    out.append(f'<text x="14" y="{(ax.y0 + ax.y1) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {(ax.y0 + ax.y1) / 2:.1f})">{escape(y_label)}</text>')
    return out


def _label(run: RunLog, multi_seed: bool) -> str:
    return f"{run.agent}-s{run.seed}" if multi_seed else run.agent


def compliance_chart(runs: list[RunLog], oracle: float | None = None) -> str:
    """Smoothed mean per run, a translucent mean +/- std band and the Exp. line."""
    if not runs:
        raise ConfigError("no runs to chart")
    scenarios = {r.scenario for r in runs}
    if len(scenarios) > 1:
        raise ConfigError(f"refusing to mix scenarios {sorted(scenarios)} in one chart")
    scenario = runs[0].scenario
    if oracle is None:
        values = [r.oracle.get("value") for r in runs if r.oracle.get("value") is not None]
        oracle = values[0] if values else None
    ax = Axes(max(len(r.mu_series) for r in runs) - 1)
    out = _frame(ax, f"SLO compliance: {scenario}", "SLO compliance", (0, 0.25, 0.5, 0.75, 1.0))
    multi_seed = len({r.seed for r in runs}) > 1
    for k, run in enumerate(runs):
        mu = run.mu_smoothed
        sigma = smooth(run.sigma_series, 15)
        xs = ax.x(np.arange(len(mu)))
        lo, hi = np.clip(mu - sigma, 0, 1), np.clip(mu + sigma, 0, 1)
        color = PALETTE.get(run.agent, "#666")
        label = _label(run, multi_seed)
        band = _points(np.concatenate([xs, xs[::-1]]), np.concatenate([ax.y(hi), ax.y(lo)[::-1]]))
        out.append(f'<polygon class="band" data-agent="{label}" points="{band}" fill="{color}" '
                   'fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="curve" data-agent="{label}" points="{_points(xs, ax.y(mu))}" '
                   f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{ax.x1 + 8}" y="{ax.y1 + 14 * (k + 1):.1f}" fill="{color}">'
                   f'{escape(label)}</text>')
    if oracle is not None:
        py = float(ax.y(oracle))
        out.append(f'<line class="exp" data-value="{oracle!r}" x1="{ax.x0}" y1="{py:.3f}" '
                   f'x2="{ax.x1}" y2="{py:.3f}" stroke="#000" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{ax.x1 + 8}" y="{py + 4:.3f}">Exp.</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def resource_chart(runs: list[RunLog], which: str = "cpu") -> str:
    """Per-batch CPU milliseconds or resident memory (MiB) for each run."""
    if len({r.scenario for r in runs}) > 1:
        raise ConfigError("refusing to mix scenarios in one chart")
    col = 1 if which == "cpu" else 2
    series = []
    for r in runs:
        vals = np.array([np.nan if row[col] is None else row[col] for row in r.resources], float)
        if which != "cpu":
            vals = vals / 2 ** 20
        series.append(vals)
    top = max((np.nanmax(s) for s in series if len(s) and np.isfinite(s).any()), default=1.0)
    top = float(top) * 1.05 or 1.0
    ax = Axes(max(len(s) for s in series) - 1, 0.0, top)
    ticks = [round(v, 1) for v in np.linspace(0, top, 5)]
    label = "CPU time per batch (ms)" if which == "cpu" else "resident memory (MiB)"
    out = _frame(ax, f"{label}: {runs[0].scenario}", label, ticks)
    multi_seed = len({r.seed for r in runs}) > 1
    for k, (run, vals) in enumerate(zip(runs, series)):
        color = PALETTE.get(run.agent, "#666")
        ok = np.isfinite(vals)
        xs = ax.x(np.flatnonzero(ok))
        out.append(f'<polyline class="resource" data-agent="{_label(run, multi_seed)}" '
                   f'points="{_points(xs, ax.y(vals[ok]))}" fill="none" stroke="{color}"/>')
        out.append(f'<text x="{ax.x1 + 8}" y="{ax.y1 + 14 * (k + 1):.1f}" fill="{color}">'
                   f'{escape(_label(run, multi_seed))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def summary_row(run: RunLog) -> dict:
    sm = run.mu_smoothed
    oracle = run.oracle.get("value")
    reach = None if oracle is None else first_reaching(sm, 0.95 * oracle)
    rss = [r[2] for r in run.resources if r[2] is not None]
    cpu = [r[1] for r in run.resources]
    return {"scenario": run.scenario, "agent": run.agent, "seed": run.seed,
            "final_mu_smoothed": repr(float(sm[-1])) if len(sm) else "",
            "batches_to_95pct_oracle": "" if reach is None else reach,
            "peak_rss_bytes": max(rss) if rss else "",
            "mean_cpu_ms_per_batch": repr(float(np.mean(cpu))) if cpu else ""}


def write_report(run_dirs, out_dir) -> list[Path]:
    runs = [RunLog.read(d) for d in run_dirs]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for run in sorted(runs, key=lambda r: (r.scenario, r.agent, r.seed)):
            w.writerow(summary_row(run))
    written.append(out / "summary.csv")
    by_scenario: dict[str, list] = {}
    for run in sorted(runs, key=lambda r: (r.agent, r.seed)):
        by_scenario.setdefault(run.scenario, []).append(run)
    for scenario, group in sorted(by_scenario.items()):
        for name, text in ((f"{scenario}_compliance.svg", compliance_chart(group)),
                           (f"{scenario}_cpu.svg", resource_chart(group, "cpu")),
                           (f"{scenario}_memory.svg", resource_chart(group, "memory"))):
            (out / name).write_text(text)
            written.append(out / name)
    return written
