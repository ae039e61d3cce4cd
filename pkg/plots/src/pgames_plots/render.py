"""Render experiment CSVs into convergence/comparison figures.

Input is the experiment harness CSV schema only:

    sweep_id,game_id,t,mean_potential,std_potential

with optional leading "# key=value" metadata lines, plus the sibling
hitting-time file (sweep_id,game_id,hitting_t). One curve is drawn per
sweep id: the across-game mean with a +-1 standard deviation band, a star
where the mean curve first crosses its threshold, and a horizontal
threshold line. Output is strictly a function of the CSV contents: SVG
renders carry no timestamps and fixed hash salts, so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "pgames-plots"

FULL_FEEDBACK_DEFAULT = ("log_linear", "hedge")
REDUCED_FEEDBACK_DEFAULT = ("binary_log_linear", "exp3", "annealed_ew")


class SchemaError(ValueError):
    """The CSV does not conform to the experiment schema."""


@dataclass(frozen=True)
class PlotSpec:
    """What to render.

    ``thresholds`` maps sweep ids to their 1 - eps lines; a single float
    applies to every sweep. ``sweep_ids`` selects and orders curves
    (default: file order). ``labels`` overrides legend text per sweep id.
    """

    curves_csv: str
    output: str
    hitting_csv: str | None = None
    sweep_ids: tuple[str, ...] | None = None
    labels: dict = field(default_factory=dict)
    thresholds: object = None          # float | {sweep_id: float} | None
    format: str = "svg"
    title: str = ""
    log_x: bool = True

    def __post_init__(self):
        if self.format not in ("png", "svg"):
            raise SchemaError(f"unsupported format {self.format!r}")


@dataclass(frozen=True)
class SweepSeries:
    sweep_id: str
    times: np.ndarray
    mean: np.ndarray          # across games
    std: np.ndarray
    hitting: int | None       # first time the mean crosses its threshold


def read_curves(path: str):
    """Parse the curves CSV into metadata and per-sweep per-game series."""
    metadata = {}
    rows = []
    with open(path, newline="") as fh:
        header = None
        for raw in fh:
            line = raw.rstrip("\r\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = line.split(",")
                expected = ["sweep_id", "game_id", "t", "mean_potential",
                            "std_potential"]
                if header != expected:
                    raise SchemaError(
                        f"curve header {header} != {expected} in {path}")
                continue
            if line:
                rows.append(line)
    if header is None or not rows:
        raise SchemaError(f"no curve rows in {path}")

    sweeps: dict = {}
    for line in csv.reader(rows):
        if len(line) != 5:
            raise SchemaError(f"malformed row {line!r} in {path}")
        sweep_id, game_id, t, mean, std = line
        game = sweeps.setdefault(sweep_id, {}).setdefault(int(game_id), [])
        game.append((int(t), float(mean), float(std)))
    out = {}
    for sweep_id, games in sweeps.items():
        out[sweep_id] = {
            g: np.array(sorted(vals)) for g, vals in games.items()
        }
    return metadata, out


def read_hitting(path: str) -> dict:
    """(sweep_id, game_id) -> hitting time or None."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(l for l in fh if not l.startswith("#"))
        header = next(reader, None)
        if header != ["sweep_id", "game_id", "hitting_t"]:
            raise SchemaError(f"hitting header {header} in {path}")
        for row in reader:
            if not row:
                continue
            sweep_id, game_id, hit = row
            out[(sweep_id, int(game_id))] = int(hit) if hit else None
    return out


def aggregate(games: dict, threshold: float | None) -> SweepSeries:
    """Across-game mean/std on the common grid plus the mean-curve star."""
    grids = [vals[:, 0] for vals in games.values()]
    base = grids[0]
    for grid in grids[1:]:
        if len(grid) != len(base) or (grid != base).any():
            raise SchemaError("games of one sweep use different time grids")
    stack = np.stack([vals[:, 1] for vals in games.values()])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0)
    hitting = None
    if threshold is not None:
        above = np.nonzero(mean >= threshold)[0]
        if above.size:
            hitting = int(base[above[0]])
    return SweepSeries("", base, mean, std, hitting)


def _threshold_for(spec: PlotSpec, sweep_id: str) -> float | None:
    if spec.thresholds is None:
        return None
    if isinstance(spec.thresholds, dict):
        return spec.thresholds.get(sweep_id)
    return float(spec.thresholds)


def _select_sweeps(spec: PlotSpec, sweeps: dict) -> list[str]:
    if spec.sweep_ids is None:
        return list(sweeps)
    missing = [s for s in spec.sweep_ids if s not in sweeps]
    if missing:
        raise SchemaError(
            f"sweep ids {missing} not present in the CSV "
            f"(available: {sorted(sweeps)})")
    return list(spec.sweep_ids)


def _draw_sweep(ax, sweep_id: str, series: SweepSeries, label: str, color):
    ax.plot(series.times, series.mean, label=label, color=color,
            gid=f"curve-{sweep_id}")
    ax.fill_between(series.times, series.mean - series.std,
                    series.mean + series.std, alpha=0.2, color=color,
                    linewidth=0, gid=f"band-{sweep_id}")
    if series.hitting is not None:
        y = series.mean[np.nonzero(series.times == series.hitting)[0][0]]
        ax.plot([series.hitting], [y], marker="*", markersize=14,
                color=color, linestyle="none", gid=f"star-{sweep_id}")


def _finish_axes(ax, spec: PlotSpec, thresholds: dict):
    for k, (sweep_id, value) in enumerate(sorted(thresholds.items())):
        ax.axhline(value, color="gray", linestyle="--", linewidth=0.8,
                   gid=f"threshold-{sweep_id}")
    if spec.log_x:
        ax.set_xscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("expected potential")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="lower right", fontsize=8)


def _save(fig, spec: PlotSpec) -> str:
    if spec.format == "svg":
        fig.savefig(spec.output, format="svg", metadata={"Date": None})
    else:
        fig.savefig(spec.output, format="png", dpi=150)
    plt.close(fig)
    return spec.output


def render_convergence(spec: PlotSpec) -> str:
    """One curve per sweep value with band, star, and threshold line."""
    _, sweeps = read_curves(spec.curves_csv)
    if spec.hitting_csv:
        read_hitting(spec.hitting_csv)   # schema validation only
    order = _select_sweeps(spec, sweeps)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    thresholds = {}
    for k, sweep_id in enumerate(order):
        thr = _threshold_for(spec, sweep_id)
        series = aggregate(sweeps[sweep_id], thr)
        label = spec.labels.get(sweep_id, sweep_id)
        if thr is not None and series.hitting is None:
            label += " (never reaches threshold)"
        _draw_sweep(ax, sweep_id, series, label, colors[k % len(colors)])
        if thr is not None:
            thresholds[sweep_id] = thr
    _finish_axes(ax, spec, thresholds)
    if spec.title:
        ax.set_title(spec.title)
    return _save(fig, spec)


def render_comparison(spec: PlotSpec) -> str:
    """Two panels: full-feedback and reduced-feedback algorithm curves."""
    metadata, sweeps = read_curves(spec.curves_csv)
    if spec.hitting_csv:
        read_hitting(spec.hitting_csv)   # schema validation only
    full = tuple((metadata.get("full_feedback") or
                  ",".join(FULL_FEEDBACK_DEFAULT)).split(","))
    reduced = tuple((metadata.get("reduced_feedback") or
                     ",".join(REDUCED_FEEDBACK_DEFAULT)).split(","))
    available = _select_sweeps(spec, sweeps)
    panels = [("full feedback", [s for s in full if s in available]),
              ("reduced feedback", [s for s in reduced if s in available])]
    if not any(ids for _, ids in panels):
        raise SchemaError("no recognized algorithm sweep ids in the CSV")
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0), sharey=True)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    color_of = {s: colors[k % len(colors)]
                for k, s in enumerate(full + reduced)}
    for ax, (panel_title, ids) in zip(axes, panels):
        thresholds = {}
        for sweep_id in ids:
            thr = _threshold_for(spec, sweep_id)
            series = aggregate(sweeps[sweep_id], thr)
            label = spec.labels.get(sweep_id, sweep_id)
            if thr is not None and series.hitting is None:
                label += " (never reaches threshold)"
            _draw_sweep(ax, sweep_id, series, label, color_of[sweep_id])
            if thr is not None:
                thresholds[sweep_id] = thr
        _finish_axes(ax, spec, thresholds)
        ax.set_title(panel_title)
    if spec.title:
        fig.suptitle(spec.title)
    return _save(fig, spec)
