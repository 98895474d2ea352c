"""Static report: tables as CSV or Markdown plus effect plots."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import EMOTIONS, Table, analyze, as_data  # noqa: E402

EXPERIMENTS = ("Reduce", "Increase")
COLORS = {"Reduce": "#1f77b4", "Increase": "#d62728"}


def load_tables(bundle: str | Path, n_draws: int | None = None) -> dict[str, Table]:
    """Tables already written under ``bundle/tables``, or a fresh analysis of the bundle."""
    root = Path(bundle) / "tables"
    if root.is_dir() and any(root.glob("*.csv")):
        return {p.stem: Table.from_csv(p.stem, p.read_text(encoding="utf-8")) for p in sorted(root.glob("*.csv"))}
    kw = {} if n_draws is None else {"n_draws": n_draws}
    tables = analyze(as_data(bundle), **kw)
    # round-trip through text so both paths hand back the same cell types
    return {k: Table.from_csv(k, t.to_csv()) for k, t in tables.items()}


def _effects(table: Table, outcome: str) -> dict[str, tuple[float, float, float]]:
    out = {}
    for r in table.records():
        if r["outcome"] == outcome and isinstance(r["estimate"], float) and math.isfinite(r["estimate"]):
            out[r["experiment"]] = (r["estimate"], r["ci_low"], r["ci_high"])
    return out


def _errorbar(ax, x, est, lo, hi, color, label=None):
    ax.errorbar([x], [est], yerr=[[est - lo], [hi - est]], fmt="o", color=color, capsize=4, label=label)


def plot_polarization(tables: Mapping[str, Table], path: Path) -> Path:
    """Thermometer effects, in-feed and post-experiment, one marker per experiment."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5), sharey=True)
    for ax, key, title in zip(axes, ("infeed_effects", "post_effects"), ("In-feed", "Post-experiment")):
        eff = _effects(tables[key], "thermometer") if key in tables else {}
        for i, exp in enumerate(EXPERIMENTS):
            if exp in eff:
                _errorbar(ax, i, *eff[exp], COLORS[exp], exp)
        ax.axhline(0, color="grey", lw=0.8, ls="--")
        ax.set_xticks(range(len(EXPERIMENTS)), EXPERIMENTS)
        ax.set_xlim(-0.6, len(EXPERIMENTS) - 0.4)
        ax.set_title(title)
    axes[0].set_ylabel("Treatment effect (thermometer degrees)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_emotions(tables: Mapping[str, Table], path: Path) -> Path:
    """Per-emotion effects with 95% intervals; rows are in-feed and post, experiments side by side."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8), sharey=True)
    width = 0.18
    for ax, key, title in zip(axes, ("infeed_effects", "post_effects"), ("In-feed", "Post-experiment")):
        for j, exp in enumerate(EXPERIMENTS):
            for i, emo in enumerate(EMOTIONS):
                eff = _effects(tables[key], emo).get(exp) if key in tables else None
                if eff is not None:
                    _errorbar(ax, i + (j - 0.5) * 2 * width, *eff, COLORS[exp], exp if i == 0 else None)
        ax.axhline(0, color="grey", lw=0.8, ls="--")
        ax.set_xticks(range(len(EMOTIONS)), EMOTIONS)
        ax.set_title(title)
    axes[0].set_ylabel("Treatment effect (0-100 scale)")
    handles, labels = axes[0].get_legend_handles_labels()
    if handles:
        axes[0].legend(handles, labels, frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_clean(x) for x in v]
    return v


def summary(tables: Mapping[str, Table]) -> dict:
    """Headline numbers: exposure change and thermometer effects per experiment."""
    out: dict = {}
    for r in tables["exposure_change"].records():
        if r["metric"] == "aapa_share":
            out.setdefault(r["experiment"], {})["aapa_share_change"] = r["relative_change"]
    for key in ("infeed_effects", "post_effects"):
        for exp, (est, lo, hi) in _effects(tables[key], "thermometer").items():
            out.setdefault(exp, {})[key.replace("_effects", "_thermometer")] = {"estimate": est, "ci": [lo, hi]}
    return _clean(out)


def write_report(bundle: str | Path, out: str | Path | None = None, fmt: str = "csv",
                 plots: bool = True) -> list[Path]:
    """Write every table as ``.csv`` or ``.md``, the summary JSON and the two plots; returns written paths."""
    if fmt not in ("csv", "md"):
        raise ValueError(f"unknown format {fmt!r}")
    tables = load_tables(bundle)
    out = Path(out) if out is not None else Path(bundle) / "report"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in tables.items():
        p = out / f"{name}.{fmt}"
        p.write_text(table.to_csv() if fmt == "csv" else table.to_markdown(), encoding="utf-8")
        written.append(p)
    p = out / "summary.json"
    p.write_text(json.dumps(summary(tables), indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    written.append(p)
    if plots:
        written.append(plot_polarization(tables, out / "polarization.png"))
        written.append(plot_emotions(tables, out / "emotions.png"))
    return written
