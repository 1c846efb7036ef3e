"""Render fedband CSV outputs to PNG figures.

Two figure kinds are supported. "regret" consumes replicate-summary
files (columns t, regret_mean, regret_std) and draws one mean curve per
input with a one-standard-deviation band. "alpha-sweep" consumes a
sweep table (columns alpha, reward_personalized, reward_local,
reward_global, best_local, best_global) and draws the three reward
curves plus two horizontal reference lines.

Inputs are never modified; rendering the same job twice produces
identical image bytes (fixed size, DPI, and font settings).
"""

import csv
import os
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGSIZE = (8.0, 5.0)
DPI = 120

REGRET_COLUMNS = ("t", "regret_mean", "regret_std")
SWEEP_COLUMNS = ("alpha", "reward_personalized", "reward_local",
                 "reward_global", "best_local", "best_global")

KINDS = ("regret", "alpha-sweep")


class SchemaError(ValueError):
    """Input CSV does not match the expected column layout."""


class PlotError(RuntimeError):
    """Plot job invalid or output not writable."""


@dataclass(frozen=True)
class PlotJob:
    """One figure to render: input CSVs, kind, and output path."""

    inputs: tuple[str, ...]
    kind: str
    out: str
    labels: Optional[tuple[str, ...]] = None
    title: Optional[str] = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; choices: {KINDS}")
        if not self.inputs:
            raise PlotError("at least one input CSV is required")
        if self.kind == "alpha-sweep" and len(self.inputs) != 1:
            raise PlotError("alpha-sweep takes exactly one input CSV")
        if self.labels is not None and len(self.labels) != len(self.inputs):
            raise PlotError(
                f"{len(self.labels)} labels for {len(self.inputs)} inputs")
        if not self.out:
            raise PlotError("output path is required")

    def label_for(self, k: int) -> str:
        if self.labels is not None:
            return self.labels[k]
        stem = os.path.basename(self.inputs[k])
        return stem[:-4] if stem.endswith(".csv") else stem


def read_columns(path: str, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Load a CSV as float columns, verifying the required names exist."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            names = reader.fieldnames or []
            missing = [c for c in required if c not in names]
            if missing:
                raise SchemaError(
                    f"{path}: missing column(s) {', '.join(missing)}; "
                    f"found {', '.join(names) or 'none'}")
            rows = list(reader)
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out = {}
    for name in required:
        try:
            out[name] = np.array([float(r[name]) for r in rows])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: column {name} is not numeric") from exc
    return out


def _save(fig, out: str) -> str:
    parent = os.path.dirname(os.path.abspath(out))
    try:
        os.makedirs(parent, exist_ok=True)
        fig.savefig(out, dpi=DPI)
    except OSError as exc:
        raise PlotError(f"cannot write {out}: {exc}") from exc
    finally:
        plt.close(fig)
    return out


def build_regret_figure(series, title: Optional[str] = None):
    """series: iterable of (label, t, mean, std) tuples."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label, t, mean, std in series:
        line, = ax.plot(t, mean, label=label)
        ax.fill_between(t, mean - std, mean + std,
                        color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    ax.set_title(title or "cumulative regret, mean with 1-std band")
    ax.legend()
    ax.margins(x=0)
    return fig


def plot_regret(job: PlotJob) -> str:
    """Mean regret curves with a 1-std band, one series per input CSV."""
    job.validate()
    if job.kind != "regret":
        raise PlotError(f"plot_regret got a {job.kind!r} job")
    series = []
    for k, path in enumerate(job.inputs):
        cols = read_columns(path, REGRET_COLUMNS)
        series.append((job.label_for(k), cols["t"], cols["regret_mean"],
                       cols["regret_std"]))
    return _save(build_regret_figure(series, job.title), job.out)


def build_sweep_figure(cols: dict[str, np.ndarray], title: Optional[str] = None):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    a = cols["alpha"]
    ax.plot(a, cols["reward_personalized"], marker="o", label="personalised")
    ax.plot(a, cols["reward_local"], marker="s", label="local")
    ax.plot(a, cols["reward_global"], marker="^", label="global")
    # the reference values repeat on every row; draw each once
    ax.axhline(float(cols["best_local"][0]), linestyle="--", color="tab:blue",
               linewidth=1.0, label="best local")
    ax.axhline(float(cols["best_global"][0]), linestyle="--", color="tab:orange",
               linewidth=1.0, label="best global")
    ax.set_xlabel("alpha")
    ax.set_ylabel("average per-step reward")
    ax.set_title(title or "reward versus mixing weight")
    ax.legend()
    return fig


def plot_alpha_sweep(job: PlotJob) -> str:
    """Reward-versus-alpha curves plus best-local/best-global lines."""
    job.validate()
    if job.kind != "alpha-sweep":
        raise PlotError(f"plot_alpha_sweep got a {job.kind!r} job")
    cols = read_columns(job.inputs[0], SWEEP_COLUMNS)
    return _save(build_sweep_figure(cols, job.title), job.out)


def render(job: PlotJob) -> str:
    """Dispatch a job to the right renderer."""
    job.validate()
    if job.kind == "regret":
        return plot_regret(job)
    return plot_alpha_sweep(job)
