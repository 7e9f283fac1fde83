"""Render comparison figures from sampler CSV outputs.

Two figure types: overlaid posterior-density comparisons from density grids,
and accuracy-versus-simulation-count curves on a log x-axis.  Style is fixed
in code and all time-varying metadata is stripped, so rendering is a pure
function of the input CSVs: byte-identical output on every invocation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "zzgibbs-figures"

import matplotlib.pyplot as plt
import numpy as np

_COLORS = ["#1b263b", "#d62828", "#1f7a5c", "#e09f3e", "#5f5aa2", "#3a86ff", "#9a4c95"]
_SAVE_KW = {"metadata": {"Date": None}}


class SchemaError(ValueError):
    """Input CSV does not match the expected schema."""


@dataclass(frozen=True)
class LabeledInput:
    path: str
    label: str


@dataclass(frozen=True)
class FigureSpec:
    """One figure: labeled input CSVs plus output path and axis dressing."""

    kind: str
    inputs: tuple
    output: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    metric: str = "mean_err"
    dim: int = 1

    @staticmethod
    def from_dict(raw: dict) -> "FigureSpec":
        try:
            inputs = tuple(LabeledInput(d["path"], d["label"]) for d in raw["inputs"])
            return FigureSpec(
                kind=raw["kind"],
                inputs=inputs,
                output=raw["output"],
                title=raw.get("title", ""),
                xlabel=raw.get("xlabel", ""),
                ylabel=raw.get("ylabel", ""),
                metric=raw.get("metric", "mean_err"),
                dim=int(raw.get("dim", 1)),
            )
        except KeyError as exc:
            raise SchemaError(f"figure spec missing field {exc}") from exc


def _read_csv(path: str, columns: list[str]) -> dict[str, np.ndarray]:
    if not Path(path).exists():
        raise SchemaError(f"input file missing: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[: len(columns)] != columns:
            raise SchemaError(f"{path}: expected columns {columns}, found {header}")
        rows = [row for row in reader]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    return {name: data[:, k] for k, name in enumerate(header)}


def _new_axes(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.set_title(spec.title)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    return fig, ax


def render_density_comparison(spec: FigureSpec) -> str:
    """Overlay the density grids of several runs in one line plot."""
    if len(spec.inputs) < 1:
        raise SchemaError("density comparison needs at least one input")
    fig, ax = _new_axes(spec)
    grid_len = None
    for k, item in enumerate(spec.inputs):
        cols = _read_csv(item.path, ["x", "density"])
        if grid_len is None:
            grid_len = len(cols["x"])
        elif len(cols["x"]) != grid_len:
            plt.close(fig)
            raise SchemaError(f"{item.path}: grid length {len(cols['x'])} != {grid_len}")
        ax.plot(cols["x"], cols["density"], color=_COLORS[k % len(_COLORS)],
                linewidth=1.6, label=item.label)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(spec.output, **_SAVE_KW)
    plt.close(fig)
    return spec.output


def render_accuracy_curves(spec: FigureSpec) -> str:
    """Plot one error metric against simulation count, one curve per run."""
    if len(spec.inputs) < 1:
        raise SchemaError("accuracy curves need at least one input")
    if spec.metric not in ("mean_err", "sd_err"):
        raise SchemaError(f"unknown metric {spec.metric!r}")
    fig, ax = _new_axes(spec)
    for k, item in enumerate(spec.inputs):
        cols = _read_csv(item.path, ["sim_calls", "dim", "mean_err", "sd_err"])
        keep = cols["dim"] == spec.dim
        if not np.any(keep):
            plt.close(fig)
            raise SchemaError(f"{item.path}: no rows for dimension {spec.dim}")
        ax.plot(cols["sim_calls"][keep], cols[spec.metric][keep],
                color=_COLORS[k % len(_COLORS)], linewidth=1.6, label=item.label)
    ax.set_xscale("log")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(spec.output, **_SAVE_KW)
    plt.close(fig)
    return spec.output


_RENDERERS = {
    "density-comparison": render_density_comparison,
    "accuracy-curves": render_accuracy_curves,
}


def render_all(specs: list[FigureSpec]) -> list[str]:
    outputs = []
    for spec in specs:
        if spec.kind not in _RENDERERS:
            raise SchemaError(f"unknown figure kind {spec.kind!r}")
        outputs.append(_RENDERERS[spec.kind](spec))
    return outputs
