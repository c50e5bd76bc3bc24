"""Write a :class:`SummaryReport` and its raw streams to an output directory."""
from __future__ import annotations

import logging
import os
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .chaos import write_learned_weights_csv  # noqa: E402
from .experiments import RawStreams, SummaryReport  # noqa: E402
from .ising import write_drive_csv  # noqa: E402
from .network import write_spikes_csv, write_weights_csv  # noqa: E402

logger = logging.getLogger(__name__)

SPIKES_FILE = "spikes.csv"
WEIGHTS_FILE = "weights.csv"
SUMMARY_FILE = "summary.json"
RASTER_FILE = "raster.svg"
WEIGHT_PLOT_FILE = "weights.svg"
BARS_FILE = "bars.svg"
LEARNED_WEIGHTS_FILE = "learned_weights.csv"
DRIVE_FILE = "drive.csv"

# no timestamps and a fixed id salt keep reruns byte-identical
_SVG_RC = {"svg.fonttype": "none", "svg.hashsalt": "snan"}
_SVG_METADATA = {"Date": None}


def _save(fig, path: str) -> str:
    try:
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    except OSError as exc:
        raise OSError(f"Failed to write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_raster(path: str, events: Sequence, title: str = "") -> str:
    """One marker per spike event, grouped under the ``spikes`` id."""
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(8, 4))
        steps = [e.step for e in events]
        units = [e.unit_id for e in events]
        ax.plot(steps, units, linestyle="none", marker="|", markersize=3, color="black", gid="spikes")
        ax.set_xlabel("step")
        ax.set_ylabel("unit id")
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_weights(path: str, snapshots: Sequence[tuple[int, int, int, int]], title: str = "") -> str:
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(8, 4))
        series: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for step, pre, post, weight in snapshots:
            series.setdefault((pre, post), []).append((step, weight))
        steps_seen = {step for step, _, _, _ in snapshots}
        for (pre, post), points in sorted(series.items()):
            xs, ys = zip(*points)
            if len(steps_seen) > 1:
                ax.plot(xs, ys, linewidth=0.8, label=f"{pre}->{post}")
            else:
                ax.plot(xs, ys, linestyle="none", marker=".")
        if 0 < len(series) <= 12 and len(steps_seen) > 1:
            ax.legend(fontsize="small")
        ax.set_xlabel("step")
        ax.set_ylabel("weight")
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_bars(path: str, bars: dict, ylabel: str = "", title: str = "") -> str:
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(8, 4))
        labels = list(bars)
        ax.bar(np.arange(len(labels)), [bars[k] for k in labels], color="tab:blue")
        ax.set_xticks(np.arange(len(labels)))
        ax.set_xticklabels(labels, rotation=45, ha="right")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def emit_outputs(report: SummaryReport, out_dir: str, streams: Optional[RawStreams] = None) -> list[str]:
    """Write CSV streams, ``summary.json`` and SVG plots; returns the written paths."""
    streams = streams if streams is not None else report.streams
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"Failed to create output directory {out_dir}: {exc}") from exc

    def target(name: str) -> str:
        return os.path.join(out_dir, name)

    written = [
        write_spikes_csv(target(SPIKES_FILE), streams.events),
        write_weights_csv(target(WEIGHTS_FILE), streams.weight_snapshots),
    ]
    if streams.learned_weights is not None:
        weights, rates = streams.learned_weights
        written.append(write_learned_weights_csv(target(LEARNED_WEIGHTS_FILE), weights, rates))
    if streams.drive_frames is not None:
        written.append(write_drive_csv(target(DRIVE_FILE), streams.drive_frames))

    summary = target(SUMMARY_FILE)
    try:
        with open(summary, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(report.to_json())
    except OSError as exc:
        raise OSError(f"Failed to write {summary}: {exc}") from exc
    written.append(summary)

    written.append(plot_raster(target(RASTER_FILE), streams.events, title=f"{report.experiment} spikes"))
    written.append(plot_weights(target(WEIGHT_PLOT_FILE), streams.weight_snapshots, title=f"{report.experiment} weights"))
    written.append(plot_bars(target(BARS_FILE), streams.bars, ylabel=streams.bar_label, title=report.experiment))
    logger.info("Wrote %d files to %s", len(written), out_dir)
    return written
