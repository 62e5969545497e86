"""Run reports, delimited output, and figure rendering.

Every CLI run produces a JSON report (stable field order) plus CSV files;
SVG figures are rendered on request. Figures use a fixed hash salt and no
date metadata so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass

from .framework import AuditRecord


@dataclass
class RunReport:
    subcommand: str
    inputs_digest: str
    seed: int
    payload: dict
    audit: AuditRecord | None = None
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "inputs_digest": self.inputs_digest,
            "seed": self.seed,
            "payload": self.payload,
            "audit": self.audit.to_dict() if self.audit else None,
            "wall_clock_s": self.wall_clock_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, default=str)

    @staticmethod
    def from_json(text: str) -> "RunReport":
        data = json.loads(text)
        audit = data.get("audit")
        record = AuditRecord(**audit) if audit else None
        return RunReport(data["subcommand"], data["inputs_digest"], data["seed"],
                         data["payload"], record, data["wall_clock_s"])


def digest_inputs(argv, file_paths=()) -> str:
    h = hashlib.sha256()
    h.update("\0".join(map(str, argv)).encode())
    for p in file_paths:
        try:
            with open(p, "rb") as fh:
                h.update(fh.read())
        except OSError:
            h.update(f"<unreadable:{p}>".encode())
    return h.hexdigest()[:16]


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        return False


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _matplotlib():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "scid"
    return plt


_SVG_METADATA = {"Date": None, "Creator": None}


def plot_time_histogram(predicted, actual, path):
    """Per-path predicted vs measured execution-time histogram."""
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(7, 4))
    values = sorted(set(predicted) | set(actual))
    if values:
        lo, hi = min(values), max(values)
        span = max(hi - lo, 1)
        bins = min(40, max(10, len(values)))
        edges = [lo + span * i / bins for i in range(bins + 1)]
        ax.hist(actual, bins=edges, alpha=0.9, label="measured",
                histtype="step", hatch="///", color="tab:blue")
        ax.hist(predicted, bins=edges, alpha=0.45, label="predicted",
                color="tab:orange")
    ax.set_xlabel("execution time (cycles)")
    ax.set_ylabel("paths")
    if values:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=dict(_SVG_METADATA))
    plt.close(fig)


def plot_trace(trace, path, shade_by_mode=True):
    """State trajectory of a closed-loop run (time on x, one line per
    state/output column; mode changes as vertical marks)."""
    plt = _matplotlib()
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    t = trace.column("t")
    numeric = [c for c in trace.columns if c not in ("t", "mode")]
    top = [c for c in numeric if c == "theta"] or numeric[:1]
    bottom = [c for c in numeric if c not in top]
    for name in top:
        axes[0].plot(t, trace.column(name), label=name)
    for name in bottom:
        axes[1].plot(t, trace.column(name), label=name)
    if shade_by_mode and "mode" in trace.columns:
        modes = trace.column("mode")
        changes = [i for i in range(1, len(modes)) if modes[i] != modes[i - 1]]
        for ax in axes:
            for i in changes:
                ax.axvline(t[i], color="gray", lw=0.5, alpha=0.5)
    for ax in axes:
        ax.legend(loc="upper right", fontsize=8)
    axes[1].set_xlabel("time")
    fig.tight_layout()
    fig.savefig(path, metadata=dict(_SVG_METADATA))
    plt.close(fig)
