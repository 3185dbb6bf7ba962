"""Report writers: CSV/JSON outputs, run manifests, and rendered figures.

Reports are machine-first and byte-reproducible: JSON is written with
sorted keys, CSV with a fixed header and row order, and the manifest
isolates the only non-deterministic value (wall-clock time) in its
single "timestamp" key so runs can be diffed around it.  Figures are
rendered to PNG beside the delimited files for quick inspection; they
are a convenience layer, not part of the byte-stability contract.

Output directories are never silently reused: each run gets a fresh
directory, suffixed -2, -3, ... when the name is taken.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

from .metrics import AggregateStats

SCHEMA_VERSION = 1


def ensure_run_dir(out_dir: Path | str, name: str) -> Path:
    """Create out_dir/name, suffixing -2, -3, ... instead of overwriting."""
    base = Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    candidate = base / name
    counter = 1
    while candidate.exists():
        counter += 1
        candidate = base / f"{name}-{counter}"
    candidate.mkdir()
    return candidate


def write_json(path: Path, payload: dict) -> None:
    """Stable JSON rendering: sorted keys, trailing newline."""
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_manifest(run_dir: Path, command: str, config: dict, package_version: str) -> None:
    """Record everything needed to reproduce the run.

    The timestamp is the single non-reproducible field, isolated in its
    own key; the rest of the manifest is a pure function of the inputs.
    """
    write_json(
        run_dir / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "package_version": package_version,
            "config": config,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        },
    )


def write_histograms(run_dir: Path, stats: AggregateStats, formats: str) -> None:
    """probe_hist.csv / move_hist.csv with op_type, bucket, count rows."""
    if formats in ("csv", "both"):
        for which in ("probe", "move"):
            write_csv(
                run_dir / f"{which}_hist.csv",
                ["op_type", "bucket", "count"],
                stats.histogram_rows(which),
            )


def write_queue_trace(run_dir: Path, stats: AggregateStats, formats: str) -> None:
    if formats in ("csv", "both"):
        rows = []
        for label in sorted(stats.queue_trace):
            rows.extend(
                (label, op_index, qlen) for op_index, qlen in stats.queue_trace[label]
            )
        write_csv(run_dir / "queue_trace.csv", ["trace", "op_index", "queue_len"], rows)


def rows_to_csv(run_dir: Path, name: str, rows: list[dict], formats: str) -> None:
    """Write a list of uniform dict rows as name.csv (sorted columns)."""
    if formats in ("csv", "both") and rows:
        header = sorted(rows[0].keys())
        write_csv(run_dir / f"{name}.csv", header, [[r[h] for h in header] for r in rows])


# Figures ---------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(
        {
            "figure.figsize": (7.0, 4.2),
            "axes.grid": True,
            "grid.alpha": 0.3,
            "font.size": 10,
        }
    )
    return plt


def fig_queue_trace(run_dir: Path, stats: AggregateStats, threshold: int | None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots()
    for label in sorted(stats.queue_trace):
        points = stats.queue_trace[label]
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            lw=0.9,
            label=label or "trace",
        )
    if threshold is not None:
        ax.axhline(threshold, color="crimson", ls="--", lw=1, label="overflow threshold")
    ax.set_xlabel("operation index")
    ax.set_ylabel("pending queue length")
    ax.set_title("Queue length over the run")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(run_dir / "queue_trace.png", dpi=120)
    plt.close(fig)


def fig_move_hist(run_dir: Path, stats: AggregateStats, move_budget: int | None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots()
    hist = stats.move_hist["insert"]
    buckets = sorted(hist)
    ax.bar(buckets, [hist[b] for b in buckets], width=0.8, color="#40708c")
    if move_budget is not None:
        ax.axvline(move_budget + 0.5, color="crimson", ls="--", lw=1, label="move budget L")
        ax.legend(fontsize=8)
    ax.set_yscale("log")
    ax.set_xlabel("moves per insert")
    ax.set_ylabel("operations (log scale)")
    ax.set_title("Insert move-count histogram")
    fig.tight_layout()
    fig.savefig(run_dir / "move_hist.png", dpi=120)
    plt.close(fig)


def fig_scaling(run_dir: Path, report) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots()
    sizes = report.n_list
    baseline = [report.summary["baseline_max_move_by_n"][str(n)] for n in sizes]
    deamort = [report.summary["deamortized_max_move_excl_rehash_by_n"][str(n)] for n in sizes]
    ax.plot(sizes, baseline, "o-", color="#b3432b", label="amortized baseline")
    ax.plot(sizes, deamort, "s-", color="#40708c", label="de-amortized (budget L)")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("capacity n")
    ax.set_ylabel("worst insert move_count")
    ax.set_title(f"Worst-case insert cost vs n ({report.seeds} seeds)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(run_dir / "scaling.png", dpi=120)
    plt.close(fig)


def fig_calibration(run_dir: Path, report) -> None:
    plt = _pyplot()
    largest = max(report.n_range)
    l_values = sorted({r["move_budget_L"] for r in report.rows})
    c_values = sorted({r["queue_constant_C"] for r in report.rows})
    grid = [[float("nan")] * len(l_values) for _ in c_values]
    for r in report.rows:
        if r["n"] != largest:
            continue
        grid[c_values.index(r["queue_constant_C"])][l_values.index(r["move_budget_L"])] = r[
            "zero_rehash_fraction"
        ]
    fig, ax = plt.subplots()
    im = ax.imshow(grid, origin="lower", aspect="auto", vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(l_values)), [str(v) for v in l_values])
    ax.set_yticks(range(len(c_values)), [str(v) for v in c_values])
    ax.set_xlabel("move budget L")
    ax.set_ylabel("queue constant C")
    ax.set_title(f"Zero-rehash fraction at n={largest}")
    fig.colorbar(im, ax=ax, label="fraction of seeds")
    fig.tight_layout()
    fig.savefig(run_dir / "calibration.png", dpi=120)
    plt.close(fig)


def fig_adversary(run_dir: Path, report) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots()
    pilots = [r["baseline_pilot_max_move"] for r in report.rows]
    replays = [r["baseline_replay_max_move"] for r in report.rows]
    ax.scatter(pilots, replays, s=14, alpha=0.6, color="#b3432b", label="baseline")
    dmax = [r["deamortized_replay_max_move_excl_rehash"] for r in report.rows]
    ax.scatter(
        [r["deamortized_pilot_max_move"] for r in report.rows],
        dmax,
        s=14,
        alpha=0.6,
        color="#40708c",
        label="de-amortized",
    )
    lim = max(max(pilots + replays), 1)
    ax.plot([0, lim], [0, lim], color="gray", lw=1, ls=":", label="replay = pilot")
    ax.set_xlabel("pilot worst insert move_count")
    ax.set_ylabel("replay worst insert move_count")
    ax.set_title(f"Clocked-adversary replay at n={report.n} ({report.seeds} seeds)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(run_dir / "adversary.png", dpi=120)
    plt.close(fig)
