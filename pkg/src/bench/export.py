import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from src.bench.metrics import COLUMNS, KEYS, MetricsRow, rows_frame  # noqa: E402
from src.errors import ExportError, ParseError  # noqa: E402

logger = logging.getLogger(__name__)

PLOT_METRICS = ("mean_reward", "mean_power_w", "service_quality", "fallback_rate")


def export_csv(rows: list[MetricsRow], path: str | Path) -> Path:
    """Write rows sorted by (scenario, policy, seed, sweep_value, episode), CRLF line ends."""
    path = Path(path)
    df = rows_frame(rows).sort_values(KEYS, na_position="first", kind="mergesort")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    except OSError as e:
        raise ExportError(f"Cannot write metrics to {path}: {e}") from e
    logger.info("Wrote %d rows to %s", len(df), path)
    return path


def load_metrics(path: str | Path) -> list[MetricsRow]:
    try:
        df = pd.read_csv(path)
    except OSError as e:
        raise ExportError(f"Cannot read metrics from {path}: {e}") from e
    missing = [c for c in COLUMNS if c not in df.columns]
    if missing:
        raise ParseError(f"{path} lacks columns {missing}")
    return [
        MetricsRow(
            scenario=str(r.scenario),
            policy=str(r.policy),
            seed=int(r.seed),
            sweep_value=None if pd.isna(r.sweep_value) else float(r.sweep_value),
            episode=int(r.episode),
            mean_reward=float(r.mean_reward),
            mean_power_w=float(r.mean_power_w),
            service_quality=float(r.service_quality),
            fallback_rate=float(r.fallback_rate),
        )
        for r in df.itertuples(index=False)
    ]


def export_svg(rows: list[MetricsRow], path: str | Path, metric: str = "mean_reward") -> Path:
    """Line chart of `metric` against episode, one line per policy (and sweep value), averaged over seeds."""
    if metric not in PLOT_METRICS:
        raise ValueError(f"Unknown metric: {metric}")
    path = Path(path)
    df = rows_frame(rows)
    plt.rcParams["svg.hashsalt"] = "power-control"
    fig, ax = plt.subplots(figsize=(7, 4))
    for (policy, sweep_value), group in df.groupby(["policy", "sweep_value"], dropna=False, sort=True):
        curve = group.groupby("episode")[metric].mean()
        label = policy if pd.isna(sweep_value) else f"{policy} ({sweep_value:g})"
        ax.plot(curve.index, curve.to_numpy(), label=label)
    ax.set_xlabel("episode")
    ax.set_ylabel(metric.replace("_", " "))
    ax.grid(True, alpha=0.3)
    if len(ax.get_lines()):
        ax.legend()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ExportError(f"Cannot write chart to {path}: {e}") from e
    finally:
        plt.close(fig)
    logger.info("Wrote %s chart to %s", metric, path)
    return path
