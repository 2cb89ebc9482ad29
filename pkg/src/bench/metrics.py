"""Per-episode aggregation of step records and the statistics the harness reports."""
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
import pandas as pd
from scipy import stats

from src.control import EpisodeRecord

KEYS = ["scenario", "policy", "seed", "sweep_value", "episode"]


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    policy: str
    seed: int
    sweep_value: float | None
    episode: int
    mean_reward: float
    mean_power_w: float
    service_quality: float  # fraction of steps where every BS met its rate
    fallback_rate: float


COLUMNS = [f.name for f in fields(MetricsRow)]


def records_frame(records: list[EpisodeRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records], columns=[f.name for f in fields(EpisodeRecord)])


def rows_frame(rows: list[MetricsRow]) -> pd.DataFrame:
    df = pd.DataFrame([asdict(r) for r in rows], columns=COLUMNS)
    df["sweep_value"] = df["sweep_value"].astype(float)
    return df


def episode_rows(
    records: list[EpisodeRecord],
    scenario: str,
    policy: str,
    seed: int,
    sweep_value: float | None = None,
) -> list[MetricsRow]:
    """One row per episode: means over all (step, BS) records of that episode."""
    if not records:
        return []
    df = records_frame(records)
    by_episode = df.groupby("episode")
    quality = df.groupby(["episode", "step"])["constraint_ok"].all().groupby(level="episode").mean()
    summary = pd.DataFrame(
        {
            "mean_reward": by_episode["reward"].mean(),
            "mean_power_w": by_episode["total_power"].mean(),
            "service_quality": quality,
            "fallback_rate": by_episode["fallback"].mean(),
        }
    )
    return [
        MetricsRow(
            scenario=scenario,
            policy=policy,
            seed=seed,
            sweep_value=sweep_value,
            episode=int(episode),
            mean_reward=float(row.mean_reward),
            mean_power_w=float(row.mean_power_w),
            service_quality=float(row.service_quality),
            fallback_rate=float(row.fallback_rate),
        )
        for episode, row in summary.iterrows()
    ]


def service_quality(records: list[EpisodeRecord]) -> float:
    df = records_frame(records)
    return float(df.groupby(["episode", "step"])["constraint_ok"].all().mean())


def final_means(
    rows: list[MetricsRow], window: int, metric: str | list[str] = "mean_reward"
) -> pd.DataFrame:
    """Per (policy, sweep value, seed), the mean of `metric` over the last `window` episodes."""
    df = rows_frame(rows)
    last = df.groupby(["scenario", "policy", "sweep_value", "seed"], dropna=False)["episode"].transform("max")
    tail = df[df["episode"] > last - window]
    return (
        tail.groupby(["scenario", "policy", "sweep_value", "seed"], dropna=False)[metric]
        .mean()
        .reset_index()
    )


def final_rewards(
    rows: list[MetricsRow], window: int, policy: str | None = None, sweep_value: float | None = None
) -> np.ndarray:
    """Per-seed final mean rewards for one policy and sweep value, ordered by seed."""
    df = final_means(rows, window)
    if policy is not None:
        df = df[df["policy"] == policy]
    df = df[df["sweep_value"].isna()] if sweep_value is None else df[df["sweep_value"] == sweep_value]
    return df.sort_values("seed")["mean_reward"].to_numpy()


def pooled_standard_error(a: np.ndarray, b: np.ndarray) -> float:
    """Standard error of the difference of two sample means."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    var_a = a.var(ddof=1) if len(a) > 1 else 0.0
    var_b = b.var(ddof=1) if len(b) > 1 else 0.0
    return math.sqrt(var_a / len(a) + var_b / len(b))


def summarize(rows: list[MetricsRow], window: int) -> pd.DataFrame:
    """Final-window means over seeds, with their standard errors, per policy and sweep value."""
    metrics = ["mean_reward", "mean_power_w", "service_quality", "fallback_rate"]
    per_seed = final_means(rows, window, metrics)
    grouped = per_seed.groupby(["scenario", "policy", "sweep_value"], dropna=False)
    summary = grouped[metrics].mean()
    summary["reward_se"] = grouped["mean_reward"].sem(ddof=1).fillna(0.0)
    summary["seeds"] = grouped["mean_reward"].size()
    return summary.reset_index()


def modal_actions(records: list[EpisodeRecord], first_episode: int = 0) -> dict[int | float, int]:
    """Most frequent action per state from `first_episode` on; lowest level wins ties."""
    df = records_frame(records)
    df = df[df["episode"] >= first_episode]
    counts = df.groupby(["state", "action"]).size().reset_index(name="count")
    counts = counts.sort_values(["state", "count", "action"], ascending=[True, False, True])
    modes = counts.drop_duplicates("state")
    return {state: int(action) for state, action in zip(modes["state"], modes["action"])}


def reward_trend(rows: list[MetricsRow]) -> tuple[float, float]:
    """Mann-Kendall trend of the seed-averaged episode reward.

    Returns:
        Kendall's tau against the episode index and its two-sided p-value
    """
    curve = rows_frame(rows).groupby("episode")["mean_reward"].mean().sort_index()
    result = stats.kendalltau(curve.index.to_numpy(), curve.to_numpy())
    return float(result.statistic), float(result.pvalue)
