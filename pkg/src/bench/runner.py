"""Run scenarios: one cell per (seed, sweep value), cells in parallel, rows merged at the end."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from src.baselines import ExhaustivePolicy, FeedbackPolicy, QLearningPolicy, RandomPolicy
from src.bench.config import ScenarioConfig, SweepConfig, apply_param
from src.bench.metrics import MetricsRow, episode_rows, final_means
from src.control import (
    EpisodeRecord,
    IclContext,
    IclPolicy,
    Policy,
    RunStreams,
    StateProcess,
    run_episodes,
)
from src.experience import Example, ExperiencePool
from src.llm import TranscriptRecorder, make_llm
from src.prompting import PromptTemplate

logger = logging.getLogger(__name__)

ABLATION_POLICIES = ("icl", "icl_random_examples", "icl_nopool", "icl_noexplore", "feedback")
EXAMPLE_COUNTS = (0, 1, 2, 4, 8, 16)
SELECTION_MODES = {
    "icl": "ranked",
    "icl_random_examples": "random",
    "icl_nopool": "none",
    "icl_noexplore": "ranked",
}


@dataclass(frozen=True)
class CellResult:
    seed: int
    sweep_value: float | None
    records: list[EpisodeRecord]
    pools: dict[int, tuple[Example, ...]]


def load_template(cfg: ScenarioConfig) -> PromptTemplate:
    if cfg.template_path:
        return PromptTemplate.from_file(cfg.template_path, cfg.case)
    return PromptTemplate.default(cfg.case)


def build_policy(cfg: ScenarioConfig, streams: RunStreams, recorder: TranscriptRecorder | None = None) -> Policy:
    control = cfg.control
    match cfg.policy:
        case "icl" | "icl_random_examples" | "icl_nopool" | "icl_noexplore":
            if cfg.policy == "icl_noexplore":
                control = replace(control, epsilon=0.0, epsilon_min=0.0)
            ctx = IclContext(
                case=cfg.case,
                template=load_template(cfg),
                selection=cfg.selection,
                llm=make_llm(cfg.llm, streams.llm, recorder),
                llm_cfg=cfg.llm,
                streams=streams,
                mode=SELECTION_MODES[cfg.policy],  # type: ignore[arg-type]
                max_examples=control.max_examples,
            )
            return IclPolicy(ctx, control, cfg.network.num_bs, capacity=cfg.pool_capacity, tag=cfg.policy)
        case "feedback":
            llm = make_llm(cfg.llm, streams.llm, recorder)
            return FeedbackPolicy(llm, load_template(cfg), cfg.llm, streams)
        case "qlearning":
            return QLearningPolicy(cfg.qlearning, cfg.case, streams, control.episodes, control.steps)
        case "exhaustive":
            return ExhaustivePolicy(cfg.network, cfg.reward)
        case "random":
            return RandomPolicy(streams, cfg.network.num_levels)
        case _:
            raise ValueError(f"Unknown policy: {cfg.policy}")


def run_cell(cfg: ScenarioConfig, seed: int, sweep_value: float | None = None) -> CellResult:
    """One seed of one configuration, with fresh pools, tables and generators."""
    streams = RunStreams.from_seed(seed)
    recorder = TranscriptRecorder(cfg.llm.record_path) if cfg.llm.record_path else None
    policy = build_policy(cfg, streams, recorder)
    process = StateProcess(cfg.network, cfg.case, streams.state, cfg.user_range)
    records = run_episodes(policy, process, cfg.network, cfg.reward, cfg.control.episodes, cfg.control.steps)
    pools = {bs: pool.snapshot() for bs, pool in getattr(policy, "pools", {}).items()}
    return CellResult(seed=seed, sweep_value=sweep_value, records=records, pools=pools)


def _cell_configs(cfg: ScenarioConfig) -> list[tuple[ScenarioConfig, int, float | None]]:
    values = cfg.sweep.values if cfg.sweep is not None else (None,)
    cells = []
    for value in values:
        cell_cfg = cfg if value is None else apply_param(cfg, cfg.sweep.param, value)  # type: ignore[union-attr]
        cells.extend((cell_cfg, seed, value) for seed in cfg.seeds)
    return cells


def _run_cell_args(args: tuple[ScenarioConfig, int, float | None]) -> CellResult:
    return run_cell(*args)


def save_pools(result: CellResult, out_dir: Path) -> None:
    name = f"seed_{result.seed}" if result.sweep_value is None else f"seed_{result.seed}_sweep_{result.sweep_value:g}"
    for bs, examples in result.pools.items():
        pool = ExperiencePool(capacity=None)
        for example in examples:
            pool.append(example)
        pool.save_ndjson(out_dir / "pools" / name / f"pool_{bs}.ndjson")


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None) -> list[MetricsRow]:
    """Run every (seed, sweep value) cell of `cfg` and aggregate per-episode rows.

    Args:
        cfg: Scenario to run
        out_dir: Where pools and transcripts go; nothing is written when None

    Returns:
        One row per (seed, sweep value, episode), in cell order
    """
    if out_dir is not None and cfg.llm.provider == "openai" and cfg.llm.record_path is None:
        cfg = replace(cfg, llm=replace(cfg.llm, record_path=str(Path(out_dir) / "transcripts.ndjson")))
    cells = _cell_configs(cfg)
    logger.info("Running %s/%s: %d cells on %d workers", cfg.scenario, cfg.policy, len(cells), cfg.workers)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
            results = list(executor.map(_run_cell_args, cells))
    else:
        results = [_run_cell_args(cell) for cell in cells]

    rows = []
    for result in results:
        rows.extend(episode_rows(result.records, cfg.scenario, cfg.policy, result.seed, result.sweep_value))
        if out_dir is not None:
            save_pools(result, Path(out_dir))
    fallbacks = sum(r.fallback for result in results for r in result.records)
    if fallbacks:
        logger.warning("%s/%s: %d decisions fell back to a random level", cfg.scenario, cfg.policy, fallbacks)
    return rows


def ablate(cfg: ScenarioConfig, out_dir: str | Path | None = None) -> list[MetricsRow]:
    """Full ICL against its ablated variants on identical seeds.

    The variants draw random examples, keep no pool, never explore, or see only
    the previous outcome as feedback.
    """
    rows = []
    for policy in ABLATION_POLICIES:
        policy_dir = None if out_dir is None else Path(out_dir) / policy
        rows.extend(run_scenario(replace(cfg, policy=policy), policy_dir))
    return rows


def sweep(cfg: ScenarioConfig, param: str, values: list[float], out_dir: str | Path | None = None) -> list[MetricsRow]:
    return run_scenario(replace(cfg, sweep=SweepConfig(param=param, values=tuple(values))), out_dir)


def sweep_examples(
    cfg: ScenarioConfig, counts: list[int] | tuple[int, ...] = EXAMPLE_COUNTS, out_dir: str | Path | None = None
) -> list[MetricsRow]:
    """ICL with the prompt example budget set to each count in turn."""
    if any(count < 0 for count in counts):
        raise ValueError(f"Example counts must be >= 0, got {list(counts)}")
    return sweep(cfg, "examples", list(counts), out_dir)


def cap_to_reach(rows: list[MetricsRow], reference: float, window: int, fraction: float = 0.95) -> float | None:
    """Smallest sweep value whose seed-mean final reward reaches `fraction` of `reference`."""
    finals = final_means(rows, window).groupby("sweep_value")["mean_reward"].mean().sort_index()
    for value, reward in finals.items():
        if reward >= fraction * reference:
            return float(value)
    return None
