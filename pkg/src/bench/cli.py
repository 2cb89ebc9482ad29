import argparse
import logging
from dataclasses import replace
from pathlib import Path

from src.bench.config import ScenarioConfig, SweepConfig, load_config, write_effective_config
from src.bench.export import PLOT_METRICS, export_csv, export_svg, load_metrics
from src.bench.metrics import MetricsRow, summarize
from src.bench.runner import ablate, run_scenario
from src.errors import PowerControlError

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"


def parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="power-control",
        description="LLM in-context-learning power control for small base stations",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    def scenario_command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, type=Path, help="Scenario JSON file")
        sub.add_argument("--out", type=Path, default=Path("results"), help="Output directory")
        sub.add_argument("--workers", type=int, help="Override the number of worker processes")
        return sub

    scenario_command("run", "Run one scenario")
    scenario_command("ablate", "Run icl beside its random-example, no-pool, no-exploration and feedback variants")
    sweep_parser = scenario_command("sweep", "Run a scenario once per parameter value")
    sweep_parser.add_argument("--param", required=True, help="Dotted parameter path, or c_min / examples")
    sweep_parser.add_argument("--values", required=True, type=parse_values, help="Comma-separated values")

    export = commands.add_parser("export", help="Re-export a metrics file as CSV or SVG")
    export.add_argument("--format", required=True, choices=["csv", "svg"])
    export.add_argument("--input", type=Path, default=Path("results") / METRICS_FILE)
    export.add_argument("--out", type=Path, required=True)
    export.add_argument("--metric", default="mean_reward", choices=PLOT_METRICS)
    return parser


def finish(rows: list[MetricsRow], cfg: ScenarioConfig, out: Path) -> None:
    write_effective_config(cfg, out)
    export_csv(rows, out / METRICS_FILE)
    if rows:
        logger.info("Final %d-episode means:\n%s", cfg.final_window, summarize(rows, cfg.final_window).to_string(index=False))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        match args.command:
            case "export":
                rows = load_metrics(args.input)
                if args.format == "csv":
                    export_csv(rows, args.out)
                else:
                    export_svg(rows, args.out, args.metric)
                return 0
            case command:
                cfg = load_config(args.config)
                if args.workers is not None:
                    cfg = replace(cfg, workers=args.workers)
                match command:
                    case "run":
                        rows = run_scenario(cfg, args.out)
                    case "ablate":
                        rows = ablate(cfg, args.out)
                    case "sweep":
                        cfg = replace(cfg, sweep=SweepConfig(param=args.param, values=tuple(args.values)))
                        rows = run_scenario(cfg, args.out)
                    case _:
                        raise ValueError(f"Unknown command: {command}")
                finish(rows, cfg, args.out)
                return 0
    except PowerControlError as e:
        logger.error("%s", e)
        return 2
