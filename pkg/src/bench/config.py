"""Scenario configuration: JSON in, validated dataclasses out, effective config echoed back."""
import dataclasses
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from src.baselines import QConfig
from src.control import PolicyConfig, RewardConfig
from src.errors import ConfigError
from src.experience import DEFAULT_CAPACITY, SelectionConfig
from src.llm.base import LlmConfig
from src.netsim import Case, NetworkConfig

logger = logging.getLogger(__name__)

POLICIES: tuple[str, ...] = (
    "icl",
    "exhaustive",
    "qlearning",
    "feedback",
    "random",
    "icl_random_examples",
    "icl_nopool",
    "icl_noexplore",
)
LLM_POLICIES = frozenset({"icl", "icl_random_examples", "icl_nopool", "icl_noexplore", "feedback"})

SECTIONS: dict[str, type] = {
    "network": NetworkConfig,
    "reward": RewardConfig,
    "control": PolicyConfig,
    "selection": SelectionConfig,
    "llm": LlmConfig,
    "qlearning": QConfig,
}
# c_min is given in Mbit/s; examples is the total prompt budget n
ALIASES = ("c_min", "examples")
EFFECTIVE_CONFIG = "effective_config.json"


@dataclass(frozen=True)
class SweepConfig:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "default"
    case: Case = Case.DISCRETE
    policy: str = "icl"
    seeds: tuple[int, ...] = tuple(range(30))
    user_range: tuple[int, int] = (5, 15)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    control: PolicyConfig = field(default_factory=PolicyConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    qlearning: QConfig = field(default_factory=QConfig)
    sweep: SweepConfig | None = None
    template_path: str | None = None
    workers: int = 1
    final_window: int = 50
    pool_capacity: int | None = DEFAULT_CAPACITY

    def __post_init__(self) -> None:
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "user_range", tuple(int(n) for n in self.user_range))
        errors = validate(self)
        if errors:
            raise ConfigError(errors)


def validate(cfg: ScenarioConfig) -> list[str]:
    errors = []
    if not cfg.seeds:
        errors.append("seeds must not be empty")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        errors.append(f"seeds must be distinct, got {list(cfg.seeds)}")
    if cfg.policy not in POLICIES:
        errors.append(f"policy must be one of {POLICIES}, got {cfg.policy!r}")
    if len(cfg.user_range) != 2 or not 1 <= cfg.user_range[0] <= cfg.user_range[1]:
        errors.append(f"user_range must be [low, high] with 1 <= low <= high, got {list(cfg.user_range)}")
    if cfg.workers < 1:
        errors.append(f"workers must be >= 1, got {cfg.workers}")
    if cfg.final_window < 1:
        errors.append(f"final_window must be >= 1, got {cfg.final_window}")
    if cfg.pool_capacity is not None and cfg.pool_capacity < 1:
        errors.append(f"pool_capacity must be >= 1 or None, got {cfg.pool_capacity}")
    if cfg.policy in LLM_POLICIES and cfg.network.num_levels != 4:
        errors.append(f"LLM policies choose among 4 power levels, network has {cfg.network.num_levels}")
    if cfg.sweep is not None:
        if not cfg.sweep.values:
            errors.append(f"sweep over {cfg.sweep.param} has no values")
        if not param_exists(cfg, cfg.sweep.param):
            errors.append(f"Unknown sweep parameter: {cfg.sweep.param}")
    return errors


def param_exists(cfg: ScenarioConfig, name: str) -> bool:
    if name in ALIASES:
        return True
    head, _, rest = name.partition(".")
    if head == "user_range":
        return rest in ("low", "high")
    if head in SECTIONS:
        return rest in {f.name for f in fields(SECTIONS[head])}
    scalars = {"final_window", "pool_capacity", "workers"}
    return not rest and head in scalars


def _coerce(current: Any, value: Any) -> Any:
    if isinstance(current, bool):
        return bool(value)
    if isinstance(current, int) and float(value).is_integer():
        return int(value)
    return value


def apply_param(cfg: ScenarioConfig, name: str, value: Any) -> ScenarioConfig:
    """Copy of `cfg` with one parameter set, addressed by dotted path or alias."""
    if not param_exists(cfg, name):
        raise ConfigError(f"Unknown sweep parameter: {name}")
    match name.partition("."):
        case ("c_min", _, _):
            return replace(cfg, network=replace(cfg.network, min_rate=float(value) * 1e6))
        case ("examples", _, _):
            n = int(value)
            k_inadvisable = n // 4
            selection = replace(cfg.selection, k_recommended=n - k_inadvisable, k_inadvisable=k_inadvisable)
            return replace(cfg, selection=selection)
        case ("user_range", _, bound):
            low, high = cfg.user_range
            bounds = (int(value), high) if bound == "low" else (low, int(value))
            return replace(cfg, user_range=bounds)
        case (section, _, attr) if section in SECTIONS:
            sub = getattr(cfg, section)
            return replace(cfg, **{section: replace(sub, **{attr: _coerce(getattr(sub, attr), value)})})
        case (attr, _, _):
            return replace(cfg, **{attr: _coerce(getattr(cfg, attr), value)})


def _section(name: str, data: Any, errors: list[str]) -> Any:
    cls = SECTIONS[name]
    if data is None:
        return cls()
    if not isinstance(data, dict):
        errors.append(f"{name}: expected an object, got {type(data).__name__}")
        return cls()
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        errors.append(f"{name}: unknown keys {unknown}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items() if k in known}
    try:
        return cls(**kwargs)
    except ConfigError as e:
        errors.extend(f"{name}: {message}" for message in e.messages)
    except (TypeError, ValueError) as e:
        errors.append(f"{name}: {e}")
    return cls()


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    """Build a ScenarioConfig, defaulting every omitted field.

    Raises:
        ConfigError: With every problem found across all sections
    """
    errors: list[str] = []
    top = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        errors.append(f"unknown keys {unknown}")

    kwargs: dict[str, Any] = {name: _section(name, data.get(name), errors) for name in SECTIONS}
    for key in ("scenario", "policy", "template_path", "workers", "final_window", "pool_capacity"):
        if key in data:
            kwargs[key] = data[key]
    if "case" in data:
        try:
            kwargs["case"] = Case(data["case"])
        except ValueError:
            errors.append(f"case must be one of {[c.value for c in Case]}, got {data['case']!r}")
    for key in ("seeds", "user_range"):
        if key in data:
            kwargs[key] = tuple(data[key])
    if data.get("sweep") is not None:
        sweep = data["sweep"]
        try:
            kwargs["sweep"] = SweepConfig(param=str(sweep["param"]), values=tuple(sweep["values"]))
        except (KeyError, TypeError):
            errors.append("sweep must be an object with 'param' and 'values'")

    # invalid sections fell back to defaults above, so top-level checks still run
    cfg = None
    try:
        cfg = ScenarioConfig(**kwargs)
    except ConfigError as e:
        errors.extend(e.messages)
    except (TypeError, ValueError) as e:
        errors.append(str(e))
    if errors or cfg is None:
        raise ConfigError(errors)
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return config_from_dict(data)


def config_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def write_effective_config(cfg: ScenarioConfig, out_dir: str | Path) -> Path:
    path = Path(out_dir) / EFFECTIVE_CONFIG
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Effective config written to %s", path)
    return path
