"""Physical layer of the three-cell power-control problem.

Channel gains follow a deterministic 3GPP UMi-style line-of-sight law, every
cell splits its power equally over its resource blocks and hands the blocks
out round-robin, and neighbouring cells interfere on the co-channel block.
All functions here are pure.
"""
import math
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
from typing import TypeAlias

import numpy as np

from src.errors import AllocationError, ConfigError, DomainError

StateValue: TypeAlias = int | float
Levels: TypeAlias = tuple[int, ...]


def dbm_to_watt(dbm: float) -> float:
    return 10 ** (dbm / 10) / 1000


class Case(StrEnum):
    """Which quantity describes the per-BS state handed to the policy."""

    DISCRETE = "discrete"  # user count
    CONTINUOUS = "continuous"  # average user-BS distance


@dataclass(frozen=True)
class NetworkConfig:
    num_bs: int = 3
    rbs_per_bs: int = 25
    rb_bandwidth: float = 180e3  # Hz
    noise_density: float = dbm_to_watt(-174.0)  # W/Hz
    carrier_freq: float = 3.5e9  # Hz
    max_power: float = 1.0  # W
    min_rate: float = 0.5e6  # bit/s
    coverage_radius: float = 20.0  # m
    power_levels: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)  # W, level 1..n
    seed: int = 0
    inter_site_distance: float | None = None  # m, None -> 4 x coverage_radius
    min_distance: float = 1.0  # m

    def __post_init__(self) -> None:
        object.__setattr__(self, "power_levels", tuple(float(p) for p in self.power_levels))
        errors = []
        if self.num_bs < 2:
            errors.append(f"num_bs must be >= 2, got {self.num_bs}")
        if self.rbs_per_bs < 1:
            errors.append(f"rbs_per_bs must be >= 1, got {self.rbs_per_bs}")
        if self.rb_bandwidth <= 0:
            errors.append(f"rb_bandwidth must be > 0, got {self.rb_bandwidth}")
        if self.noise_density <= 0:
            errors.append(f"noise_density must be > 0, got {self.noise_density}")
        if self.carrier_freq <= 0:
            errors.append(f"carrier_freq must be > 0, got {self.carrier_freq}")
        if self.coverage_radius <= 0:
            errors.append(f"coverage_radius must be > 0, got {self.coverage_radius}")
        if not 0 < self.min_distance < self.coverage_radius:
            errors.append(f"min_distance must lie in (0, coverage_radius), got {self.min_distance}")
        if self.inter_site_distance is not None and self.inter_site_distance <= 0:
            errors.append(f"inter_site_distance must be > 0, got {self.inter_site_distance}")
        levels = self.power_levels
        if not levels:
            errors.append("power_levels must not be empty")
        else:
            if any(b <= a for a, b in zip(levels, levels[1:])):
                errors.append(f"power_levels must be strictly increasing, got {levels}")
            if levels[0] < 0:
                errors.append(f"power_levels must be non-negative, got {levels}")
            if levels[-1] > self.max_power:
                errors.append(f"max power level {levels[-1]} exceeds max_power {self.max_power}")
        if errors:
            raise ConfigError(errors)

    @property
    def num_levels(self) -> int:
        return len(self.power_levels)

    @property
    def site_distance(self) -> float:
        if self.inter_site_distance is None:
            return 4 * self.coverage_radius
        return self.inter_site_distance

    @property
    def bs_positions(self) -> np.ndarray:
        """Sites on a regular polygon whose neighbouring vertices are `site_distance` apart."""
        n = self.num_bs
        circumradius = self.site_distance / (2 * math.sin(math.pi / n))
        angles = np.pi / 2 + 2 * np.pi * np.arange(n) / n
        return circumradius * np.column_stack([np.cos(angles), np.sin(angles)])


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Environment state s_t: where every user sits, grouped by serving BS."""

    bs_positions: np.ndarray  # (num_bs, 2)
    user_positions: tuple[np.ndarray, ...]  # per BS, (U_b, 2) absolute coordinates
    case: Case = Case.DISCRETE

    @property
    def num_bs(self) -> int:
        return len(self.user_positions)

    @property
    def user_counts(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.user_positions)

    @property
    def distances(self) -> tuple[np.ndarray, ...]:
        """Distance from each user to its serving BS."""
        return tuple(
            np.linalg.norm(users - self.bs_positions[b], axis=1)
            for b, users in enumerate(self.user_positions)
        )

    @property
    def avg_distances(self) -> np.ndarray:
        return np.array([d.mean() for d in self.distances])

    def state_values(self) -> list[StateValue]:
        """Per-BS scalar state for the configured case."""
        match self.case:
            case Case.DISCRETE:
                return list(self.user_counts)
            case Case.CONTINUOUS:
                return [float(d) for d in self.avg_distances]
            case _:
                raise DomainError(f"Unknown case: {self.case}")


@dataclass(frozen=True)
class PowerDecision:
    levels: Levels  # 1-based level index per BS

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(int(level) for level in self.levels))

    def validate(self, config: NetworkConfig) -> None:
        if len(self.levels) != config.num_bs:
            raise DomainError(f"Expected {config.num_bs} levels, got {len(self.levels)}")
        for level in self.levels:
            if not 1 <= level <= config.num_levels:
                raise DomainError(f"Power level {level} outside 1..{config.num_levels}")

    def bs_power(self, config: NetworkConfig) -> np.ndarray:
        """Total transmit power P_b per BS."""
        self.validate(config)
        return np.asarray(config.power_levels)[np.asarray(self.levels) - 1]

    def rb_power(self, config: NetworkConfig) -> np.ndarray:
        """p_{b,k}: P_b split equally over the K_b resource blocks, shape (num_bs, K_b)."""
        per_rb = self.bs_power(config) / config.rbs_per_bs
        return np.repeat(per_rb[:, None], config.rbs_per_bs, axis=1)


@dataclass(frozen=True, eq=False)
class RbAllocation:
    owners: tuple[np.ndarray, ...]  # per BS, user index holding each RB (-1 when idle)

    def gamma(self, bs: int, rb: int, user: int) -> int:
        return int(self.owners[bs][rb] == user)

    def indicator(self, bs: int, num_users: int) -> np.ndarray:
        """gamma_{b,k,u} as a (U_b, K_b) 0/1 matrix."""
        return (self.owners[bs][None, :] == np.arange(num_users)[:, None]).astype(float)

    def rb_counts(self, bs: int, num_users: int) -> np.ndarray:
        return np.bincount(self.owners[bs][self.owners[bs] >= 0], minlength=num_users)

    def occupied(self) -> np.ndarray:
        """(num_bs, K_b) mask of RBs carrying a transmission."""
        return np.vstack([owner >= 0 for owner in self.owners])


@dataclass(frozen=True, eq=False)
class EvalReport:
    decision: PowerDecision
    user_rates: tuple[np.ndarray, ...]  # C_{b,u}, bit/s
    mean_rates: np.ndarray  # per BS, bit/s
    bs_power: np.ndarray  # P_b, W
    constraint_ok: np.ndarray  # per BS, mean rate >= C_min

    @property
    def total_power(self) -> float:
        return float(self.bs_power.sum())

    @property
    def all_ok(self) -> bool:
        return bool(self.constraint_ok.all())


def path_loss_db(distance: float | np.ndarray, config: NetworkConfig) -> float | np.ndarray:
    """PL = 32.4 + 21 log10(d / 1 m) + 20 log10(fc / 1 GHz)."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DomainError(f"Distance must be positive, got {distance}")
    loss = 32.4 + 21 * np.log10(d) + 20 * np.log10(config.carrier_freq / 1e9)
    return float(loss) if loss.ndim == 0 else loss


def channel_gain(distance: float | np.ndarray, config: NetworkConfig) -> float | np.ndarray:
    """Linear channel gain 10^(-PL/10)."""
    gain = 10 ** (-np.asarray(path_loss_db(distance, config)) / 10)
    return float(gain) if gain.ndim == 0 else gain


def link_gains(state: NetworkState, config: NetworkConfig) -> list[np.ndarray]:
    """Per BS b, the (U_b, num_bs) gains from every BS to each user served by b."""
    gains = []
    for users in state.user_positions:
        dist = np.linalg.norm(users[:, None, :] - state.bs_positions[None, :, :], axis=2)
        gains.append(channel_gain(dist, config))
    return gains


def allocate_rbs(state: NetworkState, config: NetworkConfig) -> RbAllocation:
    """Round-robin over users in index order.

    This is proportional fairness with equal rate history: every user has the
    same priority, so blocks rotate and per-user counts differ by at most one.
    """
    owners = []
    for bs, count in enumerate(state.user_counts):
        if count < 1:
            raise AllocationError(f"BS {bs} has no users to allocate resource blocks to")
        owners.append(np.arange(config.rbs_per_bs) % count)
    return RbAllocation(owners=tuple(owners))


def data_rate(
    bs: int,
    user: int,
    decision: PowerDecision,
    alloc: RbAllocation,
    state: NetworkState,
    config: NetworkConfig,
) -> float:
    """Achievable rate C_{b,u}, summed block by block."""
    if not 0 <= bs < state.num_bs:
        raise DomainError(f"Unknown BS {bs}")
    if not 0 <= user < state.user_counts[bs]:
        raise DomainError(f"BS {bs} has no user {user}")
    p = decision.rb_power(config)
    position = state.user_positions[bs][user]
    h = [channel_gain(float(np.linalg.norm(position - site)), config) for site in state.bs_positions]
    noise = config.rb_bandwidth * config.noise_density
    rate = 0.0
    for k in range(config.rbs_per_bs):
        if not alloc.gamma(bs, k, user):
            continue
        interference = sum(
            p[other, k] * h[other]
            for other in range(state.num_bs)
            if other != bs and alloc.owners[other][k] >= 0
        )
        rate += config.rb_bandwidth * math.log2(1 + p[bs, k] * h[bs] / (interference + noise))
    return rate


def evaluate_many(
    state: NetworkState, levels: np.ndarray, config: NetworkConfig
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Evaluate a batch of joint decisions at once.

    Args:
        state: Network state to evaluate in
        levels: (N, num_bs) array of 1-based power levels
        config: Network configuration

    Returns:
        Per-BS (N, U_b) user rates, (N, num_bs) mean rates and (N, num_bs) BS powers
    """
    levels = np.atleast_2d(np.asarray(levels, dtype=int))
    if levels.shape[1] != config.num_bs or levels.min() < 1 or levels.max() > config.num_levels:
        raise DomainError(f"Power levels must be (N, {config.num_bs}) within 1..{config.num_levels}")
    bs_power = np.asarray(config.power_levels)[levels - 1]
    p_rb = bs_power / config.rbs_per_bs
    alloc = allocate_rbs(state, config)
    occupied = alloc.occupied().astype(float)
    gains = link_gains(state, config)
    noise = config.rb_bandwidth * config.noise_density

    user_rates = []
    mean_rates = np.empty(levels.shape, dtype=float)
    for b in range(config.num_bs):
        g = gains[b]
        others = [c for c in range(config.num_bs) if c != b]
        gamma = alloc.indicator(b, len(g))
        signal = p_rb[:, b, None] * g[None, :, b]
        interference = np.einsum("nc,uc,ck->nuk", p_rb[:, others], g[:, others], occupied[others])
        sinr = signal[:, :, None] / (interference + noise)
        rates = config.rb_bandwidth * np.sum(gamma[None, :, :] * np.log2(1 + sinr), axis=2)
        user_rates.append(rates)
        mean_rates[:, b] = rates.mean(axis=1)
    return user_rates, mean_rates, bs_power


def evaluate(state: NetworkState, decision: PowerDecision, config: NetworkConfig) -> EvalReport:
    """Rates, power and per-BS constraint outcome of one joint decision."""
    decision.validate(config)
    user_rates, mean_rates, bs_power = evaluate_many(state, np.array([decision.levels]), config)
    return EvalReport(
        decision=decision,
        user_rates=tuple(rates[0] for rates in user_rates),
        mean_rates=mean_rates[0],
        bs_power=bs_power[0],
        constraint_ok=mean_rates[0] >= config.min_rate,
    )


def sample_user_counts(rng: np.random.Generator, num_bs: int, low: int, high: int) -> tuple[int, ...]:
    if not 1 <= low <= high:
        raise DomainError(f"User range must satisfy 1 <= low <= high, got ({low}, {high})")
    return tuple(int(n) for n in rng.integers(low, high + 1, size=num_bs))


def sample_positions(
    rng: np.random.Generator, counts: tuple[int, ...], config: NetworkConfig
) -> tuple[np.ndarray, ...]:
    """Uniform placement over the annulus [min_distance, coverage_radius] of each BS."""
    r_min2, r_max2 = config.min_distance**2, config.coverage_radius**2
    positions = []
    for site, count in zip(config.bs_positions, counts):
        radius = np.sqrt(rng.uniform(r_min2, r_max2, size=count))
        theta = rng.uniform(0.0, 2 * np.pi, size=count)
        positions.append(site + np.column_stack([radius * np.cos(theta), radius * np.sin(theta)]))
    return tuple(positions)


def sample_state(
    config: NetworkConfig,
    rng: np.random.Generator | None = None,
    case: Case = Case.DISCRETE,
    counts: tuple[int, ...] | None = None,
    user_range: tuple[int, int] = (5, 15),
) -> NetworkState:
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    if counts is None:
        counts = sample_user_counts(rng, config.num_bs, *user_range)
    return NetworkState(
        bs_positions=config.bs_positions,
        user_positions=sample_positions(rng, counts, config),
        case=case,
    )
