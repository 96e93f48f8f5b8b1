"""Domain types for the builder-market model: builders, flows, rounds, scenarios."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .fairness import FairnessSpec

SHARE_SUM_TOL = 1e-12


class ConfigError(ValueError):
    """Raised when a scenario configuration violates a type invariant."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class BuilderProfile:
    id: int
    initial_share: float
    bid_ratio: float
    loyal_share: float = 0.0
    timing_boost: float = 0.0

    def violations(self, path: str) -> list[str]:
        out = []
        if not 0.0 <= self.initial_share <= 1.0:
            out.append(f"{path}.initial_share must be in [0, 1]")
        if not 0.0 < self.bid_ratio <= 1.0:
            out.append(f"{path}.bid_ratio must be in (0, 1]")
        if not 0.0 <= self.loyal_share < 1.0:
            out.append(f"{path}.loyal_share must be in [0, 1)")
        if self.loyal_share > self.initial_share:
            out.append(f"{path}.loyal_share must not exceed initial_share")
        if not 0.0 <= self.timing_boost < 1.0:
            out.append(f"{path}.timing_boost must be in [0, 1)")
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "initial_share": self.initial_share,
            "bid_ratio": self.bid_ratio,
            "loyal_share": self.loyal_share,
            "timing_boost": self.timing_boost,
        }


@dataclass(frozen=True)
class FlowModel:
    poisson_rate: float = 5.0
    lognormal_mu: float = 0.0
    lognormal_sigma: float = 1.0
    delta: float = 0.0002
    drop_prob: float = 1.0
    reserve: float = 0.0

    def violations(self, path: str = "flow_model") -> list[str]:
        out = []
        if self.poisson_rate <= 0.0:
            out.append(f"{path}.poisson_rate must be positive")
        if self.lognormal_sigma <= 0.0:
            out.append(f"{path}.lognormal_sigma must be positive")
        if self.delta < 0.0:
            out.append(f"{path}.delta must be nonnegative")
        if not 0.0 <= self.drop_prob <= 1.0:
            out.append(f"{path}.drop_prob must be in [0, 1]")
        if self.reserve < 0.0:
            out.append(f"{path}.reserve must be nonnegative")
        return out

    def mean_flow_profit(self) -> float:
        return float(np.exp(self.lognormal_mu + 0.5 * self.lognormal_sigma**2))

    def to_dict(self) -> dict:
        return {
            "poisson_rate": self.poisson_rate,
            "lognormal_mu": self.lognormal_mu,
            "lognormal_sigma": self.lognormal_sigma,
            "delta": self.delta,
            "drop_prob": self.drop_prob,
            "reserve": self.reserve,
        }


@dataclass
class MarketState:
    """Per-builder connection shares plus cumulative auction statistics."""

    round: int
    shares: np.ndarray
    total_mass: float
    win_counts: np.ndarray
    rounds_elapsed: int

    @property
    def win_rates(self) -> np.ndarray:
        if self.rounds_elapsed == 0:
            return np.zeros_like(self.shares)
        return self.win_counts / self.rounds_elapsed

    def check(self) -> None:
        s = np.asarray(self.shares, dtype=float)
        if abs(s.sum() - 1.0) > 1e-9:
            raise ValueError("shares must sum to 1 within 1e-9")
        if np.any((s < 0.0) | (s > 1.0)):
            raise ValueError("each share must lie in [0, 1]")
        if self.total_mass <= 0.0:
            raise ValueError("total_mass must be positive")
        if np.any(np.asarray(self.win_counts) < 0):
            raise ValueError("win_counts must be nonnegative")


@dataclass(frozen=True)
class RoundOutcome:
    round: int
    private_values: np.ndarray
    valuations: np.ndarray
    bids: np.ndarray
    winner: int | None
    flow_count: int
    boost_fired: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    builders: tuple[BuilderProfile, ...]
    flow_model: FlowModel
    rounds: int
    repetitions: int
    seed: int
    warmup_rounds: int
    warmup_wins: tuple[int, ...]
    fairness: FairnessSpec = field(default_factory=FairnessSpec)
    ratio_binding: str = "rank"

    KINDS = ("baseline", "collaboration", "timing_game", "multi_builder")
    BINDINGS = ("rank", "fixed")

    def violations(self) -> list[str]:
        out = []
        if self.kind not in self.KINDS:
            out.append(f"kind must be one of {self.KINDS}")
        if self.ratio_binding not in self.BINDINGS:
            out.append(f"ratio_binding must be one of {self.BINDINGS}")
        if not self.builders:
            out.append("builders must be nonempty")
        for k, b in enumerate(self.builders):
            out.extend(b.violations(f"builders[{k}]"))
        share_sum = sum(b.initial_share for b in self.builders)
        if abs(share_sum - 1.0) > SHARE_SUM_TOL:
            out.append(f"builders.initial_share: shares sum to {share_sum!r}, not 1")
        boosted = [b for b in self.builders if b.timing_boost > 0.0]
        if len(boosted) > 1:
            out.append("builders.timing_boost: at most one builder may have a boost")
        out.extend(self.flow_model.violations())
        if self.rounds < 0:
            out.append("rounds must be nonnegative")
        if self.repetitions <= 0:
            out.append("repetitions must be positive")
        if self.warmup_rounds < 0:
            out.append("warmup_rounds must be nonnegative")
        if len(self.warmup_wins) != len(self.builders):
            out.append("warmup_wins must have one entry per builder")
        elif any(w < 0 for w in self.warmup_wins):
            out.append("warmup_wins entries must be nonnegative")
        elif sum(self.warmup_wins) != self.warmup_rounds:
            out.append(
                f"warmup_wins sum to {sum(self.warmup_wins)}, expected warmup_rounds={self.warmup_rounds}"
            )
        out.extend(self.fairness.violations())
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "builders": [b.to_dict() for b in self.builders],
            "flow_model": self.flow_model.to_dict(),
            "rounds": self.rounds,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "warmup_rounds": self.warmup_rounds,
            "warmup_wins": list(self.warmup_wins),
            "ratio_binding": self.ratio_binding,
            "fairness": {
                "epsilon": self.fairness.epsilon,
                "delta": self.fairness.delta,
                "lambda0": self.fairness.lambda0,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {
            "kind", "builders", "flow_model", "rounds", "repetitions",
            "seed", "warmup_rounds", "warmup_wins", "fairness", "ratio_binding",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError([f"unknown config key: {k}" for k in sorted(unknown)])
        builders = []
        for k, bd in enumerate(d.get("builders", [])):
            extra = set(bd) - {"id", "initial_share", "bid_ratio", "loyal_share", "timing_boost"}
            if extra:
                raise ConfigError([f"unknown config key: builders[{k}].{e}" for e in sorted(extra)])
            builders.append(BuilderProfile(**bd))
        fm = d.get("flow_model", {})
        extra = set(fm) - {"poisson_rate", "lognormal_mu", "lognormal_sigma", "delta", "drop_prob", "reserve"}
        if extra:
            raise ConfigError([f"unknown config key: flow_model.{e}" for e in sorted(extra)])
        fs = d.get("fairness", {})
        extra = set(fs) - {"epsilon", "delta", "lambda0"}
        if extra:
            raise ConfigError([f"unknown config key: fairness.{e}" for e in sorted(extra)])
        return cls(
            kind=d["kind"],
            builders=tuple(builders),
            flow_model=FlowModel(**fm),
            rounds=int(d["rounds"]),
            repetitions=int(d["repetitions"]),
            seed=int(d["seed"]),
            warmup_rounds=int(d["warmup_rounds"]),
            warmup_wins=tuple(int(w) for w in d["warmup_wins"]),
            fairness=FairnessSpec(**fs),
            ratio_binding=d.get("ratio_binding", "rank"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        """Content hash of the resolved config; stable across key reordering."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def with_overrides(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)


def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Return the config unchanged if all invariants hold, else raise ConfigError
    listing every violated invariant with its field path."""
    violations = config.violations()
    if violations:
        raise ConfigError(violations)
    return config


def initial_state(config: ScenarioConfig) -> MarketState:
    """Market state immediately after the warmup block: shares from the builder
    profiles, win rates warmup_wins / warmup_rounds."""
    shares = np.array([b.initial_share for b in config.builders], dtype=float)
    return MarketState(
        round=0,
        shares=shares,
        total_mass=1.0,
        win_counts=np.array(config.warmup_wins, dtype=np.int64),
        rounds_elapsed=config.warmup_rounds,
    )
