"""Robust-fairness evaluation, percentile bands, HHI, and profit margins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FairnessSpec:
    """Fair-area parameters: win rates must stay in [(1-eps)*lam0, (1+eps)*lam0]."""

    epsilon: float = 0.1
    delta: float = 0.1
    lambda0: float = 0.6

    def violations(self, path: str = "fairness") -> list[str]:
        out = []
        if self.epsilon < 0:
            out.append(f"{path}.epsilon must be nonnegative")
        if not 0.0 <= self.delta <= 1.0:
            out.append(f"{path}.delta must be in [0, 1]")
        if not 0.0 <= self.lambda0 <= 1.0:
            out.append(f"{path}.lambda0 must be in [0, 1]")
        lo, hi = self.fair_interval()
        if min(hi, 1.0) < max(lo, 0.0):
            out.append(f"{path}: fair interval does not intersect [0, 1]")
        return out

    def fair_interval(self) -> tuple[float, float]:
        return (1.0 - self.epsilon) * self.lambda0, (1.0 + self.epsilon) * self.lambda0


@dataclass(frozen=True)
class FairnessReport:
    empirical_prob: float
    satisfied: bool
    fair_low: float
    fair_high: float
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "empirical_prob": self.empirical_prob,
            "satisfied": self.satisfied,
            "fair_low": self.fair_low,
            "fair_high": self.fair_high,
            "sample_count": self.sample_count,
        }


def robust_fairness(samples, spec: FairnessSpec) -> FairnessReport:
    """Fraction of win-rate samples inside the closed fair interval.

    Satisfied when that fraction is at least 1 - delta.  Boundary values
    count as inside.
    """
    lam = np.asarray(samples, dtype=float)
    if lam.size == 0:
        raise ValueError("robust_fairness requires a nonempty sample list")
    if np.any((lam < 0.0) | (lam > 1.0)):
        raise ValueError("win-rate samples must lie in [0, 1]")
    lo, hi = spec.fair_interval()
    inside = np.count_nonzero((lam >= lo) & (lam <= hi))
    prob = inside / lam.size
    return FairnessReport(
        empirical_prob=prob,
        satisfied=prob >= 1.0 - spec.delta,
        fair_low=lo,
        fair_high=hi,
        sample_count=int(lam.size),
    )


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile (no interpolation): sorted[ceil(p/100 * n)]."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    if n == 0:
        raise ValueError("empty sample")
    rank = int(np.ceil(pct / 100.0 * n))
    rank = min(max(rank, 1), n)
    return float(v[rank - 1])


def percentile_bands(trajectories, low: float = 5.0, high: float = 95.0):
    """Per-round nearest-rank percentile bands over an ensemble.

    trajectories: array of shape (repetitions, rounds).
    Returns (band_low, band_high) arrays of length rounds.
    """
    t = np.asarray(trajectories, dtype=float)
    if t.ndim != 2:
        raise ValueError("trajectories must be a (repetition, round) matrix")
    reps, rounds = t.shape
    if reps < 1:
        raise ValueError("need at least one repetition")
    srt = np.sort(t, axis=0)
    lo_rank = min(max(int(np.ceil(low / 100.0 * reps)), 1), reps)
    hi_rank = min(max(int(np.ceil(high / 100.0 * reps)), 1), reps)
    return srt[lo_rank - 1].copy(), srt[hi_rank - 1].copy()


def hhi(shares, tol: float = 1e-6) -> float:
    """Herfindahl-Hirschman index: sum of squared market shares.

    tol bounds the allowed deviation of sum(shares) from 1; published
    top-N builder tables typically leave a small remainder, so callers
    feeding such tables should widen it.
    """
    s = np.asarray(shares, dtype=float)
    if s.size == 0:
        raise ValueError("hhi requires a nonempty share vector")
    if np.any(s < 0.0):
        raise ValueError("shares must be nonnegative")
    total = float(s.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"shares sum to {total:.6f}, expected 1 within {tol}")
    return float(np.sum(s * s))


def profit_margin(block_value: float, payment: float, method: str = "value_relative") -> float:
    """Builder profit margin for one block or an aggregate.

    value_relative: (block_value - payment) / block_value.  Negative margins
    mean the block was subsidized.
    """
    if block_value <= 0.0:
        raise ValueError("block_value must be positive")
    if payment < 0.0:
        raise ValueError("payment must be nonnegative")
    if method != "value_relative":
        raise ValueError(f"unknown profit margin method: {method!r}")
    return (block_value - payment) / block_value
