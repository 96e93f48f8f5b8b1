"""Per-round valuation sampling, bidding, and winner selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import FlowModel


@dataclass(frozen=True)
class BidStrategy:
    """Either a fixed fraction of the block value or an equilibrium bid function."""

    kind: str  # "fixed_ratio" | "equilibrium"
    ratio: float = 1.0
    equilibrium: object = None  # BidEquilibrium, equilibrium kind only
    side: str = "i"  # which inverse bid function to use

    def __post_init__(self):
        if self.kind == "fixed_ratio":
            if not 0.0 < self.ratio <= 1.0:
                raise ValueError("fixed_ratio strategy needs ratio in (0, 1]")
        elif self.kind == "equilibrium":
            if self.equilibrium is None or self.side not in ("i", "j"):
                raise ValueError("equilibrium strategy needs an equilibrium and a side")
        else:
            raise ValueError(f"unknown strategy kind: {self.kind!r}")

    def bid(self, valuation: float) -> tuple[float, bool]:
        """Bid for a valuation; second element flags a support clamp."""
        if self.kind == "fixed_ratio":
            return self.ratio * valuation, False
        return self.equilibrium.bid_for_value(valuation, self.side)


def sample_valuations(shares, flow_model: FlowModel, rng: np.random.Generator):
    """Draw one round of order flow.

    N ~ Poisson(rate) flows, each assigned to one builder by a categorical
    draw with probabilities equal to the shares and carrying an independent
    LogNormal(mu, sigma) profit.  Returns (flow_count, private_values,
    valuations) with valuations = reserve + private value.
    """
    z = np.asarray(shares, dtype=float)
    n = int(rng.poisson(flow_model.poisson_rate))
    private = np.zeros(z.size)
    if n > 0:
        owners = np.searchsorted(np.cumsum(z), rng.random(n), side="right")
        owners = np.minimum(owners, z.size - 1)
        profits = rng.lognormal(flow_model.lognormal_mu, flow_model.lognormal_sigma, n)
        np.add.at(private, owners, profits)
    return n, private, flow_model.reserve + private


def place_bids(valuations, strategies, reserve: float):
    """Evaluate each builder's strategy; returns (bids, competitive mask)."""
    v = np.asarray(valuations, dtype=float)
    if len(strategies) != v.size:
        raise ValueError("need one strategy per builder")
    bids = np.empty(v.size)
    for k, strat in enumerate(strategies):
        bids[k], _ = strat.bid(v[k])
    return bids, bids >= reserve


def select_winner(bids, reserve: float, timing_boosts, rng: np.random.Generator):
    """Winner of one round: highest competitive bid, uniform tie-break.

    A builder with timing boost tau wins outright with probability tau,
    provided its own bid is competitive.  Returns (winner or None,
    boost_fired).
    """
    b = np.asarray(bids, dtype=float)
    tau = np.asarray(timing_boosts, dtype=float)
    boosted = np.nonzero(tau > 0.0)[0]
    if boosted.size > 1:
        raise ValueError("at most one builder may have a timing boost")
    if boosted.size == 1:
        k = int(boosted[0])
        if b[k] >= reserve and rng.random() < tau[k]:
            return k, True
    competitive = b >= reserve
    if not np.any(competitive):
        return None, False
    best = np.max(b[competitive])
    contenders = np.nonzero(competitive & (b == best))[0]
    if contenders.size == 1:
        return int(contenders[0]), False
    return int(rng.choice(contenders)), False


def empirical_win_prob(shares, flow_model: FlowModel, strategies, samples: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo single-round win frequency of each builder at frozen shares."""
    if samples < 10**4:
        raise ValueError("samples must be at least 10^4")
    z = np.asarray(shares, dtype=float)
    k = z.size
    wins = np.zeros(k, dtype=np.int64)
    chunk = 1 << 15
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        counts = rng.poisson(flow_model.poisson_rate, m)
        nmax = int(counts.max()) if m else 0
        private = np.zeros((m, k))
        if nmax > 0:
            u = rng.random((m, nmax))
            profits = rng.lognormal(flow_model.lognormal_mu, flow_model.lognormal_sigma, (m, nmax))
            active = np.arange(nmax) < counts[:, None]
            owners = np.searchsorted(np.cumsum(z), u.ravel(), side="right").reshape(m, nmax)
            owners = np.minimum(owners, k - 1)
            for j in range(k):
                private[:, j] = np.sum(profits * (active & (owners == j)), axis=1)
        valuations = flow_model.reserve + private
        bids = np.empty((m, k))
        for j, strat in enumerate(strategies):
            if strat.kind == "fixed_ratio":
                bids[:, j] = strat.ratio * valuations[:, j]
            else:
                bids[:, j] = [strat.bid(v)[0] for v in valuations[:, j]]
        competitive = bids >= flow_model.reserve
        masked = np.where(competitive, bids, -np.inf)
        best = masked.max(axis=1)
        has_winner = np.isfinite(best)
        ties = (masked == best[:, None]) & has_winner[:, None]
        ntie = ties.sum(axis=1)
        pick = np.floor(rng.random(m) * np.maximum(ntie, 1)).astype(np.int64)
        order = np.cumsum(ties, axis=1) - 1
        for j in range(k):
            wins[j] += np.count_nonzero(ties[:, j] & (order[:, j] == pick) & has_winner)
        done += m
    return wins / samples
