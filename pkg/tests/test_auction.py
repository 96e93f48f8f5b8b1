import numpy as np
import pytest

from pbsim.auction import (
    BidStrategy,
    empirical_win_prob,
    place_bids,
    sample_valuations,
    select_winner,
)
from pbsim.config import FlowModel


FIXED = [BidStrategy("fixed_ratio", ratio=0.7), BidStrategy("fixed_ratio", ratio=0.9)]


def test_strategy_validation():
    with pytest.raises(ValueError):
        BidStrategy("fixed_ratio", ratio=0.0)
    with pytest.raises(ValueError):
        BidStrategy("equilibrium")
    with pytest.raises(ValueError):
        BidStrategy("second_price")


def test_sample_valuations_zero_flow_rounds():
    fm = FlowModel(poisson_rate=0.0001, reserve=2.0)
    rng = np.random.default_rng(0)
    n, private, valuations = sample_valuations([0.6, 0.4], fm, rng)
    if n == 0:
        assert np.array_equal(valuations, [2.0, 2.0])
    assert np.all(valuations >= 2.0)


def test_sample_valuations_degenerate_allocation():
    fm = FlowModel(poisson_rate=5.0)
    rng = np.random.default_rng(1)
    n, private, valuations = sample_valuations([1.0, 0.0], fm, rng)
    assert private[1] == 0.0
    assert valuations[0] == pytest.approx(private.sum())


def test_sample_valuations_flow_count_split():
    fm = FlowModel(poisson_rate=5.0)
    rng = np.random.default_rng(2)
    counts = 0
    total = 0.0
    rounds = 200_000
    for _ in range(rounds):
        n, private, _ = sample_valuations([0.6, 0.4], fm, rng)
        counts += n
        total += private[0]
    # compound-Poisson mean: rate * share * E[w] = 5 * 0.6 * e^0.5
    assert total / rounds == pytest.approx(5 * 0.6 * np.exp(0.5), abs=0.03)
    assert counts / rounds == pytest.approx(5.0, abs=0.02)


def test_place_bids_ratios():
    bids, competitive = place_bids([10.0, 10.0], FIXED, reserve=0.0)
    assert np.allclose(bids, [7.0, 9.0])
    assert competitive.all()


def test_place_bids_reserve_marks_noncompetitive():
    bids, competitive = place_bids([10.0, 2.0], FIXED, reserve=5.0)
    assert competitive.tolist() == [True, False]


def test_place_bids_strategy_count_mismatch():
    with pytest.raises(ValueError):
        place_bids([1.0], FIXED, reserve=0.0)


def test_select_winner_argmax():
    rng = np.random.default_rng(0)
    winner, fired = select_winner([7.2, 6.9], 0.0, [0.0, 0.0], rng)
    assert winner == 0 and not fired


def test_select_winner_no_competitive_bid():
    rng = np.random.default_rng(0)
    winner, fired = select_winner([1.0, 2.0], 5.0, [0.0, 0.0], rng)
    assert winner is None and not fired


def test_select_winner_tie_break_uniform():
    rng = np.random.default_rng(0)
    wins = 0
    draws = 100_000
    for _ in range(draws):
        winner, _ = select_winner([5.0, 5.0], 0.0, [0.0, 0.0], rng)
        wins += winner == 0
    assert wins / draws == pytest.approx(0.5, abs=0.01)


def test_select_winner_boost_frequency():
    rng = np.random.default_rng(0)
    boosted = 0
    draws = 100_000
    for _ in range(draws):
        winner, fired = select_winner([9.0, 5.0], 0.0, [0.0, 0.2], rng)
        assert fired == (winner == 1)
        boosted += winner == 1
    assert boosted / draws == pytest.approx(0.2, abs=0.01)


def test_select_winner_boost_needs_competitive_bid():
    rng = np.random.default_rng(0)
    for _ in range(200):
        winner, fired = select_winner([9.0, 2.0], 3.0, [0.0, 0.5], rng)
        assert winner == 0 and not fired


def test_select_winner_rejects_two_boosts():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        select_winner([1.0, 2.0], 0.0, [0.1, 0.1], rng)


def test_empirical_win_prob_requires_samples():
    fm = FlowModel()
    with pytest.raises(ValueError):
        empirical_win_prob([0.5, 0.5], fm, FIXED, 100, np.random.default_rng(0))


def test_empirical_win_prob_symmetry():
    fm = FlowModel()
    same = [BidStrategy("fixed_ratio", ratio=0.8), BidStrategy("fixed_ratio", ratio=0.8)]
    p = empirical_win_prob([0.5, 0.5], fm, same, 40_000, np.random.default_rng(0))
    assert p[0] == pytest.approx(0.5, abs=0.01)


def test_empirical_win_prob_strong_builder_leads():
    fm = FlowModel()
    p = empirical_win_prob([0.6, 0.4], fm, FIXED, 100_000, np.random.default_rng(0))
    se = np.sqrt(p[0] * (1 - p[0]) / 100_000)
    assert p[0] - p[1] > 3 * (2 * se)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_empirical_win_prob_monopoly_edge():
    fm = FlowModel()
    p = empirical_win_prob([1.0, 0.0], fm, FIXED, 200_000, np.random.default_rng(0))
    # the zero-share builder wins only on empty-flow ties
    expect = 0.5 * np.exp(-5.0)
    assert p[1] == pytest.approx(expect, abs=3 * np.sqrt(expect / 200_000) + 1e-4)
