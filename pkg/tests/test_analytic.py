import numpy as np
import pytest

from pbsim.analytic import sa_iterate, sandwich_check


def test_sa_iterate_p0_step_sizes_exact():
    rng = np.random.default_rng(0)
    trace = sa_iterate(0.6, "p0", delta=0.0002, a_plus_b=1.0, steps=100, rng=rng)
    n = np.arange(1, 101)
    assert np.array_equal(trace.gammas, 0.0002 / (1.0 + n * 0.0002))


def test_sa_iterate_p1_constant_steps():
    rng = np.random.default_rng(0)
    trace = sa_iterate(0.6, "p1", delta=0.0002, a_plus_b=1.0, steps=500, rng=rng)
    assert np.all(trace.gammas == 0.0002)
    moves = np.abs(np.diff(trace.z))
    assert np.all(np.isclose(moves, 0.0002) | (trace.z[1:] == 0.0) | (trace.z[1:] == 1.0))


def test_sa_iterate_stays_in_unit_interval():
    rng = np.random.default_rng(1)
    trace = sa_iterate(0.99, "p1", delta=0.05, a_plus_b=1.0, steps=200, rng=rng)
    assert np.all((trace.z >= 0.0) & (trace.z <= 1.0))


def test_sa_iterate_explicit_win_sequence():
    rng = np.random.default_rng(0)
    x = [1, 1, 0, 1]
    trace = sa_iterate(0.5, "p1", delta=0.1, a_plus_b=1.0, steps=4, rng=rng, x_sequence=x)
    assert np.array_equal(trace.x, x)
    assert trace.z[1] == pytest.approx(0.6)
    assert trace.z[3] == pytest.approx(0.6)


def test_sa_iterate_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sa_iterate(1.5, "p0", 0.01, 1.0, 10, rng)
    with pytest.raises(ValueError):
        sa_iterate(0.5, "p2", 0.01, 1.0, 10, rng)
    with pytest.raises(ValueError):
        sa_iterate(0.5, "p0", 0.01, 1.0, 0, rng)


def test_sandwich_pure_branches_match_closed_forms():
    rng = np.random.default_rng(2)
    x = (rng.random(500) < 0.6).astype(int)
    all_drop = sandwich_check(x, np.ones_like(x), 0.6, 0.0002, 1.0)
    assert np.allclose(all_drop.z_mixed, all_drop.z_drop, atol=1e-12)
    all_keep = sandwich_check(x, np.zeros_like(x), 0.6, 0.0002, 1.0)
    assert np.allclose(all_keep.z_mixed, all_keep.z_keep, atol=1e-12)
    assert all_drop.ok and all_keep.ok


def test_sandwich_envelope_violated_by_branch_mixing():
    # two rounds, strong builder wins then loses, first round drops the
    # loser's flows and the second keeps them: the mixed trace ends above
    # both pure envelopes by an order-delta^2 margin
    report = sandwich_check([1, 0], [1, 0], z0=0.5, delta=0.01, a_plus_b=1.0)
    assert not report.ok
    assert 1 in report.violations
    mixed = report.z_mixed[1]
    assert mixed > max(report.z_drop[1], report.z_keep[1])
    assert report.max_excess == pytest.approx(mixed - max(report.z_drop[1], report.z_keep[1]))


def test_sandwich_length_mismatch():
    with pytest.raises(ValueError):
        sandwich_check([1, 0], [1], 0.5, 0.01, 1.0)
