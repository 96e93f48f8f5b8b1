"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Criteria 1 and 2 include sub-checks that the implemented model does not
reproduce (flow-keeping runs are not absorbed by round 6000 and their win
rates stay near the fair interval); those tests fail honestly rather than
assert weaker statements.  See the repository README for the analysis.
"""

import numpy as np
import pytest

from pbsim.analytic import sa_iterate, sandwich_check
from pbsim.dynamics import analytic_win_prob, classify_fixed_points, drift, sa_bounds_report
from pbsim.equilibrium import (
    equilibrium_win_prob,
    expected_revenue,
    power_pair,
    solve_equilibrium,
)
from pbsim.fairness import FairnessSpec, hhi, robust_fairness
from pbsim.cli import main as cli_main
from pbsim.runner import build_scenario, run_ensemble

WORKERS = 4


def report(line: str, ok: bool) -> None:
    print(f"{line}: {'PASS' if ok else 'FAIL'}")


@pytest.fixture(scope="module")
def baseline_by_p():
    out = {}
    for p in (0.0, 0.5, 1.0):
        cfg = build_scenario("baseline", {"flow_model.drop_prob": p})
        out[p] = run_ensemble(cfg, workers=WORKERS)
    return out


@pytest.fixture(scope="module")
def eq_solutions():
    out = {}
    for m, n in ((1, 1), (2, 2), (3, 3), (3, 1), (4, 2), (5, 1)):
        out[(m, n)] = solve_equilibrium(*power_pair(m, n))
    return out


def test_criterion_01_fairness_failure(baseline_by_p):
    probs = {p: r.fairness.empirical_prob for p, r in baseline_by_p.items()}
    ok = all(prob < 0.9 for prob in probs.values())
    detail = ", ".join(f"p={p}: {prob:.3f}" for p, prob in sorted(probs.items()))
    report(f"criterion 01 fairness failure at round 6000 ({detail})", ok)
    assert ok, f"fair-interval probabilities {probs} must all be below 0.9"


def test_criterion_02_absorption_dynamics(baseline_by_p):
    results = {}
    for p, r in baseline_by_p.items():
        absorbed = r.absorption_rounds[r.absorption_rounds >= 0]
        frac = absorbed.size / r.repetitions
        med = float(np.median(absorbed)) if absorbed.size else None
        results[p] = (frac, med)
    ok = all(
        frac >= 0.5 and med is not None and 1000 <= med <= 6000
        for frac, med in results.values()
    )
    detail = ", ".join(
        f"p={p}: {frac:.2f} absorbed, median {med}" for p, (frac, med) in sorted(results.items())
    )
    report(f"criterion 02 absorption within 6000 rounds ({detail})", ok)
    assert ok, f"absorption stats {results} must show >=50% absorbed, median in [1000, 6000]"


def test_criterion_03_flow_keeping_slowdown():
    means = {}
    for p in (0.0, 1.0):
        cfg = build_scenario("baseline", {"flow_model.drop_prob": p})
        vals = np.empty(cfg.repetitions)

        def keep(traj, vals=vals):
            i = int(np.nonzero(traj.rounds == 2500)[0][0])
            vals[traj.repetition] = traj.lam[i, 0]

        run_ensemble(cfg, workers=WORKERS, trajectory_sink=keep)
        means[p] = (vals.mean(), vals.std(ddof=1) / np.sqrt(vals.size))
    gap = means[1.0][0] - means[0.0][0]
    se = float(np.hypot(means[0.0][1], means[1.0][1]))
    ok = gap > 3.0 * se
    report(
        f"criterion 03 flow-keeping slowdown at round 2000 "
        f"(p=0 mean {means[0.0][0]:.4f}, p=1 mean {means[1.0][0]:.4f}, gap {gap / se:.1f} se)",
        ok,
    )
    assert ok


def test_criterion_04_multi_builder_convergence():
    fracs = {}
    for k in (2, 3, 4, 10):
        cfg = build_scenario("multi_builder", {"builders_count": k})
        r = run_ensemble(cfg, workers=WORKERS)
        z = r.final_shares[:, 0]
        fracs[k] = float(np.mean((np.abs(z) <= 1e-6) | (np.abs(z - 1.0) <= 1e-6)))
    ok = all(f >= 0.95 for f in fracs.values())
    detail = ", ".join(f"K={k}: {f:.3f}" for k, f in sorted(fracs.items()))
    report(f"criterion 04 multi-builder pole convergence ({detail})", ok)
    assert ok, fracs


def test_criterion_05_solver_oracles(eq_solutions):
    eq11 = eq_solutions[(1, 1)]
    eq22 = eq_solutions[(2, 2)]
    sup11 = float(np.max(np.abs(eq11.phi_i - 2.0 * eq11.bid_grid)))
    sup22 = float(np.max(np.abs(eq22.phi_i - 1.5 * eq22.bid_grid)))
    ok = sup11 <= 1e-3 and sup22 <= 1e-3 and eq11.residual_max < 1e-4 and eq22.residual_max < 1e-4
    report(
        f"criterion 05 closed-form oracles (sup|phi-2b|={sup11:.1e}, "
        f"sup|phi-1.5b|={sup22:.1e}, residuals {eq11.residual_max:.1e}/{eq22.residual_max:.1e})",
        ok,
    )
    assert ok


def test_criterion_06_asymmetry_properties(eq_solutions):
    eq = eq_solutions[(3, 1)]
    di, dj = power_pair(3, 1)
    interior = slice(2, -1)
    b = eq.bid_grid[interior]
    phi_gap_ok = bool(np.all(eq.phi_i[interior] > eq.phi_j[interior]))
    cdf_ok = bool(np.all(di.cdf(eq.phi_i[interior]) < dj.cdf(eq.phi_j[interior])))
    win_p, win_se = equilibrium_win_prob(eq, di, dj, samples=10**5)
    win_ok = win_p - 0.5 > 3.0 * win_se
    ok = phi_gap_ok and cdf_ok and win_ok and b.size > 0
    report(
        f"criterion 06 strong-side dominance for (3,1) (phi gap {phi_gap_ok}, "
        f"cdf order {cdf_ok}, win prob {win_p:.4f} +/- {win_se:.4f})",
        ok,
    )
    assert ok


def test_criterion_07_revenue_ordering(eq_solutions):
    rev = {
        (m, n): expected_revenue(eq_solutions[(m, n)], m, n)
        for m, n in ((1, 1), (2, 2), (3, 3), (3, 1), (4, 2), (5, 1))
    }
    checks = [
        abs(rev[(1, 1)] - 1.0 / 3.0) <= 0.005,
        abs(rev[(2, 2)] - 8.0 / 15.0) <= 0.005,
        rev[(2, 2)] - rev[(3, 1)] > 0.01,
        rev[(3, 3)] - rev[(4, 2)] > 0.01,
        rev[(4, 2)] - rev[(5, 1)] > 0.01,
    ]
    ok = all(checks)
    detail = ", ".join(f"R{k}={v:.4f}" for k, v in sorted(rev.items()))
    report(f"criterion 07 revenue ordering ({detail})", ok)
    assert ok, rev


def test_criterion_08_drift_fixed_points():
    cls = classify_fixed_points(resolution=2000)
    points_ok = (
        len(cls.zeros) == 3
        and all(abs(q - t) < 1e-9 for q, t in zip(cls.zeros, (0.0, 0.5, 1.0)))
        and cls.stability == ("stable", "unstable", "stable")
    )
    z = np.linspace(0.0, 1.0, 10_001)
    f = np.array([drift(x) for x in z])
    anti = float(np.max(np.abs(f + f[::-1])))
    bounded = float(np.max(np.abs(f)))
    ok = points_ok and anti <= 1e-12 and bounded <= 1.0
    report(
        f"criterion 08 drift fixed points (zeros {cls.zeros}, antisymmetry {anti:.1e}, "
        f"max |f| {bounded:.3f})",
        ok,
    )
    assert ok


def test_criterion_09_sa_inequalities():
    n = 10**5
    z0, delta, apb = 0.6, 0.0002, 1.0
    rng = np.random.default_rng(2024)

    trace = sa_iterate(z0, "p0", delta, apb, n, np.random.default_rng(7))
    bounds = sa_bounds_report(trace.gammas, trace.noises, trace.drifts, delta, apb)
    noise_ok = bool(np.max(np.abs(trace.noises)) <= 1.0)

    # coupled run: one shared win history, per-round Bernoulli(1/2) branch
    x = np.empty(n, dtype=np.int64)
    d = (rng.random(n) < 0.5).astype(np.int64)
    mi, mj, total = z0 * apb, apb - z0 * apb, apb
    for k in range(n):
        x[k] = 1 if rng.random() < analytic_win_prob(mi / total) else 0
        if x[k]:
            mi += delta
            if d[k]:
                mj = max(mj - delta, 0.0)
            else:
                total += delta
        else:
            mj += delta
            if d[k]:
                mi = max(mi - delta, 0.0)
            else:
                total += delta
        if d[k]:
            total = mi + mj
    sandwich = sandwich_check(x, d, z0, delta, apb)

    ok = bounds.ok and noise_ok and sandwich.ok
    report(
        f"criterion 09 recursion bounds over 1e5 steps (step/noise bounds {bounds.ok}, "
        f"|U|<=1 {noise_ok}, envelope violations {len(sandwich.violations)})",
        ok,
    )
    assert ok, (bounds.violations, sandwich.violations)


def test_criterion_10_collaboration_ceiling():
    cfg = build_scenario("collaboration")
    r = run_ensemble(cfg, workers=WORKERS)
    peak = float(r.max_shares[:, 0].max())
    monopoly = bool((r.max_shares >= 1.0 - 1e-12).any())
    ok = peak == 0.9 and not monopoly
    report(
        f"criterion 10 loyal-share ceiling (max share {peak!r}, full monopoly {monopoly})",
        ok,
    )
    assert ok


def test_criterion_11_timing_game():
    base = run_ensemble(build_scenario("baseline", {"repetitions": 200}), workers=WORKERS)
    timed = run_ensemble(build_scenario("timing_game", {"repetitions": 200}), workers=WORKERS)

    def absorbed_stats(r):
        a = r.absorption_rounds[r.absorption_rounds >= 0].astype(float)
        return a.mean(), a.std(ddof=1) / np.sqrt(a.size)

    mb, seb = absorbed_stats(base)
    mt, set_ = absorbed_stats(timed)
    gap = mb - mt
    se = float(np.hypot(seb, set_))
    ok = gap > 3.0 * se
    report(
        f"criterion 11 timing boost speeds absorption (baseline {mb:.0f}, boosted {mt:.0f}, "
        f"gap {gap / se:.1f} se)",
        ok,
    )
    assert ok


def test_criterion_12_metrics():
    published = np.array([0.505, 0.2256, 0.1364, 0.0309, 0.0289,
                          0.018, 0.0152, 0.0149, 0.008, 0.0041])
    index = hhi(published, tol=0.05)
    hhi_ok = abs(index - 0.3272) <= 0.0005
    monopoly_ok = hhi(np.array([1.0, 0.0, 0.0])) == 1.0

    rng = np.random.default_rng(12)
    agree = True
    for _ in range(1000):
        lam = rng.random(int(rng.integers(1, 50)))
        spec = FairnessSpec(
            epsilon=float(rng.random() * 0.5),
            delta=float(rng.random()),
            lambda0=float(rng.random()),
        )
        rep = robust_fairness(lam, spec)
        lo, hi = spec.fair_interval()
        inside = sum(1 for v in lam if lo <= v <= hi)
        if rep.empirical_prob != inside / lam.size or rep.satisfied != (
            inside / lam.size >= 1.0 - spec.delta
        ):
            agree = False
            break
    ok = hhi_ok and monopoly_ok and agree
    report(
        f"criterion 12 metrics (published-table HHI {index:.4f}, monopoly {monopoly_ok}, "
        f"counting oracle agreement {agree})",
        ok,
    )
    assert ok


def test_criterion_13_determinism(tmp_path):
    identical = True
    for kind in ("baseline", "timing_game"):
        outs = []
        for name, workers in (("a", "1"), ("b", "3")):
            out = tmp_path / f"{kind}-{name}"
            code = cli_main([
                "simulate", "--scenario", kind, "--seed", "42",
                "--out", str(out), "--workers", workers,
                "--override", "rounds=800", "--override", "repetitions=10",
            ])
            assert code == 0
            outs.append(out)
        for fname in ("trajectories.csv", "ensemble.json"):
            if (outs[0] / fname).read_bytes() != (outs[1] / fname).read_bytes():
                identical = False
    report("criterion 13 byte-identical reruns across worker counts", identical)
    assert identical
