"""Drift of the order-flow share process and the share recursion.

The share of the leading builder follows a stochastic approximation
recursion. This script prints the drift's fixed points, iterates the
recursion in both the flow-keeping and flow-dropping regimes, and checks
the always-drop / always-keep envelope around a mixed run.
"""

import numpy as np

from pbsim.analytic import sa_iterate, sandwich_check
from pbsim.dynamics import analytic_win_prob, classify_fixed_points, drift


def main():
    cls = classify_fixed_points()
    print("drift fixed points:")
    for z, s in zip(cls.zeros, cls.stability):
        print(f"  z = {z:.3f}  {s}")
    print(f"drift at 0.6: {drift(0.6):+.4f}  (win prob {analytic_win_prob(0.6):.4f})")
    print()

    rng = np.random.default_rng(1)
    for mode, label in (("p1", "flows dropped, constant total mass"),
                        ("p0", "flows kept, total mass grows")):
        trace = sa_iterate(0.6, mode, delta=0.0002, a_plus_b=1.0,
                           steps=50_000, rng=rng)
        print(f"{label}: z after 50k steps = {trace.z[-1]:.4f} "
              f"(started 0.6, final step size {trace.gammas[-1]:.2e})")
    print()

    # mixed run: fair coin per round decides drop vs keep, shared win history
    n = 20_000
    x = np.empty(n, dtype=np.int64)
    d = (rng.random(n) < 0.5).astype(np.int64)
    mi, mj, total = 0.6, 0.4, 1.0
    for k in range(n):
        x[k] = 1 if rng.random() < analytic_win_prob(mi / total) else 0
        if x[k]:
            mi += 0.0002
            if d[k]:
                mj = max(mj - 0.0002, 0.0)
            else:
                total += 0.0002
        else:
            mj += 0.0002
            if d[k]:
                mi = max(mi - 0.0002, 0.0)
            else:
                total += 0.0002
        if d[k]:
            total = mi + mj
    rep = sandwich_check(x, d, 0.6, 0.0002, 1.0)
    # the envelope is a useful heuristic, not a pathwise guarantee; small
    # excursions can occur right after keep rounds
    print(f"drop/keep envelope held at every step: {rep.ok} "
          f"(max excursion {rep.max_excess:.2e})")
    print(f"final shares: drop {rep.z_drop[-1]:.4f}  keep {rep.z_keep[-1]:.4f}  "
          f"mixed {rep.z_mixed[-1]:.4f}")


if __name__ == "__main__":
    main()
