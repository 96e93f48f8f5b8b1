"""Scenario variants: loyal order flow, proposer timing games, many builders.

Three twists on the baseline market:

- collaboration: the weak builder holds a 0.1 loyal flow floor, so the
  strong builder's share is capped at 0.9 and full monopoly is impossible
- timing_game: the proposer picks the strong builder's header 20% of the
  time regardless of bids, which speeds up monopolization
- multi_builder: K builders where one designated builder starts at share 0.2
"""

import numpy as np

from pbsim.runner import build_scenario, run_ensemble


def absorbed_mean(res):
    a = res.absorption_rounds[res.absorption_rounds >= 0].astype(float)
    return a.mean() if a.size else float("nan"), a.size


def main():
    collab = run_ensemble(build_scenario("collaboration", {"repetitions": 300}),
                          workers=4)
    peak = float(collab.max_shares[:, 0].max())
    print(f"collaboration: highest share ever reached = {peak!r} "
          f"(ceiling 0.9, monopoly impossible)")
    print()

    base = run_ensemble(build_scenario("baseline", {"repetitions": 200}), workers=4)
    timed = run_ensemble(build_scenario("timing_game", {"repetitions": 200}), workers=4)
    mb, nb = absorbed_mean(base)
    mt, nt = absorbed_mean(timed)
    print(f"timing game: mean absorption round {mt:.0f} (n={nt}) vs "
          f"baseline {mb:.0f} (n={nb})")
    print()

    print("multi-builder sweep (designated builder starts at share 0.2):")
    for k in (2, 3, 4, 10):
        cfg = build_scenario("multi_builder",
                             {"builders_count": k, "repetitions": 100})
        res = run_ensemble(cfg, workers=4)
        z = res.final_shares[:, 0]
        won = float(np.mean(z > 0.5))
        print(f"  K = {k:>2}: designated builder ends with the market in "
              f"{won:.0%} of runs, final mean win rate {res.final_mean_lambda[0]:.3f}")


if __name__ == "__main__":
    main()
