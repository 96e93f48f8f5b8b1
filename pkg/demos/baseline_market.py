"""Baseline two-builder market across flow-dropping regimes.

Two builders start at shares 0.6 / 0.4 with bid ratios 0.7 / 0.9. Each round
a Poisson(5) batch of LogNormal(0, 1) flows lands on builders by share, the
highest bid wins, and the winner attracts delta of flow mass. The parameter
p is the probability that losers drop the contested flows (p = 1) instead of
keeping them (p = 0).
"""

import numpy as np

from pbsim.runner import build_scenario, run_ensemble


def main():
    for p in (0.0, 0.5, 1.0):
        cfg = build_scenario("baseline", {"flow_model.drop_prob": p})
        res = run_ensemble(cfg, workers=4)
        absorbed = res.absorption_rounds[res.absorption_rounds >= 0]
        fr = res.fairness
        print(f"p = {p}")
        print(f"  P[win rate in [{fr.fair_low:.2f}, {fr.fair_high:.2f}]] "
              f"= {fr.empirical_prob:.3f}  (fairness satisfied: {fr.satisfied})")
        if absorbed.size:
            print(f"  absorbed {absorbed.size}/{res.repetitions}, "
                  f"median round {np.median(absorbed):.0f}")
        else:
            print(f"  absorbed 0/{res.repetitions} within {cfg.rounds} rounds")
        # 5th/95th percentile band of the leader's win rate at the horizon
        print(f"  final win-rate band: [{res.band_low[-1]:.3f}, {res.band_high[-1]:.3f}], "
              f"mean {res.mean_lambda[-1]:.3f}")
        print()


if __name__ == "__main__":
    main()
