"""Distribution-free iteration of the share recursion.

Runs Z_{t+1} - Z_t = gamma_{t+1} (f(Z_t) + U_{t+1}) directly with the
analytic drift and win-probability model, for fast fixed-point and fairness
studies, plus the coupled-envelope check between the flow-dropping and
flow-keeping variants of the process.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import analytic_win_prob


@dataclass
class SATrace:
    mode: str  # "p0" (flows kept, shrinking steps) | "p1" (flows dropped, constant mass)
    a_plus_b: float
    delta: float
    steps: np.ndarray  # t = 0..n
    z: np.ndarray  # Z_t, length n+1
    x: np.ndarray  # win indicators X_t, length n
    gammas: np.ndarray  # gamma_t for t = 1..n (p0 mode), delta/(a+b) constant in p1

    @property
    def noises(self) -> np.ndarray:
        return self.x - np.vectorize(analytic_win_prob)(self.z[:-1])

    @property
    def drifts(self) -> np.ndarray:
        from .dynamics import drift

        return np.vectorize(drift)(self.z[:-1])


def sa_iterate(z0: float, mode: str, delta: float, a_plus_b: float, steps: int,
               rng: np.random.Generator, x_sequence=None) -> SATrace:
    """Iterate the recursion for `steps` rounds from z0.

    p0 mode: gamma_{t+1} = delta/(a_plus_b + (t+1) delta), the flow-keeping
    update.  p1 mode: constant-mass steps of size delta/a_plus_b with drift
    direction 2X-1.  X is Bernoulli(analytic win probability) unless an
    explicit x_sequence is supplied.
    """
    if not 0.0 <= z0 <= 1.0:
        raise ValueError("z0 must lie in [0, 1]")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if mode not in ("p0", "p1"):
        raise ValueError("mode must be 'p0' or 'p1'")

    z = np.empty(steps + 1)
    x = np.empty(steps, dtype=np.int64)
    gammas = np.empty(steps)
    z[0] = z0
    for t in range(steps):
        if x_sequence is None:
            x[t] = 1 if rng.random() < analytic_win_prob(z[t]) else 0
        else:
            x[t] = x_sequence[t]
        if mode == "p0":
            gamma = delta / (a_plus_b + (t + 1) * delta)
            z[t + 1] = z[t] + gamma * (x[t] - z[t])
        else:
            gamma = delta / a_plus_b
            z[t + 1] = z[t] + gamma * (2 * x[t] - 1)
        gammas[t] = gamma
        z[t + 1] = min(max(z[t + 1], 0.0), 1.0)
    return SATrace(
        mode=mode, a_plus_b=a_plus_b, delta=delta,
        steps=np.arange(steps + 1), z=z, x=x, gammas=gammas,
    )


@dataclass(frozen=True)
class SandwichReport:
    ok: bool
    violations: tuple[int, ...]  # step indices where the envelope fails
    max_excess: float
    z_drop: np.ndarray
    z_keep: np.ndarray
    z_mixed: np.ndarray


def sandwich_check(x_sequence, drop_sequence, z0: float, delta: float,
                   a_plus_b: float, tol: float = 1e-12) -> SandwichReport:
    """Check min(Z', Z'') <= Z <= max(Z', Z'') along one shared win history.

    Z' drops the loser's flows every round, Z'' keeps them every round, and
    the mixed trace follows drop_sequence round by round.  All three see the
    same X sequence.  Returns every step index where the mixed trace leaves
    the envelope by more than tol.
    """
    x = np.asarray(x_sequence, dtype=np.int64)
    d = np.asarray(drop_sequence, dtype=np.int64)
    if x.shape != d.shape:
        raise ValueError("x_sequence and drop_sequence must have equal length")
    n = x.size
    a = z0 * a_plus_b
    b = a_plus_b - a

    cum_x = np.cumsum(x)
    t = np.arange(1, n + 1)
    z_drop = np.clip((a + delta * (2 * cum_x - t)) / a_plus_b, 0.0, 1.0)
    z_keep = (a + delta * cum_x) / (a_plus_b + delta * t)

    z_mixed = np.empty(n)
    mi, mj, total = a, b, a_plus_b
    for k in range(n):
        if x[k] == 1:
            mi += delta
            if d[k] == 1:
                mj = max(mj - delta, 0.0)
            else:
                total += delta
        else:
            mj += delta
            if d[k] == 1:
                mi = max(mi - delta, 0.0)
            else:
                total += delta
        if d[k] == 1:
            total = mi + mj
        z_mixed[k] = mi / total

    lo = np.minimum(z_drop, z_keep)
    hi = np.maximum(z_drop, z_keep)
    excess = np.maximum(lo - z_mixed, z_mixed - hi)
    bad = np.nonzero(excess > tol)[0]
    return SandwichReport(
        ok=bad.size == 0,
        violations=tuple(int(i) for i in bad[:100]),
        max_excess=float(excess.max()) if n else 0.0,
        z_drop=z_drop, z_keep=z_keep, z_mixed=z_mixed,
    )
