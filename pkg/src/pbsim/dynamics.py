"""Share dynamics of the order-flow process.

Per-round share updates (winner attracts new flows, losers may be dropped),
the analytic drift of the share process, and fixed-point classification.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as _replace

import numpy as np

from .config import FlowModel, MarketState


def drift(z: float) -> float:
    """Expected one-step share movement (up to the step size) at share z.

    Piecewise: z/(2(1-z)) - z for z <= 1/2, else 1 - (1-z)/(2z) - z.
    Zeros at 0, 1/2 and 1; |drift| <= 1 on [0, 1].
    """
    if not 0.0 <= z <= 1.0:
        raise ValueError("share must lie in [0, 1]")
    if z <= 0.5:
        return z / (2.0 * (1.0 - z)) - z
    return 1.0 - (1.0 - z) / (2.0 * z) - z


def analytic_win_prob(z: float) -> float:
    """Conditional win probability at share z implied by the drift model."""
    p = z + drift(z)
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class DriftClassification:
    zeros: tuple[float, ...]
    stability: tuple[str, ...]  # "stable" | "unstable", parallel to zeros


def classify_fixed_points(resolution: int = 1000, f=drift,
                          neighborhood: float = 1e-3) -> DriftClassification:
    """Locate the zeros of a drift function on [0, 1] and label their stability.

    Sign-change scan on a uniform grid, bisection to 1e-10, then one-sided
    sign checks in a punctured neighborhood.  Endpoints that are themselves
    zeros are always included.
    """
    if resolution < 100:
        raise ValueError("resolution must be at least 100")
    xs = np.linspace(0.0, 1.0, resolution + 1)
    fs = np.array([f(x) for x in xs])

    zeros: list[float] = []
    ztol = 1e-12
    if abs(fs[0]) < ztol:
        zeros.append(0.0)
    for k in range(len(xs) - 1):
        a, b = xs[k], xs[k + 1]
        fa, fb = fs[k], fs[k + 1]
        if abs(fb) < ztol:
            if not any(abs(b - q) < 1e-9 for q in zeros):
                zeros.append(float(b))
            continue
        if fa == 0.0 or fa * fb > 0.0:
            continue
        # bisection to 1e-10
        while b - a > 1e-10:
            m = 0.5 * (a + b)
            fm = f(m)
            if fm == 0.0:
                a = b = m
                break
            if fa * fm < 0.0:
                b = m
            else:
                a, fa = m, fm
        q = 0.5 * (a + b)
        if not any(abs(q - z) < 1e-9 for z in zeros):
            zeros.append(float(q))

    labels = []
    h = neighborhood
    for q in sorted(zeros):
        sides = []
        if q - h >= 0.0:
            sides.append(f(q - h) * ((q - h) - q) < 0.0)
        if q + h <= 1.0:
            sides.append(f(q + h) * ((q + h) - q) < 0.0)
        labels.append("stable" if all(sides) else "unstable")
    return DriftClassification(zeros=tuple(sorted(zeros)), stability=tuple(labels))


def step_shares(state: MarketState, winner: int, flow_model: FlowModel,
                rng: np.random.Generator, loyal_shares=None) -> MarketState:
    """Apply one round of flow reallocation after `winner` took the block.

    One Bernoulli(drop_prob) draw picks the branch:
      drop: the winner gains delta of mass, the losers lose delta in total
            (proportionally to their shares); total mass unchanged.
      keep: the winner gains delta of new mass; total mass grows by delta.
    Loyal-share floors are enforced afterwards.  A market already absorbed
    (some share at its ceiling) is left untouched.
    """
    k = len(state.shares)
    loyal = np.zeros(k) if loyal_shares is None else np.asarray(loyal_shares, dtype=float)
    shares = np.array(state.shares, dtype=float)

    ceilings = 1.0 - (loyal.sum() - loyal)
    if np.any(shares >= ceilings - 1e-15):
        return _replace(state, round=state.round + 1)

    delta = flow_model.delta
    total = state.total_mass
    masses = shares * total

    if rng.random() < flow_model.drop_prob:
        # drop branch: total conserved while losers can cover delta
        loser_mass = total - masses[winner]
        masses[winner] += delta
        if loser_mass > 0.0:
            scale = max(0.0, 1.0 - delta / loser_mass)
            for i in range(k):
                if i != winner:
                    masses[i] *= scale
        total = total if delta <= loser_mass else masses.sum()
    else:
        masses[winner] += delta
        total += delta

    shares = masses / total
    shares = _apply_loyal_floors(shares, loyal)
    return MarketState(
        round=state.round + 1,
        shares=shares,
        total_mass=total,
        win_counts=state.win_counts,
        rounds_elapsed=state.rounds_elapsed,
    )


def _apply_loyal_floors(shares: np.ndarray, loyal: np.ndarray) -> np.ndarray:
    """Clamp shares to [loyal_k, 1], renormalize the slack above the floors."""
    shares = np.clip(shares, 0.0, 1.0)
    if loyal.sum() == 0.0:
        s = shares.sum()
        return shares / s if s > 0.0 else shares
    if shares.size == 2:
        # exact two-builder floors so the absorbing ceiling is hit exactly
        lo0, lo1 = loyal[0], loyal[1]
        z0 = min(max(shares[0] / shares.sum(), lo0), 1.0 - lo1)
        return np.array([z0, 1.0 - z0])
    shares = shares / shares.sum()
    below = shares < loyal
    if not np.any(below):
        return shares
    fixed = loyal[below].sum()
    free = shares[~below]
    out = shares.copy()
    out[below] = loyal[below]
    out[~below] = free * (1.0 - fixed) / free.sum()
    return out


@dataclass(frozen=True)
class SABounds:
    """Constants of the stochastic-approximation step-size and noise bounds."""

    c_l: float
    c_u: float
    K_u: float
    K_f: float
    K_e: float

    def violations(self) -> list[str]:
        out = []
        if self.c_l <= 0 or self.c_u <= 0 or self.K_u <= 0 or self.K_f <= 0:
            out.append("c_l, c_u, K_u, K_f must be positive")
        if self.K_e < 0:
            out.append("K_e must be nonnegative")
        if self.c_l > self.c_u:
            out.append("c_l must not exceed c_u")
        return out


@dataclass(frozen=True)
class SABoundsReport:
    bounds: SABounds
    ok: bool
    violations: tuple[str, ...]
    noise_mean: float
    noise_se: float


def sa_bounds_report(gammas, noises, drifts, delta: float, a_plus_b: float) -> SABoundsReport:
    """Check a recorded trajectory against the step-size and noise bounds.

    gammas[n-1] is the step size used between steps n-1 and n (n starting
    at 1), noises the martingale terms, drifts the drift values along the
    path.  Expected constants for a keep-branch run with constant delta:
    c_l = delta / (a_plus_b + delta), c_u = K_u = K_f = 1, K_e = 0.
    """
    g = np.asarray(gammas, dtype=float)
    u = np.asarray(noises, dtype=float)
    fv = np.asarray(drifts, dtype=float)
    bounds = SABounds(c_l=delta / (a_plus_b + delta), c_u=1.0, K_u=1.0, K_f=1.0, K_e=0.0)

    bad: list[str] = []
    n = np.arange(1, g.size + 1, dtype=float)
    low = bounds.c_l / n
    high = bounds.c_u / n
    for idx in np.nonzero((g < low - 1e-15) | (g > high + 1e-15))[0][:10]:
        bad.append(f"step {idx + 1}: gamma={g[idx]!r} outside [c_l/n, c_u/n]")
    for idx in np.nonzero(np.abs(u) > bounds.K_u + 1e-15)[0][:10]:
        bad.append(f"step {idx + 1}: |U|={abs(u[idx])!r} exceeds K_u")
    for idx in np.nonzero(np.abs(fv) > bounds.K_f + 1e-15)[0][:10]:
        bad.append(f"step {idx + 1}: |f|={abs(fv[idx])!r} exceeds K_f")

    gu = g * u
    mean = float(gu.mean()) if gu.size else 0.0
    se = float(gu.std(ddof=1) / np.sqrt(gu.size)) if gu.size > 1 else 0.0
    if gu.size > 1 and abs(mean) > 3.0 * se and se > 0.0:
        bad.append(f"mean(gamma*U)={mean!r} beyond 3 standard errors of 0")
    return SABoundsReport(
        bounds=bounds,
        ok=not bad,
        violations=tuple(bad),
        noise_mean=mean,
        noise_se=se,
    )
