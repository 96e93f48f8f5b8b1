"""Asymmetric first-price auction equilibria and proposer-revenue integrals.

Solves the coupled inverse-bid ODE system

    (f_i(phi_i)/F_i(phi_i)) phi_i'(b) = 1/(phi_j - b)
    (f_j(phi_j)/F_j(phi_j)) phi_j'(b) = 1/(phi_i - b)

by shooting on the unknown common maximum bid, integrating backward from the
terminal conditions phi_k(b_high) = alpha_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar


class SolverError(RuntimeError):
    """Shooting failed to bracket or the solution failed its residual check."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history or []


class NoCompetitionError(ValueError):
    """Reserve above the weak bidder's maximum valuation: empty feasible region."""


@dataclass(frozen=True)
class ValueDistribution:
    """Valuation distribution of one bidder (or cartel).

    power_of_uniform: CDF ((v - lo)/(hi - lo))**exponent, the maximum of
    `exponent` i.i.d. uniform draws on the support.  tabulated: monotone
    grids for the CDF and PDF.
    """

    family: str  # "power_of_uniform" | "tabulated"
    exponent: int = 1
    support_low: float = 0.0
    support_high: float = 1.0
    value_grid: np.ndarray | None = None
    cdf_grid: np.ndarray | None = None
    pdf_grid: np.ndarray | None = None

    def __post_init__(self):
        if self.family == "power_of_uniform":
            if self.exponent < 1:
                raise ValueError("power exponent must be a positive integer")
            if not self.support_low < self.support_high:
                raise ValueError("support_low must be below support_high")
        elif self.family == "tabulated":
            v = np.asarray(self.value_grid, dtype=float)
            c = np.asarray(self.cdf_grid, dtype=float)
            p = np.asarray(self.pdf_grid, dtype=float)
            if v.ndim != 1 or v.size < 4 or c.shape != v.shape or p.shape != v.shape:
                raise ValueError("tabulated family needs matching 1-d grids")
            if abs(c[0]) > 1e-12 or abs(c[-1] - 1.0) > 1e-12 or np.any(np.diff(c) < 0):
                raise ValueError("cdf_grid must rise from 0 to 1")
            if np.any(p < 0):
                raise ValueError("pdf_grid must be nonnegative")
            quad = np.concatenate(([0.0], np.cumsum(np.diff(v) * 0.5 * (p[1:] + p[:-1]))))
            if np.max(np.abs(quad - c)) > 1e-6:
                raise ValueError("pdf_grid inconsistent with cdf_grid beyond 1e-6")
            object.__setattr__(self, "support_low", float(v[0]))
            object.__setattr__(self, "support_high", float(v[-1]))
        else:
            raise ValueError(f"unknown distribution family: {self.family!r}")

    def _interp(self):
        # cached monotone interpolants for the tabulated family
        if not hasattr(self, "_F"):
            object.__setattr__(self, "_F", PchipInterpolator(self.value_grid, self.cdf_grid))
            object.__setattr__(self, "_f", PchipInterpolator(self.value_grid, self.pdf_grid))
        return self._F, self._f

    def cdf(self, v):
        lo, hi = self.support_low, self.support_high
        v = np.clip(v, lo, hi)
        if self.family == "power_of_uniform":
            return ((v - lo) / (hi - lo)) ** self.exponent
        F, _ = self._interp()
        return F(v)

    def pdf(self, v):
        lo, hi = self.support_low, self.support_high
        v = np.clip(v, lo, hi)
        if self.family == "power_of_uniform":
            m = self.exponent
            return m * ((v - lo) / (hi - lo)) ** (m - 1) / (hi - lo)
        _, f = self._interp()
        return f(v)

    def cdf_over_pdf(self, v):
        """F(v)/f(v), the quantity entering the equilibrium ODE."""
        if self.family == "power_of_uniform":
            return (v - self.support_low) / self.exponent
        return self.cdf(v) / self.pdf(v)

    def ppf(self, u):
        lo, hi = self.support_low, self.support_high
        if self.family == "power_of_uniform":
            return lo + (hi - lo) * np.asarray(u, dtype=float) ** (1.0 / self.exponent)
        return np.interp(u, self.cdf_grid, self.value_grid)

    def sample(self, n: int, rng: np.random.Generator):
        return self.ppf(rng.random(n))

    def boundary_inverse_slope(self) -> float:
        """Exponent entering the opponent's boundary expansion: the inverse-bid
        slope of side k at a common lower support is 1 + 1/(opponent slope
        exponent).  1 for densities positive at the boundary."""
        if self.family == "power_of_uniform":
            return float(self.exponent)
        return 1.0


@dataclass
class BidEquilibrium:
    """Gridded inverse bid functions on the common bid support."""

    bid_grid: np.ndarray
    phi_i: np.ndarray
    phi_j: np.ndarray
    b_low: float
    b_high: float
    reserve: float
    residual_max: float

    def check(self) -> None:
        for name, phi in (("phi_i", self.phi_i), ("phi_j", self.phi_j)):
            if np.any(np.diff(phi) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        interior = slice(1, -1)
        if np.any(self.phi_i[interior] <= self.bid_grid[interior]) or np.any(
            self.phi_j[interior] <= self.bid_grid[interior]
        ):
            raise ValueError("inverse bids must exceed the bid on the interior")

    def value_for_bid(self, b, side: str):
        phi = self.phi_i if side == "i" else self.phi_j
        return np.interp(b, self.bid_grid, phi)

    def bid_for_value(self, v, side: str):
        """Forward bid function by inverting the monotone phi grid.

        Values outside the solved support are clamped to the endpoints;
        the second element flags the clamp.
        """
        phi = self.phi_i if side == "i" else self.phi_j
        clamped = bool(np.any(v < phi[0]) or np.any(v > phi[-1]))
        return np.interp(v, phi, self.bid_grid), clamped

    def bids_for_values(self, values, side: str) -> np.ndarray:
        phi = self.phi_i if side == "i" else self.phi_j
        return np.interp(values, phi, self.bid_grid)

    def save(self, path) -> None:
        """Columnar text: a header with the scalars, then b, phi_i, phi_j rows."""
        with open(path, "w") as fh:
            fh.write(f"# b_low {self.b_low!r}\n")
            fh.write(f"# b_high {self.b_high!r}\n")
            fh.write(f"# reserve {self.reserve!r}\n")
            fh.write(f"# residual_max {self.residual_max!r}\n")
            fh.write("# b phi_i phi_j\n")
            for b, pi, pj in zip(self.bid_grid, self.phi_i, self.phi_j):
                fh.write(f"{float(b)!r} {float(pi)!r} {float(pj)!r}\n")

    @classmethod
    def load(cls, path) -> "BidEquilibrium":
        header = {}
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    parts = line[1:].split()
                    if len(parts) == 2:
                        header[parts[0]] = float(parts[1])
                    continue
                rows.append([float(x) for x in line.split()])
        data = np.array(rows)
        return cls(
            bid_grid=data[:, 0], phi_i=data[:, 1], phi_j=data[:, 2],
            b_low=header["b_low"], b_high=header["b_high"],
            reserve=header["reserve"], residual_max=header["residual_max"],
        )


def power_pair(m: int, n: int, lo: float = 0.0, hi: float = 1.0):
    """Distributions of two cartels of sizes m >= n drawing from Uniform[lo, hi]."""
    return (
        ValueDistribution("power_of_uniform", exponent=m, support_low=lo, support_high=hi),
        ValueDistribution("power_of_uniform", exponent=n, support_low=lo, support_high=hi),
    )


def lower_bound_bid(dist_i: ValueDistribution, dist_j: ValueDistribution,
                    reserve: float = 0.0) -> float:
    """Minimum winning bid from the boundary regularity cases."""
    bi, bj = dist_i.support_low, dist_j.support_low
    if (
        dist_i.family == "power_of_uniform"
        and dist_j.family == "power_of_uniform"
        and dist_i.support_low == dist_j.support_low
        and dist_i.support_high == dist_j.support_high
        and dist_i.exponent < dist_j.exponent
    ):
        raise ValueError("dist_i must conditionally stochastically dominate dist_j")
    if reserve > dist_j.support_high:
        raise NoCompetitionError("reserve above the weak bidder's maximum valuation")

    if bi == bj:
        return bj if reserve <= bj else reserve
    if bi <= reserve:  # bj < bi <= r
        return reserve
    argmax = _argmax_monopoly_bid(bi, dist_j)
    if bj < reserve:  # bj < r <= bi
        return max(argmax, reserve)
    return argmax  # r <= bj < bi


def _argmax_monopoly_bid(beta_i: float, dist_j: ValueDistribution) -> float:
    """Golden-section argmax of (beta_i - b) * F_j(b)."""
    lo = dist_j.support_low
    hi = min(beta_i, dist_j.support_high)
    res = minimize_scalar(
        lambda b: -(beta_i - b) * float(dist_j.cdf(b)),
        bracket=None, bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)


def _boundary_slopes(dist_i, dist_j):
    # phi_k'(beta) = 1 + 1/(opponent exponent); reduces to 2 for densities
    # positive at the common lower support
    return 1.0 + 1.0 / dist_j.boundary_inverse_slope(), 1.0 + 1.0 / dist_i.boundary_inverse_slope()


def solve_equilibrium(dist_i: ValueDistribution, dist_j: ValueDistribution,
                      reserve: float = 0.0, grid_size: int = 2048,
                      patch: float = 1e-4) -> BidEquilibrium:
    """Shooting solve of the equilibrium ODE system.

    Bisects the common maximum bid: a guess is too high when the backward
    trajectory collides with the diagonal (phi - b -> 0) above the lower
    bound bid, too low when it reaches the lower bound still clear of it.
    Inside the collision layer of width `patch` the solution follows its
    boundary-slope linearization.
    """
    if grid_size < 512:
        raise ValueError("grid_size must be at least 512")
    b_low = lower_bound_bid(dist_i, dist_j, reserve)
    alpha_i, alpha_j = dist_i.support_high, dist_j.support_high
    beta = dist_i.support_low

    def rhs(b, y):
        pi, pj = y
        return [
            dist_i.cdf_over_pdf(pi) / max(pj - b, 1e-300),
            dist_j.cdf_over_pdf(pj) / max(pi - b, 1e-300),
        ]

    def gap_event(b, y):
        return min(y[0] - b, y[1] - b) - patch

    gap_event.terminal = True

    def probe(b_bar):
        if min(alpha_i, alpha_j) - b_bar <= patch:
            return "touch", b_bar, None
        sol = solve_ivp(
            rhs, (b_bar, b_low), [alpha_i, alpha_j],
            method="RK45", rtol=1e-10, atol=1e-12,
            events=gap_event, dense_output=True, max_step=(b_bar - b_low) / 8,
        )
        if sol.t_events[0].size:
            return "touch", float(sol.t_events[0][0]), sol
        return "clear", float(sol.t[-1]), sol

    span = alpha_j - b_low
    if span <= 0:
        raise SolverError("empty bid support")
    lo, hi = b_low + 1e-9 * span, alpha_j - 1e-12 * span
    history = []
    kind_lo, _, _ = probe(lo)
    kind_hi, _, _ = probe(hi)
    history += [(lo, kind_lo), (hi, kind_hi)]
    if kind_lo != "clear" or kind_hi != "touch":
        raise SolverError("shooting failed to bracket the maximum bid", history)
    sol_hi = None
    b_touch = None
    for _ in range(200):
        if hi - lo <= 1e-13 * max(span, 1.0):
            break
        mid = 0.5 * (lo + hi)
        kind, where, sol = probe(mid)
        history.append((mid, kind))
        if kind == "touch":
            hi, sol_hi, b_touch = mid, sol, where
        else:
            lo = mid
    if sol_hi is None:
        kind, b_touch, sol_hi = probe(hi)
        if kind != "touch":
            raise SolverError("converged bracket lost the touching trajectory", history)
    b_high = hi

    slope_i, slope_j = _boundary_slopes(dist_i, dist_j)
    layer = patch / (min(slope_i, slope_j) - 1.0) if min(slope_i, slope_j) > 1.0 else patch
    if b_touch - b_low > 10.0 * layer + 1e-6 * span:
        raise SolverError(
            f"trajectory leaves the diagonal at {b_touch!r}, far above b_low={b_low!r}",
            history,
        )

    # boundary-densified grid (cosine clustering at both endpoints)
    x = np.linspace(0.0, 1.0, grid_size)
    grid = b_low + (b_high - b_low) * 0.5 * (1.0 - np.cos(np.pi * x))

    phi = np.empty((2, grid_size))
    above = grid >= b_touch
    if np.any(above):
        vals = sol_hi.sol(grid[above])
        phi[:, above] = vals
    if np.any(~above):
        # linear boundary layer pinned to the integrated solution at b_touch
        anchor = sol_hi.sol(b_touch)
        for row, anc in enumerate(anchor):
            eff = (anc - beta) / (b_touch - beta) if b_touch > beta else 1.0
            phi[row, ~above] = beta + eff * (grid[~above] - beta)
    phi_i, phi_j = phi[0], phi[1]
    phi_i[-1], phi_j[-1] = alpha_i, alpha_j
    phi_i = np.maximum.accumulate(phi_i)
    phi_j = np.maximum.accumulate(phi_j)

    eq = BidEquilibrium(
        bid_grid=grid, phi_i=phi_i, phi_j=phi_j,
        b_low=b_low, b_high=b_high, reserve=reserve,
        residual_max=0.0,
    )
    eq.residual_max = _residual_max(eq, dist_i, dist_j, b_touch, layer)
    if eq.residual_max > 1e-4:
        raise SolverError(
            f"residual_max={eq.residual_max!r} exceeds 1e-4", history
        )
    eq.check()
    return eq


def _residual_max(eq: BidEquilibrium, dist_i, dist_j, b_touch: float,
                  layer: float = 1e-4) -> float:
    """Max normalized first-order-condition residual over interior grid points.

    Compares finite-difference slopes of the gridded phi against the ODE
    right-hand side.  A band of width 10 * layer above b_touch is excluded
    along with the boundary layer below it: the trajectory bends sharply into
    the diagonal there and the second-order difference quotient cannot track
    the curvature even when the integrated solution is accurate.
    """
    b = eq.bid_grid
    res = 0.0
    for phi, dist, other in ((eq.phi_i, dist_i, eq.phi_j), (eq.phi_j, dist_j, eq.phi_i)):
        dphi = np.gradient(phi, b)
        lhs = dphi * (other - b) / np.maximum(dist.cdf_over_pdf(phi), 1e-300)
        cut = b_touch + max(10.0 * layer, 2.0 * (b[1] - b[0]))
        interior = (b > cut) & (b < eq.b_high - 1e-12)
        interior[:2] = interior[-2:] = False
        if np.any(interior):
            res = max(res, float(np.max(np.abs(lhs[interior] - 1.0))))
    return res


@dataclass(frozen=True)
class VerificationReport:
    residual_max: float
    residual_ok: bool
    best_response_max_gain: float
    best_response_ok: bool
    dominance_ok: bool
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.residual_ok and self.best_response_ok and self.dominance_ok


def verify_equilibrium(eq: BidEquilibrium, dist_i: ValueDistribution,
                       dist_j: ValueDistribution, samples: int = 400_000,
                       rng: np.random.Generator | None = None,
                       quantiles: int = 50) -> VerificationReport:
    """Residual recheck, Monte Carlo best-response test, and dominance check.

    The best-response test reuses one opponent-bid sample per side (common
    random numbers) across a +/-10% perturbation grid; the prescribed bid
    must come within 1e-3 * v of the best perturbed utility.
    """
    rng = rng or np.random.default_rng(0)
    failures: list[str] = []

    interior = slice(max(2, eq.bid_grid.size // 64), -1)
    dom_phi = np.all(eq.phi_i[interior] > eq.phi_j[interior])
    fi = dist_i.cdf(eq.phi_i[interior])
    fj = dist_j.cdf(eq.phi_j[interior])
    symmetric = (
        dist_i.family == dist_j.family == "power_of_uniform"
        and dist_i.exponent == dist_j.exponent
        and dist_i.support_low == dist_j.support_low
        and dist_i.support_high == dist_j.support_high
    )
    dominance_ok = bool(np.all(fi <= fj + 1e-9) and (symmetric or dom_phi))
    if not dominance_ok:
        failures.append("stochastic-dominance ordering violated on the interior")

    max_gain = 0.0
    best_response_ok = True
    for side, dist, opp_dist, opp_side in (
        ("i", dist_i, dist_j, "j"),
        ("j", dist_j, dist_i, "i"),
    ):
        opp_values = opp_dist.sample(samples, rng)
        opp_bids = np.sort(eq.bids_for_values(opp_values, opp_side))
        qs = (np.arange(quantiles) + 0.5) / quantiles
        for q in qs:
            v = float(dist.ppf(q))
            b0, _ = eq.bid_for_value(v, side)
            b0 = float(np.asarray(b0))
            grid = b0 * np.linspace(0.9, 1.1, 21) if b0 > 0 else np.linspace(0.0, 0.01, 21)
            win = np.searchsorted(opp_bids, grid, side="left") / samples
            u = (v - grid) * win
            u0 = (v - b0) * (np.searchsorted(opp_bids, b0, side="left") / samples)
            gain = float(np.max(u) - u0)
            max_gain = max(max_gain, gain)
            if gain > 1e-3 * max(v, 1e-12):
                best_response_ok = False
                failures.append(
                    f"side {side}: deviation gain {gain!r} at valuation {v!r}"
                )
    residual_ok = eq.residual_max <= 1e-4
    if not residual_ok:
        failures.append(f"residual_max {eq.residual_max!r} exceeds 1e-4")
    return VerificationReport(
        residual_max=eq.residual_max,
        residual_ok=residual_ok,
        best_response_max_gain=max_gain,
        best_response_ok=best_response_ok,
        dominance_ok=dominance_ok,
        failures=tuple(failures),
    )


def expected_revenue(eq: BidEquilibrium, m: int, n: int,
                     base_H: ValueDistribution | None = None,
                     samples: int = 200_000,
                     rng: np.random.Generator | None = None) -> float:
    """Proposer revenue: Stieltjes integral of b against the winning-bid CDF
    H(phi_1)^m H(phi_2)^n, cross-checked by Monte Carlo within 2 standard errors."""
    rng = rng or np.random.default_rng(0)
    if base_H is None:
        base_H = ValueDistribution("power_of_uniform", exponent=1)
    dist_i = ValueDistribution(
        "power_of_uniform", exponent=m * base_H.exponent,
        support_low=base_H.support_low, support_high=base_H.support_high,
    )
    dist_j = ValueDistribution(
        "power_of_uniform", exponent=n * base_H.exponent,
        support_low=base_H.support_low, support_high=base_H.support_high,
    )
    g = dist_i.cdf(eq.phi_i) * dist_j.cdf(eq.phi_j)
    b = eq.bid_grid
    revenue = float(np.sum(0.5 * (b[1:] + b[:-1]) * np.diff(g)))

    vi = dist_i.sample(samples, rng)
    vj = dist_j.sample(samples, rng)
    winning = np.maximum(eq.bids_for_values(vi, "i"), eq.bids_for_values(vj, "j"))
    mc = float(winning.mean())
    se = float(winning.std(ddof=1) / np.sqrt(samples))
    if abs(revenue - mc) > 2.0 * se + 1e-4:
        raise SolverError(
            f"grid revenue {revenue!r} disagrees with Monte Carlo {mc!r} (se {se!r})"
        )
    return revenue


def equilibrium_win_prob(eq: BidEquilibrium, dist_i: ValueDistribution,
                         dist_j: ValueDistribution, samples: int = 100_000,
                         rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Monte Carlo single-round win probability of the strong side and its
    standard error."""
    rng = rng or np.random.default_rng(0)
    bi = eq.bids_for_values(dist_i.sample(samples, rng), "i")
    bj = eq.bids_for_values(dist_j.sample(samples, rng), "j")
    x = (bi > bj).astype(float)
    ties = bi == bj
    if np.any(ties):
        x[ties] = rng.random(int(ties.sum())) < 0.5
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(samples))
