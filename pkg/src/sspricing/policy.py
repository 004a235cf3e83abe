"""Band policies, the candidate value function, and optimality checks.

A solved band gives a stationary policy (order up to S at or below s,
post the price that maximizes the payoff against the local marginal
value) and a candidate value function V built by integrating w. The
verification routine re-derives V'' by finite differences and checks
the variational inequalities on a grid, without assuming the curve
actually solves the band equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .demand import DemandModel
from .errors import OutOfRange, VerificationFailed
from .solver import WSolution, _simpson_fine, price_profile


@dataclass(frozen=True, eq=False)
class Policy:
    """Stationary order-and-price rule.

    Pricing is either constant or table-driven: interpolate the stored
    marginal value linearly in the level, then map it through the demand
    family's best-price rule. Queries outside [s, table top] clamp.
    """

    s: float
    S: float
    z_grid: Optional[np.ndarray] = None
    w_table: Optional[np.ndarray] = None
    demand: Optional[DemandModel] = None
    constant_price: Optional[float] = None

    def __post_init__(self):
        if not (self.s < self.S):
            raise ValueError("need s < S")
        if self.constant_price is None:
            if self.z_grid is None or self.w_table is None or self.demand is None:
                raise ValueError(
                    "table policies need z_grid, w_table and a demand model"
                )
            # the simulator indexes the table by (z - z0) / spacing
            d = np.diff(self.z_grid)
            if d.size == 0 or not np.allclose(d, d[0], rtol=0, atol=1e-6 * abs(d[0])):
                raise ValueError("z_grid must be uniformly spaced")
        else:
            p = self.constant_price
            if self.demand is not None and not (
                self.demand.p_min - 1e-12 <= p <= self.demand.p_max + 1e-12
            ):
                raise ValueError("constant price outside the demand model's bounds")

    @classmethod
    def from_solution(cls, sol: WSolution) -> "Policy":
        return cls(
            s=sol.s,
            S=sol.S,
            z_grid=sol.grid,
            w_table=sol.w,
            demand=sol.params.demand,
        )

    @classmethod
    def constant(cls, s: float, S: float, price: float, demand=None) -> "Policy":
        return cls(s=float(s), S=float(S), constant_price=float(price), demand=demand)

    def price_at(self, z):
        """Posted price at level z (scalar or array)."""
        scalar = np.isscalar(z) or np.ndim(z) == 0
        zq = np.atleast_1d(np.asarray(z, dtype=np.float64))
        if self.constant_price is not None:
            out = np.full(zq.shape, self.constant_price)
        else:
            zq = np.clip(zq, self.s, self.z_grid[-1])
            w = np.interp(zq, self.z_grid, self.w_table)
            out = np.asarray(self.demand.best_price(w), dtype=np.float64)
        return float(out[0]) if scalar else out

    def apply(self, z: float):
        """Order quantity and posted price at level z.

        At or below s the policy orders up to S and prices at the
        post-order level; prices take effect after any order placed at
        the same instant.
        """
        z = float(z)
        if z <= self.s:
            return self.S - z, float(self.price_at(self.S))
        return 0.0, float(self.price_at(z))


# ---------------------------------------------------------------------------
# candidate value function


@dataclass(eq=False)
class ValueFunction:
    """V on [s_star, z_top], extended linearly with slope k below s_star.

    Normalized so V(s_star) = 0. The stored slope column pins V'(s_star)
    to k exactly, making the extension C1.
    """

    grid: np.ndarray
    V: np.ndarray
    w: np.ndarray
    s_star: float
    k: float
    _spline: Optional[CubicHermiteSpline] = field(default=None, repr=False)

    def _sp(self) -> CubicHermiteSpline:
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.grid, self.V, self.w)
        return self._spline

    def value(self, z):
        scalar = np.isscalar(z) or np.ndim(z) == 0
        zq = np.atleast_1d(np.asarray(z, dtype=np.float64))
        if np.any(zq > self.grid[-1] + 1e-9):
            raise OutOfRange("value query above the tabulated range")
        below = zq < self.s_star
        out = np.where(
            below,
            self.k * (zq - self.s_star),
            self._sp()(np.clip(zq, self.s_star, self.grid[-1])),
        )
        return float(out[0]) if scalar else out

    def derivative(self, z):
        scalar = np.isscalar(z) or np.ndim(z) == 0
        zq = np.atleast_1d(np.asarray(z, dtype=np.float64))
        if np.any(zq > self.grid[-1] + 1e-9):
            raise OutOfRange("derivative query above the tabulated range")
        below = zq < self.s_star
        out = np.where(
            below,
            self.k,
            self._sp().derivative()(np.clip(zq, self.s_star, self.grid[-1])),
        )
        return float(out[0]) if scalar else out


def build_value_function(sol: WSolution) -> ValueFunction:
    """Integrate the marginal-value curve into the candidate V.

    Cumulative Simpson on the uniform grid above s_star plus an
    interpolant-based partial first cell; the s_star node itself is
    prepended with V = 0 and slope exactly k.
    """
    spline = sol.interpolant()
    d = sol.spacing
    j0 = int(np.searchsorted(sol.grid, sol.s + 1e-12, side="right"))
    if j0 >= sol.grid.size - 1:
        raise OutOfRange("solution grid has no room above s")
    sub_z = sol.grid[j0:]
    sub_w = sol.w[j0:]
    v0 = _simpson_fine(spline, sol.s, float(sub_z[0]))
    V_sub = cumulative_simpson(sub_w, dx=d, initial=0.0) + v0
    grid = np.concatenate(([sol.s], sub_z))
    V = np.concatenate(([0.0], V_sub))
    w = np.concatenate(([sol.params.k], sub_w))
    return ValueFunction(grid=grid, V=V, w=w, s_star=sol.s, k=sol.params.k)


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    """Outcome of the candidate-optimality checks; all margins signed."""

    hjb_margin_max: float
    hjb_margin_max_continuous: float
    below_band_margin_max: float
    marginal_excess_max: float
    growth_slope: float
    growth_limit: float
    increment_excess_max: float
    band_jump_error: float
    skipped_stencils: int
    checked_points: int
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "hjb_margin_max": self.hjb_margin_max,
            "hjb_margin_max_continuous": self.hjb_margin_max_continuous,
            "below_band_margin_max": self.below_band_margin_max,
            "marginal_excess_max": self.marginal_excess_max,
            "growth_slope": self.growth_slope,
            "growth_limit": self.growth_limit,
            "increment_excess_max": self.increment_excess_max,
            "band_jump_error": self.band_jump_error,
            "skipped_stencils": self.skipped_stencils,
            "checked_points": self.checked_points,
            "ok": self.ok,
            "failures": list(self.failures),
        }


def _first_derivative_with_kinks(z, y, d, kink_z):
    """4th-order derivative of tabulated y, stencils steered around kinks.

    Central where the 5-point window is kink-free, else a one-sided
    5-point stencil on the clear side. Points with no clear stencil are
    left unestimated (masked out).
    """
    n = y.size
    deriv = np.full(n, np.nan)
    ok = np.zeros(n, dtype=bool)
    kz = np.asarray(sorted(kink_z), dtype=np.float64)

    def clear(a, b):
        i0 = np.searchsorted(kz, a + 1e-9, side="left")
        i1 = np.searchsorted(kz, b - 1e-9, side="right")
        return i0 >= i1

    for i in range(n):
        zi = z[i]
        if 2 <= i < n - 2 and clear(zi - 2 * d, zi + 2 * d):
            deriv[i] = (
                y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]
            ) / (12.0 * d)
            ok[i] = True
        elif i + 4 < n and clear(zi, zi + 4 * d):
            deriv[i] = (
                -25.0 * y[i]
                + 48.0 * y[i + 1]
                - 36.0 * y[i + 2]
                + 16.0 * y[i + 3]
                - 3.0 * y[i + 4]
            ) / (12.0 * d)
            ok[i] = True
        elif i - 4 >= 0 and clear(zi - 4 * d, zi):
            deriv[i] = (
                25.0 * y[i]
                - 48.0 * y[i - 1]
                + 36.0 * y[i - 2]
                - 16.0 * y[i - 3]
                + 3.0 * y[i - 4]
            ) / (12.0 * d)
            ok[i] = True
    return deriv, ok


def verify_upper_bound(
    sol: WSolution,
    vf: Optional[ValueFunction] = None,
    *,
    tol_margin: float = 1e-6,
    tol_marginal: float = 1e-8,
    tol_increment: float = 1e-8,
    n_prices: int = 81,
    n_pairs: int = 100,
    z_margin: float = 5.0,
    seed: int = 7,
) -> VerificationReport:
    """Grid certification that the candidate V satisfies the optimality system.

    Checks, on a price grid and the solution's z grid: the generator
    inequality (drift-diffusion payoff never beats gamma), the marginal
    bound V' <= k outside the band, polynomial tail growth of V', and the
    order-increment bound V(z1) - V(z2) <= K + k (z1 - z2). Raises
    VerificationFailed with the report attached when any check fails.
    """
    params = sol.params
    demand, cost = params.demand, params.cost
    k, K, gamma = params.k, params.K, sol.gamma
    if vf is None:
        vf = build_value_function(sol)
    d = sol.spacing
    failures = []

    # uniform part of the value grid (drop the irregular s_star node)
    zB = vf.grid[1:]
    wB = vf.w[1:]
    kinks = [0.0, sol.s]
    profile = price_profile(sol)
    kinks.extend(profile.breakpoints)
    v2, okmask = _first_derivative_with_kinks(zB, wB, d, kinks)
    skipped = int(np.count_nonzero(~okmask))

    p_grid = np.linspace(demand.p_min, demand.p_max, n_prices)
    mu_p = np.asarray(demand.rate(p_grid), dtype=np.float64)

    zc = zB[okmask]
    wc = wB[okmask]
    diff_term = 0.5 * params.sigma**2 * v2[okmask]
    payoff_grid = np.max(
        mu_p[:, None] * (p_grid[:, None] - wc[None, :]), axis=0
    )
    base = diff_term - np.asarray(cost.holding(zc)) - gamma
    margins_grid = base + payoff_grid
    margins_cont = base + np.asarray(demand.pi(wc))
    hjb_margin_max = float(np.max(margins_grid))
    hjb_margin_cont = float(np.max(margins_cont))

    # below the band V is linear with slope k: the diffusion term vanishes
    n_ext = int(math.ceil(z_margin / d))
    z_ext = sol.s - d * np.arange(1, n_ext + 1)
    payoff_at_k = float(np.max(mu_p * (p_grid - k)))
    below_margins = payoff_at_k - np.asarray(cost.holding(z_ext)) - gamma
    below_max = float(np.max(below_margins))

    if hjb_margin_max > tol_margin:
        failures.append(
            f"generator inequality violated above the band floor: margin "
            f"{hjb_margin_max:.3g} > {tol_margin:.3g}"
        )
    if below_max > tol_margin:
        failures.append(
            f"generator inequality violated below the band: margin "
            f"{below_max:.3g} > {tol_margin:.3g}"
        )

    # marginal bound outside the open band
    outside = zB >= sol.S - 1e-12
    marginal_excess = float(np.max(wB[outside] - k)) if outside.any() else -math.inf
    if marginal_excess > tol_marginal:
        failures.append(
            f"marginal value exceeds k beyond the band top by {marginal_excess:.3g}"
        )

    # tail growth of the marginal value
    n_exp = cost.growth_exponent
    tail = zB >= max(sol.S + 1.0, 0.5 * sol.z_max_used)
    zt = zB[tail]
    wt = np.abs(wB[tail])
    good = wt > 1e-9
    if np.count_nonzero(good) >= 10:
        slope = float(np.polyfit(np.log(zt[good]), np.log(wt[good]), 1)[0])
    else:
        slope = 0.0
    growth_limit = float(n_exp + 1)
    if slope > growth_limit:
        failures.append(
            f"marginal value grows like z^{slope:.2f}, above the z^{growth_limit:.0f} cap"
        )

    # order-increment bound on random level pairs
    rng = np.random.default_rng(seed)
    lo_z, hi_z = sol.s - z_margin, float(zB[-1])
    za = rng.uniform(lo_z, hi_z, size=n_pairs)
    zb = rng.uniform(lo_z, hi_z, size=n_pairs)
    z1 = np.maximum(za, zb)
    z2 = np.minimum(za, zb)
    excess = (vf.value(z1) - vf.value(z2)) - (K + k * (z1 - z2))
    increment_excess = float(np.max(excess))
    if increment_excess > tol_increment:
        failures.append(
            f"an order increment beats the reorder cost by {increment_excess:.3g}"
        )

    # value jump across the band must price one full order
    jump = vf.value(sol.S) - vf.value(sol.s) - (K + k * (sol.S - sol.s))
    band_jump_error = abs(float(jump))
    if band_jump_error > 1e-6 * max(K, 1.0):
        failures.append(
            f"V(S) - V(s) misprices the order by {band_jump_error:.3g}"
        )

    report = VerificationReport(
        hjb_margin_max=hjb_margin_max,
        hjb_margin_max_continuous=hjb_margin_cont,
        below_band_margin_max=below_max,
        marginal_excess_max=marginal_excess,
        growth_slope=slope,
        growth_limit=growth_limit,
        increment_excess_max=increment_excess,
        band_jump_error=band_jump_error,
        skipped_stencils=skipped,
        checked_points=int(np.count_nonzero(okmask)),
        failures=tuple(failures),
    )
    if failures:
        raise VerificationFailed(
            "candidate optimality checks failed: " + "; ".join(failures),
            details=report.to_dict(),
        )
    return report


def curve_table(sol: WSolution, vf: Optional[ValueFunction] = None):
    """Column arrays (z, w, V, price) on the value grid, for export."""
    if vf is None:
        vf = build_value_function(sol)
    z = vf.grid
    w = vf.w
    V = vf.V
    price = np.asarray(sol.params.demand.best_price(w), dtype=np.float64)
    return z, w, V, price
