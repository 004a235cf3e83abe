"""Backward-shooting solver for the stationary band equation.

The marginal-value curve w solves

    (sigma^2 / 2) w'(z) = gamma + h(z) - pi(w(z)),

integrated backward from a far-right anchor where w tracks the
quasi-static root pi(w) = gamma + h(z). The long-run profit rate gamma
is pinned by the band condition: the area of w above the unit order
cost k between its two crossings must equal the fixed order cost K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from . import _kernels
from .cost import CostModel
from .demand import DemandModel
from .errors import (
    BlowUp,
    ModelInvalid,
    NoBand,
    NoSolution,
    OutOfRange,
    RootBracketFailure,
    SolverError,
    StepUnderflow,
)

_ROOT_XTOL = 1e-12
_BRACKET_CAP = 1e9


@dataclass(frozen=True)
class ModelParams:
    """Demand family, holding cost, volatility and ordering costs."""

    demand: DemandModel
    cost: CostModel
    sigma: float = 1.0
    K: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        if not isinstance(self.demand, DemandModel):
            raise ModelInvalid("demand must be a DemandModel instance")
        if not isinstance(self.cost, CostModel):
            raise ModelInvalid("cost must be a CostModel instance")
        for name in ("sigma", "K", "k"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ModelInvalid(f"{name} must be a finite number")
        if self.sigma <= 0:
            raise ModelInvalid("sigma must be positive")
        if self.K <= 0:
            raise ModelInvalid("fixed order cost K must be positive")
        if self.k <= 0:
            raise ModelInvalid("unit order cost k must be positive")
        if self.k >= self.demand.p_max:
            import warnings

            warnings.warn(
                "unit order cost k is at or above the price ceiling; the "
                "margin p - k is never positive",
                stacklevel=2,
            )


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and discretization knobs for the band solver."""

    grid_spacing: float = 1.0 / 400.0
    rtol: float = 1e-13
    atol: float = 1e-13
    tol_ode: float = 1e-8
    tol_bc: float = 1e-6
    gamma_tol: float = 1e-12
    root_tol: float = 1e-10
    z_max: Optional[float] = None
    z_max_factor: float = 100.0
    z_max_gamma_tol: float = 1e-8
    stop_offset: float = 0.1

    def __post_init__(self):
        if self.grid_spacing <= 0:
            raise ValueError("grid_spacing must be positive")
        if self.stop_offset <= 0:
            raise ValueError("stop_offset must be positive")


@dataclass
class WFragment:
    """One backward integration: w and its exact slope on a uniform grid.

    ``w_prime`` holds the band-equation right-hand side evaluated at the
    stored values, so Hermite interpolation between nodes sees the true
    local slope rather than a finite-difference estimate.
    """

    grid: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    gamma: float
    spacing: float
    z_max: float
    stopped_early: bool
    params: Optional[ModelParams] = None
    _spline: Optional[CubicHermiteSpline] = field(
        default=None, repr=False, compare=False
    )

    def interpolant(self) -> CubicHermiteSpline:
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.grid, self.w, self.w_prime)
        return self._spline

    def __call__(self, z):
        return self.interpolant()(z)


@dataclass(frozen=True)
class WSolution:
    """Solved band: marginal-value curve, profit rate and order levels."""

    grid: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    gamma: float
    s: float
    S: float
    z_star: float
    residual_max: float
    z_max_used: float
    params: ModelParams
    spacing: float

    def fragment(self) -> WFragment:
        return WFragment(
            grid=self.grid,
            w=self.w,
            w_prime=self.w_prime,
            gamma=self.gamma,
            spacing=self.spacing,
            z_max=self.z_max_used,
            stopped_early=True,
            params=self.params,
        )

    def interpolant(self) -> CubicHermiteSpline:
        return self.fragment().interpolant()


# ---------------------------------------------------------------------------
# asymptotic anchor


def asymptotic_init(params: ModelParams, gamma: float, z_max: float) -> float:
    """Quasi-static anchor value: the root w of pi(w) = gamma + h(z_max).

    pi is continuous and strictly decreasing with full range, so the root
    exists and is unique; it is bracketed by doubling and polished with a
    safeguarded root-finder.
    """
    target = params.cost.holding(z_max) + gamma
    if not math.isfinite(target):
        raise RootBracketFailure("holding cost at z_max is not finite")
    pi = params.demand.pi

    lo, hi = -1.0, 1.0
    while pi(hi) > target:
        hi = 2.0 * hi + 1.0
        if hi > _BRACKET_CAP:
            raise RootBracketFailure(
                "no bracket for the asymptotic anchor above w = 1e9"
            )
    while pi(lo) < target:
        lo = 2.0 * lo - 1.0
        if lo < -_BRACKET_CAP:
            raise RootBracketFailure(
                "no bracket for the asymptotic anchor below w = -1e9"
            )
    return float(
        brentq(lambda v: pi(v) - target, lo, hi, xtol=_ROOT_XTOL, maxiter=200)
    )


# ---------------------------------------------------------------------------
# backward integration


def _kernel_callables(params: ModelParams):
    """Pick the compiled family kernels or plain-Python wrappers."""
    dp = params.demand._kernel_params()
    hp = params.cost._kernel_params()
    if dp is not None and hp is not None and _kernels.NUMBA_OK:
        return (
            _kernels.integrate_cells_jit,
            _kernels.pi_coded_jit,
            np.asarray(dp, dtype=np.float64),
            _kernels.holding_coded_jit,
            np.asarray(hp, dtype=np.float64),
        )
    demand, cost = params.demand, params.cost
    dummy = np.zeros(1)

    def pi_fn(w, _d):
        return float(demand.pi(w))

    def h_fn(z, _c):
        return float(cost.holding(z))

    return _kernels.integrate_cells, pi_fn, dummy, h_fn, dummy


def integrate_w(
    params: ModelParams,
    gamma: float,
    z_max: float,
    z_stop: float,
    opts: Optional[SolverOptions] = None,
    stop_at_band_exit: bool = False,
) -> WFragment:
    """Integrate the band equation backward from z_max toward z_stop.

    Both ends are snapped to the uniform grid (spacing anchored at 0).
    With ``stop_at_band_exit`` the integration halts at the first grid
    point where w has dropped below k - stop_offset after having been
    above it, which places the left end a short margin below the lower
    order level s.
    """
    opts = opts or SolverOptions()
    d = opts.grid_spacing
    i_hi = int(round(z_max / d))
    i_lo = int(math.floor(z_stop / d))
    if i_lo >= i_hi:
        raise ValueError("z_stop must lie below z_max by at least one cell")

    z_hi = i_hi * d
    w0 = asymptotic_init(params, gamma, z_hi)
    n = i_hi - i_lo
    w_arr = np.empty(n + 1)
    f_arr = np.empty(n + 1)

    stepper, pi_fn, dp, h_fn, hp = _kernel_callables(params)
    status, j, z_fail = stepper(
        i_hi,
        i_lo,
        d,
        w0,
        gamma,
        params.sigma**2,
        params.k - opts.stop_offset,
        stop_at_band_exit,
        opts.rtol,
        opts.atol,
        pi_fn,
        dp,
        h_fn,
        hp,
        w_arr,
        f_arr,
    )
    if status == 2:
        raise BlowUp(
            f"w exceeded 1e9 in magnitude near z = {z_fail:.6g}", z_reached=z_fail
        )
    if status == 3:
        raise StepUnderflow(
            f"step size collapsed below 1e-12 near z = {z_fail:.6g}",
            z_reached=z_fail,
        )

    grid = np.arange(i_lo + j, i_hi + 1, dtype=np.float64) * d
    return WFragment(
        grid=grid,
        w=w_arr[j:].copy(),
        w_prime=f_arr[j:].copy(),
        gamma=gamma,
        spacing=d,
        z_max=z_hi,
        stopped_early=(status == 1),
        params=params,
    )


# ---------------------------------------------------------------------------
# band geometry


def _branch_classes(demand: DemandModel, w: np.ndarray) -> np.ndarray:
    """Classify each w by its pricing branch: 0 floor, 1 interior, 2 ceiling."""
    p = np.asarray(demand.best_price(w))
    out = np.ones(p.shape, dtype=np.int64)
    out[np.abs(p - demand.p_min) <= 1e-9] = 0
    out[np.abs(p - demand.p_max) <= 1e-9] = 2
    return out


def ode_residual(fragment: WFragment):
    """Check the stored curve against the band equation by finite differences.

    Returns ``(residual, mask)`` over the fragment grid. The derivative is
    re-estimated with the 4th-order central stencil and compared to the
    equation's right-hand side. Stencils are masked out where the stencil's
    smoothness assumption fails: across z = 0 (holding-cost kink), across a
    pricing-branch switch, within the asymptotic entry layer at the far
    right (the anchor transient decays like exp(-2 mu z / sigma^2)), and at
    the two edge points on each side.
    """
    params = fragment.params
    if params is None:
        raise ValueError("fragment has no model attached")
    g, w, d = fragment.grid, fragment.w, fragment.spacing
    n = w.size
    residual = np.full(n, np.nan)
    mask = np.zeros(n, dtype=bool)
    if n < 5:
        return residual, mask

    wp = (w[:-4] - 8.0 * w[1:-3] + 8.0 * w[3:-1] - w[4:]) / (12.0 * d)
    inner = slice(2, n - 2)
    residual[inner] = (
        0.5 * params.sigma**2 * wp
        + params.demand.pi(w[inner])
        - params.cost.holding(g[inner])
        - fragment.gamma
    )

    ok = np.ones(n - 4, dtype=bool)
    cls = _branch_classes(params.demand, w)
    center = cls[2 : n - 2]
    for off in range(5):
        ok &= cls[off : n - 4 + off] == center
    # origin inside the stencil (inclusive: the kink may sit on a node)
    ok &= ~((g[: n - 4] <= 1e-12) & (g[4:] >= -1e-12))
    # asymptotic entry layer: anchor transient decays at rate
    # 2 mu(p_max) / sigma^2 going left, so a few e-foldings suffice
    mu_min = params.demand.rate(params.demand.p_max)
    layer = 5.0 * params.sigma**2 / mu_min
    ok &= g[2 : n - 2] <= fragment.z_max - layer

    mask[inner] = ok
    return residual, mask


def find_reorder_levels(fragment: WFragment, k: Optional[float] = None):
    """Locate (s, S, z_star) on a fragment: the k-crossings and the peak.

    The peak is the zero of the stored slope, refined on the Hermite
    interpolant; the crossings are refined on shape-preserving monotone
    interpolants of each branch. Raises NoBand when max w <= k.
    """
    if k is None:
        if fragment.params is None:
            raise ValueError("pass k explicitly for detached fragments")
        k = fragment.params.k
    w, g = fragment.w, fragment.grid
    imax = int(np.argmax(w))
    if w[imax] <= k:
        raise NoBand("the marginal-value curve never rises above k")

    spline = fragment.interpolant()
    params = fragment.params

    # peak: bracket the sign change of w' around the discrete argmax
    wp = fragment.w_prime
    if wp[imax] > 0.0:
        j = imax
        while j + 1 < wp.size and wp[j + 1] > 0.0:
            j += 1
        if j + 1 >= wp.size:
            raise OutOfRange("the peak of w lies beyond the fragment's right end")
        lo_i, hi_i = j, j + 1
    else:
        j = imax
        while j - 1 >= 0 and wp[j - 1] <= 0.0:
            j -= 1
        if j - 1 < 0:
            raise OutOfRange("the peak of w lies beyond the fragment's left end")
        lo_i, hi_i = j - 1, j

    if params is not None:

        def slope(z):
            return (
                fragment.gamma
                + params.cost.holding(z)
                - params.demand.pi(float(spline(z)))
            )

    else:

        def slope(z):
            return float(spline.derivative()(z))

    z_star = float(
        brentq(slope, g[lo_i], g[hi_i], xtol=_ROOT_XTOL, maxiter=200)
    )

    def _crossing(i_below, i_above):
        lo = min(i_below, i_above)
        hi = max(i_below, i_above)
        a = max(lo - 2, 0)
        b = min(hi + 3, w.size)
        pch = PchipInterpolator(g[a:b], w[a:b])
        return float(
            brentq(lambda z: pch(z) - k, g[lo], g[hi], xtol=_ROOT_XTOL, maxiter=200)
        )

    i = imax
    while i >= 0 and w[i] > k:
        i -= 1
    if i < 0:
        raise OutOfRange("the band's lower edge is not inside the fragment")
    s = _crossing(i, i + 1)

    i = imax
    while i < w.size and w[i] > k:
        i += 1
    if i >= w.size:
        raise OutOfRange("the band's upper edge is not inside the fragment")
    S = _crossing(i, i - 1)

    return s, S, z_star


def _simpson_fine(fn: Callable, a: float, b: float, n: int = 8) -> float:
    if b <= a:
        return 0.0
    x = np.linspace(a, b, n + 1)
    return float(simpson(fn(x), x=x))


def band_area(fragment: WFragment, s: float, S: float, k: float) -> float:
    """Integral of (w - k) over [s, S] on the fragment.

    Composite Simpson on the uniform grid portion plus interpolant-based
    end corrections; the -k part is handled in closed form. Degenerate
    bands (s == S) have zero area.
    """
    g = fragment.grid
    if not (math.isfinite(s) and math.isfinite(S)):
        raise OutOfRange("band edges must be finite")
    if S < s:
        raise OutOfRange("band edges out of order (S < s)")
    eps = 1e-9
    if s < g[0] - eps or S > g[-1] + eps:
        raise OutOfRange("band [s, S] extends outside the fragment")
    if S - s <= 0.0:
        return 0.0

    d = fragment.spacing
    spline = fragment.interpolant()
    i0 = int(math.ceil((s - g[0]) / d - 1e-12))
    i1 = int(math.floor((S - g[0]) / d + 1e-12))
    i1 = min(i1, g.size - 1)
    i0 = max(i0, 0)

    if i0 > i1:
        # both edges inside a single cell
        area_w = _simpson_fine(spline, s, S)
    else:
        area_w = _simpson_fine(spline, s, g[i0]) + _simpson_fine(spline, g[i1], S)
        if i1 > i0:
            area_w += float(simpson(fragment.w[i0 : i1 + 1], dx=d))
    return area_w - k * (S - s)


# ---------------------------------------------------------------------------
# profit-rate search


def _auto_z_max(params: ModelParams, opts: SolverOptions, gamma_guess: float) -> float:
    """Smallest grid point with h(z) >= factor * (|gamma_guess| + 1)."""
    target = opts.z_max_factor * (abs(gamma_guess) + 1.0)
    h = params.cost.holding
    d = opts.grid_spacing
    hi = 1.0
    while h(hi) < target:
        hi *= 2.0
        if hi > 1e12:
            raise RootBracketFailure("holding cost never reaches the z_max target")
    if h(d) >= target:
        return d
    z_r = brentq(lambda z: h(z) - target, d, hi, xtol=1e-12, maxiter=200)
    # Slack of 1e-6 cells absorbs root-finder noise so an exact-grid root
    # (h(z)=target at a node) does not round one cell up.
    return d * math.ceil(z_r / d - 1e-6)


def _solve_gamma_at(
    params: ModelParams,
    opts: SolverOptions,
    z_max: float,
    kappa: float,
    area_of_gamma: Callable[[float, float], float],
):
    """Root-find gamma so the band area matches K at a fixed truncation.

    ``area_of_gamma(gamma, z_max)`` returns band area minus K. The root is
    bracketed by [doubling below -(K+1), kappa]; the area gap is strictly
    decreasing in gamma, positive for very low gamma and negative at the
    revenue ceiling where no band exists.
    """
    hi = kappa
    f_hi = area_of_gamma(hi, z_max)
    if f_hi > 0.0:
        raise NoSolution(
            "band area exceeds K at the maximum revenue rate; the model "
            "admits no finite profit rate"
        )
    lo = -(params.K + 1.0)
    f_lo = area_of_gamma(lo, z_max)
    tries = 0
    while f_lo <= 0.0:
        lo = 2.0 * lo - 1.0
        f_lo = area_of_gamma(lo, z_max)
        tries += 1
        if tries > 60:
            raise NoSolution(
                "could not bracket the profit rate: band area stays below K "
                f"down to gamma = {lo:.3g}"
            )
    return float(
        brentq(
            lambda gm: area_of_gamma(gm, z_max),
            lo,
            hi,
            xtol=opts.gamma_tol,
            maxiter=200,
        )
    )


def _certified_gamma(params, opts, kappa, area_of_gamma, z_min=0.0):
    """Apply the truncation rule, then double z_max until gamma settles."""
    if opts.z_max is not None:
        z = float(opts.z_max)
        return _solve_gamma_at(params, opts, z, kappa, area_of_gamma), z

    z = max(_auto_z_max(params, opts, 0.0), z_min)
    z = opts.grid_spacing * math.ceil(z / opts.grid_spacing - 1e-12)
    gamma = _solve_gamma_at(params, opts, z, kappa, area_of_gamma)
    for _ in range(40):
        z2 = 2.0 * z
        gamma2 = _solve_gamma_at(params, opts, z2, kappa, area_of_gamma)
        z = z2
        moved = abs(gamma2 - gamma)
        gamma = gamma2
        if moved < opts.z_max_gamma_tol:
            return gamma, z
    raise NoSolution("gamma did not settle under repeated z_max doubling")


def solve_optimal(
    params: ModelParams, opts: Optional[SolverOptions] = None
) -> WSolution:
    """Solve for the optimal band: gamma*, (s*, S*), z* and the w curve."""
    opts = opts or SolverOptions()
    kappa = params.demand.max_revenue_rate()
    k = params.k

    def area_gap(gamma: float, z_max: float) -> float:
        frag = integrate_w(
            params, gamma, z_max, -z_max, opts=opts, stop_at_band_exit=True
        )
        try:
            s, S, _ = find_reorder_levels(frag, k)
        except NoBand:
            return -params.K
        return band_area(frag, s, S, k) - params.K

    gamma, z_used = _certified_gamma(params, opts, kappa, area_gap)

    frag = integrate_w(
        params, gamma, z_used, -z_used, opts=opts, stop_at_band_exit=True
    )
    s, S, z_star = find_reorder_levels(frag, k)
    residual, rmask = ode_residual(frag)
    res_max = float(np.max(np.abs(residual[rmask]))) if rmask.any() else float("nan")

    sol = WSolution(
        grid=frag.grid,
        w=frag.w,
        w_prime=frag.w_prime,
        gamma=gamma,
        s=s,
        S=S,
        z_star=z_star,
        residual_max=res_max,
        z_max_used=z_used,
        params=params,
        spacing=frag.spacing,
    )
    _validate_solution(sol, frag, opts)
    return sol


def _validate_solution(sol: WSolution, frag: WFragment, opts: SolverOptions):
    problems = []
    if not (sol.s < sol.z_star < sol.S):
        problems.append(
            f"peak ordering violated: s={sol.s:.6g}, z*={sol.z_star:.6g}, "
            f"S={sol.S:.6g}"
        )
    if sol.z_star > 1e-9:
        problems.append(f"peak should sit at or left of the origin, got {sol.z_star:.6g}")
    spline = frag.interpolant()
    bc = max(abs(float(spline(sol.s)) - sol.params.k), abs(float(spline(sol.S)) - sol.params.k))
    if bc > opts.tol_bc:
        problems.append(f"smooth-pasting error {bc:.3g} exceeds {opts.tol_bc:.3g}")
    area_err = abs(band_area(frag, sol.s, sol.S, sol.params.k) - sol.params.K)
    if area_err > opts.tol_bc * max(sol.params.K, 1.0):
        problems.append(f"band-area error {area_err:.3g} exceeds tolerance")
    dw = np.diff(sol.w)
    signs = np.sign(dw)
    signs = signs[signs != 0]
    flips = int(np.count_nonzero(np.diff(signs) != 0))
    if flips != 1:
        problems.append(f"w is not single-peaked on the grid ({flips} slope flips)")
    if not (sol.residual_max <= opts.tol_ode):
        problems.append(
            f"equation residual {sol.residual_max:.3g} exceeds {opts.tol_ode:.3g}"
        )
    if sol.S > sol.z_max_used - 1.0:
        problems.append(
            "the band's upper edge sits within one unit of the truncation; "
            "increase z_max"
        )
    if not (sol.w[-1] < sol.params.k - 1.0):
        problems.append(
            f"w at the truncation point is {sol.w[-1]:.6g}, not clearly below "
            f"the unit order cost; the tail limit is not resolved"
        )
    if problems:
        raise SolverError("; ".join(problems))


def solve_given_band(
    params: ModelParams, s: float, S: float, opts: Optional[SolverOptions] = None
):
    """Profit rate of the best pricing policy under an imposed band (s, S).

    Root-finds gamma so that the w-curve's area over k on [s, S] equals K,
    with the stop rule disabled and the left end pinned just below s.
    Returns ``(gamma, fragment)``.
    """
    opts = opts or SolverOptions()
    if not (math.isfinite(s) and math.isfinite(S) and s < S):
        raise ValueError("band edges must be finite with s < S")
    kappa = params.demand.max_revenue_rate()
    z_stop = s - 20.0 * opts.grid_spacing

    def area_gap(gamma: float, z_max: float) -> float:
        frag = integrate_w(
            params, gamma, z_max, z_stop, opts=opts, stop_at_band_exit=False
        )
        return band_area(frag, s, S, params.k) - params.K

    gamma, z_used = _certified_gamma(params, opts, kappa, area_gap, z_min=S + 2.0)
    frag = integrate_w(
        params, gamma, z_used, z_stop, opts=opts, stop_at_band_exit=False
    )
    return gamma, frag


# ---------------------------------------------------------------------------
# pricing profile


@dataclass(frozen=True)
class Segment:
    z_lo: float
    z_hi: float
    kind: str  # "floor", "interior" or "ceiling"


@dataclass(frozen=True)
class PriceProfile:
    z: np.ndarray
    w: np.ndarray
    price: np.ndarray
    segments: tuple
    breakpoints: tuple


_KIND_NAMES = {0: "floor", 1: "interior", 2: "ceiling"}


def price_profile(sol: WSolution) -> PriceProfile:
    """Optimal posted price over [s, z_max] with branch segmentation.

    Breakpoints between constant-price (clamped) and interior stretches
    are refined by root-finding w against the family's branch thresholds
    on the Hermite interpolant.
    """
    demand = sol.params.demand
    spline = sol.interpolant()

    sel = sol.grid > sol.s + 1e-12
    z = np.concatenate(([sol.s], sol.grid[sel]))
    w = np.concatenate(([float(spline(sol.s))], sol.w[sel]))
    price = np.asarray(demand.best_price(w), dtype=np.float64)
    cls = _branch_classes(demand, w)

    # run-length segments over the grid classification
    bounds = [0] + list(np.nonzero(np.diff(cls))[0] + 1) + [cls.size]
    segments = []
    breakpoints = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        lo = float(z[a]) if a == 0 else segments[-1].z_hi
        if b == cls.size:
            hi = float(z[-1])
        else:
            hi = _refine_breakpoint(demand, spline, z[b - 1], z[b], cls[b - 1], cls[b])
            breakpoints.append(hi)
        segments.append(Segment(z_lo=lo, z_hi=hi, kind=_KIND_NAMES[int(cls[a])]))

    return PriceProfile(
        z=z,
        w=w,
        price=price,
        segments=tuple(segments),
        breakpoints=tuple(breakpoints),
    )


def _refine_breakpoint(demand, spline, z_lo, z_hi, cls_lo, cls_hi):
    thresholds = demand._branch_thresholds()
    if thresholds is not None:
        # w is monotone within one cell away from the peak; pick the
        # threshold the cell actually crosses
        w_lo = float(spline(z_lo))
        w_hi = float(spline(z_hi))
        for t in thresholds:
            if min(w_lo, w_hi) - 1e-12 <= t <= max(w_lo, w_hi) + 1e-12:
                f = lambda zz: float(spline(zz)) - t
                if f(z_lo) == 0.0:
                    return z_lo
                if f(z_hi) == 0.0:
                    return z_hi
                if f(z_lo) * f(z_hi) < 0:
                    return float(brentq(f, z_lo, z_hi, xtol=_ROOT_XTOL))
    # fall back to bisection on the classification itself
    lo, hi = z_lo, z_hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        c = int(_branch_classes(demand, np.array([float(spline(mid))]))[0])
        if c == cls_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
