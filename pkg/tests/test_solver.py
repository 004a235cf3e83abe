"""Band solver: backward integration, band geometry, profit-rate search.

Regression values are frozen from converged solves and cross-validated
elsewhere by the chain-approximation oracle, the Monte-Carlo estimate
and the candidate-optimality verifier; local checks here use
independent quadrature and finite differences.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from sspricing import (
    CustomDemand,
    LinearDemand,
    ModelParams,
    QuadraticCost,
    SolverOptions,
    WFragment,
    asymptotic_init,
    band_area,
    find_reorder_levels,
    integrate_w,
    ode_residual,
    price_profile,
    solve_given_band,
    solve_optimal,
)
from sspricing import _kernels
from sspricing.errors import ModelInvalid, NoBand, OutOfRange

# converged reference values for the two standard fixtures
LIN_GAMMA = 18.02149387425761
LIN_S_LO = -1.6005306804748696
LIN_S_HI = 1.3786373544990114
LIN_Z_STAR = -0.11747043198061763
HYP_GAMMA = 0.46024802421970434
HYP_S_LO = -1.5661106096691855
HYP_S_HI = -0.01407363621634787
HYP_Z_STAR = -0.8453738472482576


# ---------------------------------------------------------------------------
# parameter validation


def test_model_params_validation(linear_params):
    demand, cost = linear_params.demand, linear_params.cost
    with pytest.raises(ModelInvalid):
        ModelParams(demand=demand, cost=cost, sigma=0.0)
    with pytest.raises(ModelInvalid):
        ModelParams(demand=demand, cost=cost, K=0.0)
    with pytest.raises(ModelInvalid):
        ModelParams(demand=demand, cost=cost, k=0.0)
    with pytest.raises(ModelInvalid):
        ModelParams(demand=demand, cost=cost, k=-1.0)
    with pytest.raises(ModelInvalid):
        ModelParams(demand="linear", cost=cost)


def test_unit_cost_above_price_ceiling_warns(linear_params):
    with pytest.warns(UserWarning):
        ModelParams(demand=linear_params.demand, cost=linear_params.cost, k=7.0)


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(grid_spacing=0.0)
    with pytest.raises(ValueError):
        SolverOptions(stop_offset=-0.1)


# ---------------------------------------------------------------------------
# asymptotic anchor


def test_asymptotic_anchor_closed_forms(linear_params, hyperbolic_params):
    # linear family, price floored: mu(p_min) (p_min - w) = h(z) gives
    # w = p_min - h / mu(p_min); at h = 100: 2 - 100/8 = -10.5
    assert asymptotic_init(linear_params, 0.0, 10.0) == pytest.approx(-10.5, abs=1e-9)
    # at h = 25 the anchor sits exactly at the revenue-ceiling root w = 0
    assert asymptotic_init(linear_params, 0.0, 5.0) == pytest.approx(0.0, abs=1e-9)
    # hyperbolic, price floored: mu(p_min) = 1, so 1 - w = h gives w = -2
    assert asymptotic_init(hyperbolic_params, 0.0, math.sqrt(3.0)) == pytest.approx(
        -2.0, abs=1e-9
    )


def test_asymptotic_anchor_solves_its_equation(linear_params):
    for gamma, z_max in [(0.0, 7.0), (18.0, 20.0), (-3.0, 12.0)]:
        w0 = asymptotic_init(linear_params, gamma, z_max)
        target = gamma + linear_params.cost.holding(z_max)
        assert linear_params.demand.pi(w0) == pytest.approx(target, rel=1e-10)


# ---------------------------------------------------------------------------
# backward integration


def test_integration_grid_is_anchored_at_zero(linear_params):
    frag = integrate_w(linear_params, 18.0, 5.0, -2.0)
    d = frag.spacing
    steps = frag.grid / d
    assert np.allclose(steps, np.round(steps), atol=1e-9)
    assert frag.grid[-1] == pytest.approx(5.0, abs=1e-12)
    assert np.any(frag.grid == 0.0)
    assert frag.w.shape == frag.grid.shape == frag.w_prime.shape


def test_stored_slope_satisfies_the_band_equation(linear_params):
    frag = integrate_w(linear_params, 18.0, 5.0, -2.0)
    rhs = (
        2.0
        / linear_params.sigma**2
        * (
            frag.gamma
            + linear_params.cost.holding(frag.grid)
            - np.asarray(linear_params.demand.pi(frag.w))
        )
    )
    assert np.max(np.abs(frag.w_prime - rhs)) < 1e-9


def test_interpolant_passes_through_nodes(linear_params):
    frag = integrate_w(linear_params, 18.0, 5.0, -2.0)
    assert np.max(np.abs(frag.interpolant()(frag.grid) - frag.w)) < 1e-12


def test_stop_rule_halts_just_below_the_band(linear_params):
    frag = integrate_w(
        linear_params, LIN_GAMMA, 20.0, -5.0, stop_at_band_exit=True
    )
    k, off = linear_params.k, SolverOptions().stop_offset
    assert frag.stopped_early
    assert frag.grid[0] > -5.0
    # first stored node is the first grid point below the stop level
    assert frag.w[0] < k - off
    assert frag.w[1] >= k - off
    assert frag.grid[0] < LIN_S_LO


def test_no_stop_runs_to_the_requested_end(linear_params):
    frag = integrate_w(linear_params, LIN_GAMMA, 20.0, -3.0, stop_at_band_exit=False)
    assert not frag.stopped_early
    assert frag.grid[0] == pytest.approx(-3.0, abs=1e-12)


def test_custom_callables_match_the_compiled_route(linear_params):
    custom = ModelParams(
        demand=CustomDemand(
            rate=lambda p: 10.0 - p,
            rate_derivative=lambda p: -1.0,
            p_min=2.0,
            p_max=6.0,
        ),
        cost=QuadraticCost(),
        sigma=1.0,
        K=1.0,
        k=1.0,
    )
    opts = SolverOptions(grid_spacing=1.0 / 50.0)
    fa = integrate_w(linear_params, 18.0, 6.0, -3.0, opts=opts)
    fb = integrate_w(custom, 18.0, 6.0, -3.0, opts=opts)
    assert np.max(np.abs(fa.w - fb.w)) < 1e-9


def test_runaway_curve_reports_blowup():
    # cubic payoff feedback: dw/dz = -2 w^3 going left diverges at a
    # finite level, 1/16 below the start for w0 = 2
    from sspricing.errors import BlowUp

    d = 1.0 / 400.0
    n = 400 - (-4000)
    w_out = np.empty(n + 1)
    f_out = np.empty(n + 1)
    dummy = np.zeros(1)
    status, _, z_fail = _kernels.integrate_cells(
        400, -4000, d, 2.0, 0.0, 1.0, -1e30, False, 1e-13, 1e-13,
        lambda w, _d: w**3, dummy, lambda z, _c: 0.0, dummy, w_out, f_out,
    )
    assert status == 2
    assert z_fail == pytest.approx(1.0 - 1.0 / 16.0, abs=1e-3)
    with pytest.raises(BlowUp):
        raise BlowUp("runaway", z_reached=z_fail)


def test_discontinuous_forcing_reports_step_underflow():
    # a jump strictly inside a cell defeats the error control
    d = 1.0 / 400.0
    n = 400 - (-400)
    w_out = np.empty(n + 1)
    f_out = np.empty(n + 1)
    dummy = np.zeros(1)
    status, _, z_fail = _kernels.integrate_cells(
        400, -400, d, 0.0, 0.0, 1.0, -1e30, False, 1e-13, 1e-13,
        lambda w, _d: 0.0, dummy,
        lambda z, _c: 1e8 if z < 0.50125 else 0.0, dummy, w_out, f_out,
    )
    assert status == 3
    assert z_fail == pytest.approx(0.50125, abs=2 * d)


# ---------------------------------------------------------------------------
# band geometry


def test_band_area_of_synthetic_rectangle():
    grid = np.linspace(-1.0, 3.0, 1601)
    frag = WFragment(
        grid=grid,
        w=np.full(grid.shape, 2.0),
        w_prime=np.zeros(grid.shape),
        gamma=0.0,
        spacing=grid[1] - grid[0],
        z_max=3.0,
        stopped_early=False,
    )
    assert band_area(frag, 0.0, 2.0, 1.0) == pytest.approx(2.0, abs=1e-12)
    assert band_area(frag, 0.5, 0.5, 1.0) == 0.0
    # off-grid edges exercise the partial-cell corrections
    assert band_area(frag, 0.1001, 1.9003, 1.0) == pytest.approx(
        1.8002, abs=1e-10
    )


def test_band_area_matches_adaptive_quadrature(linear_solution):
    frag = linear_solution.fragment()
    spline = frag.interpolant()
    k = linear_solution.params.k
    s, S = linear_solution.s, linear_solution.S
    ref, err = quad(lambda z: float(spline(z)) - k, s, S, limit=200)
    assert err < 1e-10
    assert band_area(frag, s, S, k) == pytest.approx(ref, abs=1e-9)


def test_band_area_rejects_edges_outside_the_fragment(linear_params):
    frag = integrate_w(linear_params, 18.0, 5.0, -1.0)
    with pytest.raises(OutOfRange):
        band_area(frag, -2.0, 1.0, 1.0)
    with pytest.raises(OutOfRange):
        band_area(frag, 1.0, 0.0, 1.0)


def test_reorder_levels_on_the_solved_curve(linear_solution):
    frag = linear_solution.fragment()
    s, S, z_star = find_reorder_levels(frag)
    spline = frag.interpolant()
    k = linear_solution.params.k
    assert spline(s) == pytest.approx(k, abs=1e-9)
    assert spline(S) == pytest.approx(k, abs=1e-9)
    assert s < z_star < S
    # the peak is a genuine stationary point of the interpolant
    assert float(spline.derivative()(z_star)) == pytest.approx(0.0, abs=1e-7)


def test_no_band_when_profit_target_is_near_the_revenue_ceiling(linear_params):
    frag = integrate_w(linear_params, 24.9, 20.0, -3.0)
    assert frag.w.max() < linear_params.k
    with pytest.raises(NoBand):
        find_reorder_levels(frag)


def test_residual_mask_and_magnitude(linear_solution):
    residual, mask = ode_residual(linear_solution.fragment())
    assert mask.any()
    # interior nodes dominate the mask; only kink/entry neighborhoods drop
    assert np.count_nonzero(mask) > 0.8 * mask.size
    assert np.nanmax(np.abs(residual[mask])) == pytest.approx(
        linear_solution.residual_max, rel=1e-9
    )
    assert linear_solution.residual_max < 1e-8


# ---------------------------------------------------------------------------
# the solved fixtures


def test_default_fixture_reference_solution(linear_solution):
    sol = linear_solution
    assert sol.gamma == pytest.approx(LIN_GAMMA, rel=1e-9)
    assert sol.s == pytest.approx(LIN_S_LO, rel=1e-8)
    assert sol.S == pytest.approx(LIN_S_HI, rel=1e-8)
    assert sol.z_star == pytest.approx(LIN_Z_STAR, rel=1e-6)
    assert sol.z_max_used == 20.0
    assert sol.gamma < sol.params.demand.max_revenue_rate()


def test_hyperbolic_fixture_reference_solution(hyperbolic_solution):
    sol = hyperbolic_solution
    assert sol.gamma == pytest.approx(HYP_GAMMA, rel=1e-9)
    assert sol.s == pytest.approx(HYP_S_LO, rel=1e-8)
    assert sol.S == pytest.approx(HYP_S_HI, rel=1e-6)
    assert sol.z_star == pytest.approx(HYP_Z_STAR, rel=1e-6)
    assert sol.gamma < sol.params.demand.max_revenue_rate()


def test_smooth_pasting_and_area_conditions(linear_solution, hyperbolic_solution):
    for sol in (linear_solution, hyperbolic_solution):
        spline = sol.interpolant()
        k, K = sol.params.k, sol.params.K
        assert abs(float(spline(sol.s)) - k) < 1e-6
        assert abs(float(spline(sol.S)) - k) < 1e-6
        assert abs(band_area(sol.fragment(), sol.s, sol.S, k) - K) < 1e-6 * K


def test_solution_shape_invariants(linear_solution, hyperbolic_solution):
    for sol in (linear_solution, hyperbolic_solution):
        assert sol.z_star <= 1e-9
        assert sol.s < sol.z_star < sol.S
        dw = np.diff(sol.w)
        signs = np.sign(dw)
        signs = signs[signs != 0]
        assert np.count_nonzero(np.diff(signs) != 0) == 1
        # the tail is resolved well below the reorder value
        assert sol.w[-1] < sol.params.k - 1.0


def test_explicit_truncation_is_honored(linear_params):
    sol = solve_optimal(linear_params, SolverOptions(z_max=25.0))
    assert sol.z_max_used == pytest.approx(25.0, abs=1e-12)
    assert sol.gamma == pytest.approx(LIN_GAMMA, abs=1e-8)


def test_hyperbolic_marginal_value_crosses_the_switch_level_once(
    hyperbolic_solution,
):
    # above the band the curve must fall through -lam0 exactly once
    sol = hyperbolic_solution
    lam0 = sol.params.demand.lam0
    right = sol.grid > sol.S
    shifted = sol.w[right] + lam0
    crossings = np.count_nonzero(np.diff(np.sign(shifted)) != 0)
    assert crossings == 1


# ---------------------------------------------------------------------------
# profit rate of an imposed band


def test_given_band_consistency_at_the_optimum(linear_solution):
    gamma, frag = solve_given_band(
        linear_solution.params, linear_solution.s, linear_solution.S
    )
    assert gamma == pytest.approx(linear_solution.gamma, abs=1e-6)
    k = linear_solution.params.k
    assert band_area(frag, linear_solution.s, linear_solution.S, k) == pytest.approx(
        linear_solution.params.K, abs=1e-9
    )


def test_given_band_rejects_degenerate_bands(linear_params):
    with pytest.raises(ValueError):
        solve_given_band(linear_params, 1.0, 1.0)
    with pytest.raises(ValueError):
        solve_given_band(linear_params, 2.0, 1.0)


def test_perturbed_bands_never_beat_the_optimum(linear_solution):
    sol = linear_solution
    for ds, dS in [(-0.25, 0.0), (0.0, 0.25)]:
        gamma, _ = solve_given_band(sol.params, sol.s + ds, sol.S + dS)
        assert gamma <= sol.gamma + 1e-8


# ---------------------------------------------------------------------------
# price profile


def test_price_profile_of_the_default_fixture(linear_solution):
    prof = price_profile(linear_solution)
    assert prof.z[0] == pytest.approx(linear_solution.s, abs=1e-12)
    kinds = [seg.kind for seg in prof.segments]
    assert kinds == ["interior", "floor"]
    assert len(prof.breakpoints) == 1
    assert prof.breakpoints[0] > linear_solution.S
    # interior prices follow the vertex rule (A + w) / 2
    demand = linear_solution.params.demand
    inner = prof.z < prof.breakpoints[0] - 0.01
    assert np.allclose(
        prof.price[inner], 0.5 * (demand.A + prof.w[inner]), atol=1e-9
    )


def test_price_profile_of_the_hyperbolic_fixture(hyperbolic_solution):
    prof = price_profile(hyperbolic_solution)
    kinds = [seg.kind for seg in prof.segments]
    assert kinds == ["ceiling", "floor"]
    assert len(prof.breakpoints) == 1
    z_p = prof.breakpoints[0]
    assert z_p > hyperbolic_solution.S
    # the switch happens where w crosses -lam0
    spline = hyperbolic_solution.interpolant()
    lam0 = hyperbolic_solution.params.demand.lam0
    assert float(spline(z_p)) == pytest.approx(-lam0, abs=1e-8)


def test_price_profile_is_unimodal_in_the_level(linear_solution, hyperbolic_solution):
    for sol in (linear_solution, hyperbolic_solution):
        prof = price_profile(sol)
        z_star = sol.z_star
        up = prof.z <= z_star
        down = prof.z >= z_star
        assert np.all(np.diff(prof.price[up]) >= -1e-9)
        assert np.all(np.diff(prof.price[down]) <= 1e-9)


def test_five_segment_regime(narrow_linear_solution):
    sol = narrow_linear_solution
    demand = sol.params.demand
    spline = sol.interpolant()
    # regime gates, established after the solve
    assert float(spline(sol.z_star)) > 2.0 * demand.p_max - demand.A
    assert sol.params.k < 2.0 * demand.p_min - demand.A

    prof = price_profile(sol)
    kinds = [seg.kind for seg in prof.segments]
    assert kinds == ["floor", "interior", "ceiling", "interior", "floor"]
    b = prof.breakpoints
    assert len(b) == 4
    assert sol.s < b[0] < b[1] < sol.z_star < b[2] < b[3] < sol.S
