"""Estimator checks: config validation, bit-level determinism, accounting
identities, and a nearly deterministic sawtooth with a pencil-and-paper
profit rate.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from sspricing.errors import ConfigInvalid
from sspricing.policy import Policy
from sspricing.sim import SimConfig, estimate_profit, simulate, simulate_path


def _short_cfg(seed=7, **kw):
    base = dict(x0=0.0, horizon=20.0, dt=1e-3, burn_in=2.0, seed=seed, replications=4)
    base.update(kw)
    return SimConfig(**base)


# ---------------------------------------------------------------------------
# configuration


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dt=0.0),
        dict(dt=-1e-3),
        dict(dt=math.inf),
        dict(horizon=0.0),
        dict(horizon=-5.0),
        dict(burn_in=-1.0),
        dict(burn_in=1000.0),  # equal to the default horizon
        dict(horizon=10.0, burn_in=20.0),
        dict(replications=0),
        dict(x0=math.nan),
    ],
)
def test_config_rejects_bad_fields(kwargs):
    with pytest.raises(ConfigInvalid):
        SimConfig(**kwargs)


def test_step_counts_round_to_the_grid():
    cfg = SimConfig(horizon=2.0, dt=1e-3, burn_in=0.5)
    assert cfg.n_steps == 2000
    assert cfg.burn_steps == 500


# ---------------------------------------------------------------------------
# determinism


def test_same_seed_is_bit_identical(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    a = simulate(linear_params, pol, _short_cfg())
    b = simulate(linear_params, pol, _short_cfg())
    assert np.array_equal(a.rep_profits, b.rep_profits)
    assert a.avg_profit == b.avg_profit
    assert a.stderr == b.stderr
    assert a.min_level_observed == b.min_level_observed
    assert a.order_count_rate == b.order_count_rate


def test_seed_changes_the_draws(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    a = simulate(linear_params, pol, _short_cfg(seed=7))
    b = simulate(linear_params, pol, _short_cfg(seed=8))
    assert not np.array_equal(a.rep_profits, b.rep_profits)


def test_replications_use_independent_keyed_streams(linear_params, linear_solution):
    # streams are keyed by (seed, replication), so a 2-rep run must
    # reproduce the first two entries of a 4-rep run bit for bit
    pol = Policy.from_solution(linear_solution)
    small = simulate(linear_params, pol, _short_cfg(replications=2))
    large = simulate(linear_params, pol, _short_cfg(replications=4))
    assert np.array_equal(small.rep_profits, large.rep_profits[:2])


# ---------------------------------------------------------------------------
# accounting


def test_profit_decomposition_is_exact(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    r = simulate(linear_params, pol, _short_cfg())
    assert r.avg_profit == r.revenue_rate - r.holding_rate - r.ordering_rate
    assert math.isclose(float(np.mean(r.rep_profits)), r.avg_profit, rel_tol=1e-12)
    n = r.rep_profits.size
    assert r.stderr == float(np.std(r.rep_profits, ddof=1) / math.sqrt(n))
    lo, hi = r.ci95
    assert lo == r.avg_profit - 1.96 * r.stderr
    assert hi == r.avg_profit + 1.96 * r.stderr


def test_rates_are_plausible_for_the_default_fixture(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    r = simulate(linear_params, pol, _short_cfg())
    # band width ~3 against drift in [4, 8]: a couple of orders per unit time
    assert 0.5 < r.order_count_rate < 5.0
    assert r.revenue_rate > r.holding_rate + r.ordering_rate
    assert r.clamp_count == 0


def test_single_replication_reports_zero_stderr(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    r = simulate(linear_params, pol, _short_cfg(replications=1, horizon=5.0, burn_in=0.5))
    assert r.stderr == 0.0
    assert r.rep_profits.shape == (1,)


def test_burn_in_discards_the_transient(linear_params, linear_solution):
    # start far above the band: the descent's holding cost must be
    # excluded once the burn window covers it (same seed, same path)
    pol = Policy.from_solution(linear_solution)
    cold = simulate(linear_params, pol, _short_cfg(x0=10.0, horizon=10.0, burn_in=0.0))
    warm = simulate(linear_params, pol, _short_cfg(x0=10.0, horizon=10.0, burn_in=5.0))
    assert warm.holding_rate < cold.holding_rate


def test_levels_stay_within_one_step_of_the_reorder_point(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    cfg = _short_cfg(seed=11, horizon=50.0, burn_in=0.0)
    r = simulate(linear_params, pol, cfg)
    # one Euler step below s before the order triggers; 7 sigmas covers
    # 200k draws with probability ~1e-6 of a false alarm
    mu_max = linear_params.demand.rate(linear_params.demand.p_min)
    slack = mu_max * cfg.dt + 7.0 * linear_params.sigma * math.sqrt(cfg.dt)
    assert r.min_level_observed >= pol.s - slack
    assert r.min_level_observed < pol.S


# ---------------------------------------------------------------------------
# closed-form cross-check


def test_nearly_deterministic_sawtooth_matches_hand_computation(linear_params):
    # with sigma ~ 0 and a constant price of 5 the level is a sawtooth
    # from 3 down to -1 at slope -mu(5) = -5; per unit time:
    #   revenue  5 * 5                          = 25
    #   holding  (1/(S-s)) * int_{-1}^{3} z^2 dz = 7/3
    #   ordering (K + k (S-s)) / ((S-s)/5)       = 6.25
    params = replace(linear_params, sigma=0.01)
    pol = Policy.constant(s=-1.0, S=3.0, price=5.0, demand=params.demand)
    cfg = SimConfig(x0=3.0, horizon=200.0, dt=1e-3, burn_in=20.0, seed=3, replications=8)
    r = simulate(params, pol, cfg)
    expected = 25.0 - 7.0 / 3.0 - 6.25
    assert abs(r.avg_profit - expected) / expected < 0.01


def test_revenue_noise_is_mean_neutral(linear_params, linear_solution):
    # the dW revenue term rides on the same draws, so the level path and
    # hence holding and ordering are bit-identical; only revenue moves,
    # and only by martingale noise
    pol = Policy.from_solution(linear_solution)
    base = dict(horizon=50.0, dt=1e-3, burn_in=5.0, seed=99, replications=4)
    quiet = simulate(linear_params, pol, SimConfig(**base))
    noisy = simulate(linear_params, pol, SimConfig(**base, revenue_noise=True))
    assert noisy.holding_rate == quiet.holding_rate
    assert noisy.ordering_rate == quiet.ordering_rate
    assert noisy.revenue_rate != quiet.revenue_rate
    gap = abs(noisy.avg_profit - quiet.avg_profit)
    assert gap < 2.0 * (noisy.stderr + quiet.stderr)


# ---------------------------------------------------------------------------
# one-call wrapper


def test_estimate_profit_applies_overrides(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    r = estimate_profit(linear_params, pol, horizon=10.0, burn_in=1.0, replications=3, seed=5)
    assert r.rep_profits.shape == (3,)
    base = SimConfig(horizon=10.0, burn_in=1.0, replications=4, seed=5)
    r2 = estimate_profit(linear_params, pol, base, replications=2)
    assert r2.rep_profits.shape == (2,)
    assert np.array_equal(r2.rep_profits, r.rep_profits[:2])


def test_estimate_profit_needs_two_replications(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    with pytest.raises(ConfigInvalid):
        estimate_profit(linear_params, pol, horizon=10.0, burn_in=1.0, replications=1)


# ---------------------------------------------------------------------------
# trajectories


def test_trajectory_layout_and_accounting(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    cfg = SimConfig(x0=1.0, horizon=5.0, dt=1e-3, burn_in=0.0, seed=21, replications=1)
    t, z, p, rev, hold, order = simulate_path(linear_params, pol, cfg)
    n = cfg.n_steps
    assert all(arr.shape == (n,) for arr in (t, z, p, rev, hold, order))
    assert t[0] == pytest.approx(cfg.dt)
    assert t[-1] == pytest.approx(cfg.horizon)
    assert np.all(np.diff(t) > 0)
    # recorded levels are post-order, so never at or below s
    assert np.all(z > pol.s)
    assert np.all(np.diff(rev) >= 0)
    assert np.all(np.diff(hold) >= 0)
    assert np.all(np.diff(order) >= 0)
    jumps = np.flatnonzero(np.diff(order) > 0) + 1
    assert jumps.size >= 1
    assert np.all(z[jumps] == pol.S)
    np.testing.assert_allclose(p[jumps], pol.price_at(pol.S), atol=1e-9)
    # each order pays the fixed cost plus at least a band's worth of units
    min_charge = linear_params.K + linear_params.k * (pol.S - pol.s)
    assert np.all(np.diff(order)[jumps - 1] >= min_charge - 1e-12)
    assert np.all((p >= linear_params.demand.p_min) & (p <= linear_params.demand.p_max))


def test_trajectory_with_constant_price(linear_params):
    pol = Policy.constant(s=-1.0, S=2.0, price=5.0, demand=linear_params.demand)
    cfg = SimConfig(x0=0.0, horizon=2.0, dt=1e-3, burn_in=0.0, seed=4, replications=1)
    _, _, p, _, _, _ = simulate_path(linear_params, pol, cfg)
    assert np.all(p == 5.0)


def test_trajectory_step_cap(linear_params, linear_solution):
    pol = Policy.from_solution(linear_solution)
    with pytest.raises(ConfigInvalid):
        simulate_path(linear_params, pol, SimConfig(horizon=3000.0, dt=1e-3))
