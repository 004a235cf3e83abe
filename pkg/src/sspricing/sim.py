"""Euler-scheme profit estimation for band policies.

Each step applies the order rule, posts a price at the post-order level,
accrues revenue and holding cost for the elapsed dt, then advances the
level by the drift and a Brownian increment. Replications use
counter-based streams keyed by (seed, replication), drawn in fixed-size
chunks so results are bit-reproducible regardless of how the chunks are
scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigInvalid
from .policy import Policy
from .solver import ModelParams

_CHUNK = 1 << 18  # per-draw block size; part of the reproducibility contract

# accumulator slots
_REV, _HOLD, _ORD, _NORD, _MINZ, _CLAMP, _RREV, _RHOLD, _RORD = range(9)


@dataclass(frozen=True)
class SimConfig:
    x0: float = 0.0
    horizon: float = 1000.0
    dt: float = 1e-3
    burn_in: float = 100.0
    seed: int = 12345
    replications: int = 32
    revenue_noise: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigInvalid("dt must be positive")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigInvalid("horizon must be positive")
        if not (0 <= self.burn_in < self.horizon):
            raise ConfigInvalid("burn_in must lie in [0, horizon)")
        if self.replications < 1:
            raise ConfigInvalid("need at least one replication")
        if not math.isfinite(self.x0):
            raise ConfigInvalid("x0 must be finite")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))


@dataclass(frozen=True)
class SimResult:
    avg_profit: float
    stderr: float
    revenue_rate: float
    holding_rate: float
    ordering_rate: float
    order_count_rate: float
    min_level_observed: float
    clamp_count: int
    rep_profits: np.ndarray

    @property
    def ci95(self):
        half = 1.96 * self.stderr
        return self.avg_profit - half, self.avg_profit + half


def _policy_kernel_args(policy: Policy, params: ModelParams):
    demand = policy.demand if policy.demand is not None else params.demand
    dp = demand._kernel_params()
    hp = params.cost._kernel_params()
    compiled = dp is not None and hp is not None and _kernels.NUMBA_OK

    if policy.constant_price is not None:
        price_mode = 0
        const_price = float(policy.constant_price)
        zg0, inv_d, n_tab = 0.0, 1.0, 2
        w_tab = np.zeros(2)
    else:
        price_mode = 1
        const_price = 0.0
        zg0 = float(policy.z_grid[0])
        spacing = float(policy.z_grid[1] - policy.z_grid[0])
        inv_d = 1.0 / spacing
        n_tab = int(policy.z_grid.size)
        w_tab = np.ascontiguousarray(policy.w_table, dtype=np.float64)

    if compiled:
        chunk_fn = _kernels.sim_chunk_jit
        bp_fn = _kernels.best_price_coded_jit
        mu_fn = _kernels.mu_coded_jit
        h_fn = _kernels.holding_coded_jit
        dparams = np.asarray(dp, dtype=np.float64)
        hparams = np.asarray(hp, dtype=np.float64)
    else:
        chunk_fn = _kernels.sim_chunk
        dummy = np.zeros(1)

        def bp_fn(w, _d):
            return float(demand.best_price(w))

        def mu_fn(p, _d):
            return float(demand.rate(p))

        def h_fn(z, _c):
            return float(params.cost.holding(z))

        dparams = hparams = dummy

    return (
        chunk_fn,
        price_mode,
        const_price,
        zg0,
        inv_d,
        n_tab,
        w_tab,
        bp_fn,
        mu_fn,
        dparams,
        h_fn,
        hparams,
    )


def _run_replication(policy, params, cfg, rep, kargs, record=False):
    (
        chunk_fn,
        price_mode,
        const_price,
        zg0,
        inv_d,
        n_tab,
        w_tab,
        bp_fn,
        mu_fn,
        dparams,
        h_fn,
        hparams,
    ) = kargs
    rng = np.random.Generator(np.random.Philox(key=[cfg.seed, rep]))
    n_steps = cfg.n_steps
    burn = cfg.burn_steps
    sqdt = math.sqrt(cfg.dt)

    acc = np.zeros(9)
    acc[_MINZ] = cfg.x0
    z = float(cfg.x0)
    one = np.zeros(1)
    if record:
        rec_z = np.empty(n_steps)
        rec_p = np.empty(n_steps)
        rec_rev = np.empty(n_steps)
        rec_hold = np.empty(n_steps)
        rec_ord = np.empty(n_steps)

    done = 0
    while done < n_steps:
        m = min(_CHUNK, n_steps - done)
        normals = rng.standard_normal(_CHUNK)[:m]
        if record:
            rz = rec_z[done : done + m]
            rp = rec_p[done : done + m]
            rr = rec_rev[done : done + m]
            rh = rec_hold[done : done + m]
            ro = rec_ord[done : done + m]
        else:
            rz = rp = rr = rh = ro = one
        z = chunk_fn(
            z,
            done,
            m,
            normals,
            cfg.dt,
            sqdt,
            params.sigma,
            params.K,
            params.k,
            policy.s,
            policy.S,
            price_mode,
            const_price,
            zg0,
            inv_d,
            n_tab,
            w_tab,
            bp_fn,
            mu_fn,
            dparams,
            h_fn,
            hparams,
            burn,
            cfg.revenue_noise,
            acc,
            record,
            rz,
            rp,
            rr,
            rh,
            ro,
        )
        done += m

    if record:
        t = (np.arange(n_steps) + 1) * cfg.dt
        return acc, (t, rec_z, rec_p, rec_rev, rec_hold, rec_ord)
    return acc, None


def simulate(params: ModelParams, policy: Policy, cfg: Optional[SimConfig] = None) -> SimResult:
    """Estimate the long-run profit rate of a policy by replication.

    The headline rate is revenue_rate - holding_rate - ordering_rate by
    construction; the standard error comes from the per-replication
    profit rates.
    """
    cfg = cfg or SimConfig()
    kargs = _policy_kernel_args(policy, params)
    t_eff = cfg.horizon - cfg.burn_in

    n = cfg.replications
    rev = np.empty(n)
    hold = np.empty(n)
    order = np.empty(n)
    norder = np.empty(n)
    minz = np.empty(n)
    clamps = 0.0
    for rep in range(n):
        acc, _ = _run_replication(policy, params, cfg, rep, kargs)
        rev[rep] = acc[_REV] / t_eff
        hold[rep] = acc[_HOLD] / t_eff
        order[rep] = acc[_ORD] / t_eff
        norder[rep] = acc[_NORD] / t_eff
        minz[rep] = acc[_MINZ]
        clamps += acc[_CLAMP]

    profits = rev - hold - order
    revenue_rate = float(np.mean(rev))
    holding_rate = float(np.mean(hold))
    ordering_rate = float(np.mean(order))
    stderr = float(np.std(profits, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SimResult(
        avg_profit=revenue_rate - holding_rate - ordering_rate,
        stderr=stderr,
        revenue_rate=revenue_rate,
        holding_rate=holding_rate,
        ordering_rate=ordering_rate,
        order_count_rate=float(np.mean(norder)),
        min_level_observed=float(np.min(minz)),
        clamp_count=int(clamps),
        rep_profits=profits,
    )


def simulate_path(params: ModelParams, policy: Policy, cfg: Optional[SimConfig] = None):
    """Single-replication trajectory dump (replication stream 0).

    Returns (t, level, price, cum_revenue, cum_holding, cum_ordering);
    cumulative columns ignore burn-in. Memory grows with step count, so
    keep horizon / dt modest.
    """
    cfg = cfg or SimConfig()
    if cfg.n_steps > 2_000_000:
        raise ConfigInvalid(
            "trajectory dumps above 2e6 steps are not supported; "
            "shorten the horizon or increase dt"
        )
    kargs = _policy_kernel_args(policy, params)
    _, path = _run_replication(policy, params, cfg, 0, kargs, record=True)
    return path


def estimate_profit(
    params: ModelParams,
    policy: Policy,
    cfg: Optional[SimConfig] = None,
    **overrides,
) -> SimResult:
    """One-call wrapper: build/adjust the config and run the estimator.

    Needs at least two replications so the reported standard error (and
    the CI it implies) is meaningful.
    """
    cfg = replace(cfg or SimConfig(), **overrides) if overrides else (cfg or SimConfig())
    if cfg.replications < 2:
        raise ConfigInvalid("profit estimation needs at least 2 replications")
    return simulate(params, policy, cfg)
