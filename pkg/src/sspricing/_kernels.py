"""Compiled numerical kernels.

The backward marginal-value integrator and the simulation step loop are
written once as plain Python and compiled with numba for the bundled
closed-form families. Custom callable families run the same source
uncompiled, so both paths share one implementation.

Family parameter vectors:

* demand: ``[code, p_min, p_max, a, b]`` where code 0 is hyperbolic
  (a = lam0, b = lam1) and code 1 is linear (a = A),
* cost: ``[code, c_plus, c_minus, a_plus, a_minus]`` where code 0 is
  quadratic and code 1 is the power family.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_OK = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    NUMBA_OK = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# ---------------------------------------------------------------------------
# family-coded scalar evaluations


def best_price_coded(w, d):
    if d[0] == 0.0:
        # hyperbolic: bang-bang with ties resolved to the low price
        return d[2] if w > -d[3] else d[1]
    # linear: clamped vertex of the concave payoff
    p = 0.5 * (d[3] + w)
    if p < d[1]:
        return d[1]
    if p > d[2]:
        return d[2]
    return p


def mu_coded(p, d):
    if d[0] == 0.0:
        return d[4] / (p + d[3])
    return d[3] - p


def pi_coded(w, d):
    p = best_price_coded(w, d)
    return mu_coded(p, d) * (p - w)


def holding_coded(z, c):
    if z >= 0.0:
        coef = c[1]
        expo = c[3]
    else:
        coef = c[2]
        expo = c[4]
        z = -z
    if c[0] == 0.0:
        return coef * z * z
    return coef * z ** expo


# ---------------------------------------------------------------------------
# backward integrator
#
# Integrates w'(z) = (2 / sigma^2) * (gamma + h(z) - pi(w)) from the grid
# point i_hi * d down to i_lo * d, landing exactly on every grid point.
# Each cell is covered by adaptive embedded Runge-Kutta 5(4) sub-steps
# (Dormand-Prince coefficients) under a per-step error test.
#
# Status codes: 0 reached i_lo, 1 stopped by the below-band rule,
# 2 divergence guard, 3 step underflow.

_STEP_FLOOR = 1e-12
_BLOWUP_GUARD = 1e9


def integrate_cells(
    i_hi,
    i_lo,
    d,
    w0,
    gamma,
    sig2,
    stop_level,
    use_stop,
    rtol,
    atol,
    pi_fn,
    dparams,
    h_fn,
    hparams,
    w_out,
    f_out,
):
    two = 2.0 / sig2
    n = i_hi - i_lo
    y = w0
    w_out[n] = y
    f_out[n] = two * (gamma + h_fn(i_hi * d, hparams) - pi_fn(y, dparams))
    seen_above = y > stop_level
    h_cur = d
    j = n
    for i in range(i_hi, i_lo, -1):
        z_top = i * d
        tau = 0.0
        while d - tau > 1e-13 * d:
            rem = d - tau
            clipped = h_cur >= rem
            hstep = rem if clipped else h_cur
            zc = z_top - tau
            hs = -hstep
            k1 = two * (gamma + h_fn(zc, hparams) - pi_fn(y, dparams))
            k2 = two * (
                gamma
                + h_fn(zc + hs * 0.2, hparams)
                - pi_fn(y + hs * 0.2 * k1, dparams)
            )
            k3 = two * (
                gamma
                + h_fn(zc + hs * 0.3, hparams)
                - pi_fn(y + hs * (0.075 * k1 + 0.225 * k2), dparams)
            )
            k4 = two * (
                gamma
                + h_fn(zc + hs * 0.8, hparams)
                - pi_fn(
                    y + hs * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3),
                    dparams,
                )
            )
            k5 = two * (
                gamma
                + h_fn(zc + hs * (8.0 / 9.0), hparams)
                - pi_fn(
                    y
                    + hs
                    * (
                        19372.0 / 6561.0 * k1
                        - 25360.0 / 2187.0 * k2
                        + 64448.0 / 6561.0 * k3
                        - 212.0 / 729.0 * k4
                    ),
                    dparams,
                )
            )
            k6 = two * (
                gamma
                + h_fn(zc + hs, hparams)
                - pi_fn(
                    y
                    + hs
                    * (
                        9017.0 / 3168.0 * k1
                        - 355.0 / 33.0 * k2
                        + 46732.0 / 5247.0 * k3
                        + 49.0 / 176.0 * k4
                        - 5103.0 / 18656.0 * k5
                    ),
                    dparams,
                )
            )
            y5 = y + hs * (
                35.0 / 384.0 * k1
                + 500.0 / 1113.0 * k3
                + 125.0 / 192.0 * k4
                - 2187.0 / 6784.0 * k5
                + 11.0 / 84.0 * k6
            )
            k7 = two * (gamma + h_fn(zc + hs, hparams) - pi_fn(y5, dparams))
            err = abs(
                hs
                * (
                    (35.0 / 384.0 - 5179.0 / 57600.0) * k1
                    + (500.0 / 1113.0 - 7571.0 / 16695.0) * k3
                    + (125.0 / 192.0 - 393.0 / 640.0) * k4
                    + (-2187.0 / 6784.0 + 92097.0 / 339200.0) * k5
                    + (11.0 / 84.0 - 187.0 / 2100.0) * k6
                    - (1.0 / 40.0) * k7
                )
            )
            ay = abs(y)
            ay5 = abs(y5)
            sc = atol + rtol * (ay if ay > ay5 else ay5)
            if err <= sc:
                tau += hstep
                y = y5
                if err == 0.0:
                    fac = 5.0
                else:
                    fac = 0.9 * (sc / err) ** 0.2
                    if fac > 5.0:
                        fac = 5.0
                    elif fac < 0.2:
                        fac = 0.2
                cand = hstep * fac
                if clipped:
                    # remainder-clipped step: only shrink on error evidence
                    if cand < h_cur:
                        h_cur = cand
                else:
                    h_cur = cand
                if abs(y) > _BLOWUP_GUARD:
                    return 2, j, z_top - tau
            else:
                fac = 0.9 * (sc / err) ** 0.2
                if fac < 0.1:
                    fac = 0.1
                elif fac > 0.5:
                    fac = 0.5
                h_cur = hstep * fac
                if h_cur < _STEP_FLOOR:
                    return 3, j, z_top - tau
        j -= 1
        w_out[j] = y
        f_out[j] = two * (gamma + h_fn((i - 1) * d, hparams) - pi_fn(y, dparams))
        if use_stop:
            if y > stop_level:
                seen_above = True
            elif seen_above:
                # came back down through the stop level: the band is behind us
                return 1, j, (i - 1) * d
    return 0, 0, i_lo * d


# ---------------------------------------------------------------------------
# simulation step loop
#
# One chunk of Euler steps for a single replication. Accumulator layout:
# 0 revenue, 1 holding, 2 ordering, 3 order count, 4 minimum level,
# 5 price-table clamp count, 6..8 raw cumulative revenue/holding/ordering
# (never burn-in gated; used by trajectory dumps).


def sim_chunk(
    z,
    step0,
    nsteps,
    normals,
    dt,
    sqdt,
    sigma,
    big_k,
    unit_k,
    s,
    S,
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
    burn_idx,
    revenue_noise,
    acc,
    record,
    rec_z,
    rec_p,
    rec_rev,
    rec_hold,
    rec_ord,
):
    for m in range(nsteps):
        live = step0 + m >= burn_idx
        if z <= s:
            q = S - z
            cost_q = big_k + unit_k * q
            if live:
                acc[2] += cost_q
                acc[3] += 1.0
            acc[8] += cost_q
            z = S
        if price_mode == 0:
            p = const_price
        else:
            x = (z - zg0) * inv_d
            if x <= 0.0:
                w = w_tab[0]
            elif x >= n_tab - 1.0:
                w = w_tab[n_tab - 1]
                acc[5] += 1.0
            else:
                jj = int(x)
                fr = x - jj
                w = w_tab[jj] + (w_tab[jj + 1] - w_tab[jj]) * fr
            p = bp_fn(w, dparams)
        mu = mu_fn(p, dparams)
        rev = p * mu * dt
        if revenue_noise:
            rev += p * sigma * sqdt * normals[m]
        hold = h_fn(z, hparams) * dt
        if live:
            acc[0] += rev
            acc[1] += hold
        acc[6] += rev
        acc[7] += hold
        if record:
            rec_z[m] = z
            rec_p[m] = p
            rec_rev[m] = acc[6]
            rec_hold[m] = acc[7]
            rec_ord[m] = acc[8]
        z = z - mu * dt + sigma * sqdt * normals[m]
        if z < acc[4]:
            acc[4] = z
    return z


# ---------------------------------------------------------------------------
# compiled twins

if NUMBA_OK:
    best_price_coded_jit = njit(cache=True)(best_price_coded)
    mu_coded_jit = njit(cache=True)(mu_coded)
    holding_coded_jit = njit(cache=True)(holding_coded)

    @njit(cache=True)
    def pi_coded_jit(w, d):
        p = best_price_coded_jit(w, d)
        return mu_coded_jit(p, d) * (p - w)

    # no cache=True here: these take dispatcher-typed arguments, whose
    # cache-index entries do not round-trip across processes (stale
    # weakrefs can even crash the index merge); they recompile per
    # process instead
    integrate_cells_jit = njit()(integrate_cells)
    sim_chunk_jit = njit()(sim_chunk)
else:  # pragma: no cover
    best_price_coded_jit = best_price_coded
    mu_coded_jit = mu_coded
    pi_coded_jit = pi_coded
    holding_coded_jit = holding_coded
    integrate_cells_jit = integrate_cells
    sim_chunk_jit = sim_chunk


def warm_up():
    """Trigger kernel compilation once so timed sections run warm."""
    if not NUMBA_OK:  # pragma: no cover
        return
    d = np.array([1.0, 2.0, 6.0, 10.0, 0.0])
    c = np.array([0.0, 1.0, 1.0, 2.0, 2.0])
    w = np.empty(3)
    f = np.empty(3)
    integrate_cells_jit(
        2, 0, 0.5, -10.0, 0.0, 1.0, 0.9, True, 1e-10, 1e-10,
        pi_coded_jit, d, holding_coded_jit, c, w, f,
    )
    acc = np.zeros(9)
    acc[4] = np.inf
    one = np.zeros(1)
    sim_chunk_jit(
        0.0, 0, 1, np.zeros(1), 1e-3, np.sqrt(1e-3), 1.0, 1.0, 1.0, -1.0, 3.0,
        0, 5.0, 0.0, 1.0, 2, np.zeros(2), best_price_coded_jit, mu_coded_jit,
        d, holding_coded_jit, c, 0, False, acc, False, one, one, one, one, one,
    )
