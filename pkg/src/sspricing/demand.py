"""Price-dependent demand families and the pricing kernel.

A demand model maps a price p in [p_min, p_max] to a demand rate mu(p)
that is positive and strictly decreasing. On top of the rate sit the
pricing-kernel operations used by the band solver:

* ``payoff(p, w)``      instantaneous margin rate mu(p) * (p - w) against a
                        marginal inventory value w,
* ``best_price(w)``     the smallest maximizer of the payoff over admissible
                        prices,
* ``pi(w)``             the optimized payoff rate,
* ``pi_derivative(w)``  its derivative -mu(best_price(w)),
* ``max_revenue_rate``  the largest achievable revenue rate max_p p * mu(p).

Two closed-form families are bundled (hyperbolic and linear); arbitrary
rate functions are supported through ``CustomDemand``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ModelInvalid, PriceOutOfBounds

_VALIDATION_POINTS = 1001
_DERIVATIVE_RTOL = 1e-6
_GOLDEN_XTOL = 1e-10
_TIE_TOL = 1e-9

# family codes shared with the compiled kernels
HYPERBOLIC_CODE = 0
LINEAR_CODE = 1


def _golden_max(f, a, b, xtol=_GOLDEN_XTOL):
    """Golden-section maximum of f on [a, b]; returns (x, f(x)).

    Assumes f is unimodal on the bracket; callers narrow the bracket with a
    coarse scan first so multimodal payoffs are handled too.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > xtol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    x = 0.5 * (a + b)
    return x, f(x)


class DemandModel:
    """Common validation and pricing-kernel operations.

    Subclasses supply the raw rate family through ``_rate_raw`` and
    ``_rate_derivative_raw`` (both must accept numpy arrays) and may
    override ``best_price`` with a closed form.
    """

    family = "custom"

    def __init__(self, p_min: float, p_max: float):
        p_min = float(p_min)
        p_max = float(p_max)
        if not (np.isfinite(p_min) and np.isfinite(p_max)):
            raise ModelInvalid("price bounds must be finite")
        if not 0.0 <= p_min < p_max:
            raise ModelInvalid(
                f"price interval must satisfy 0 <= p_min < p_max, got [{p_min}, {p_max}]"
            )
        self.p_min = p_min
        self.p_max = p_max

    # -- family hooks -------------------------------------------------

    def _rate_raw(self, p):
        raise NotImplementedError

    def _rate_derivative_raw(self, p):
        raise NotImplementedError

    def _kernel_params(self):
        """Family code + parameter vector for the compiled kernels, or None."""
        return None

    def _branch_thresholds(self):
        """Marginal values where the posted price hits a bound, or None.

        Closed-form families return the w thresholds at which the optimal
        price switches onto or off the floor/ceiling; used to refine
        pricing-regime breakpoints.
        """
        return None

    # -- validation ----------------------------------------------------

    def _validate(self):
        grid = np.linspace(self.p_min, self.p_max, _VALIDATION_POINTS)
        mu = np.asarray(self._rate_raw(grid), dtype=float)
        if mu.shape != grid.shape or not np.all(np.isfinite(mu)):
            raise ModelInvalid("demand rate must be finite on the price grid")
        if np.any(mu <= 0.0):
            raise ModelInvalid("demand rate must be positive on [p_min, p_max]")
        dmu = np.asarray(self._rate_derivative_raw(grid), dtype=float)
        if dmu.shape != grid.shape or not np.all(np.isfinite(dmu)):
            raise ModelInvalid("demand-rate derivative must be finite on the price grid")
        if np.any(dmu >= 0.0):
            raise ModelInvalid("demand rate must be strictly decreasing on [p_min, p_max]")
        # derivative handle must agree with central differences
        eps = 1e-6 * (self.p_max - self.p_min)
        inner = grid[1:-1]
        fd = (
            np.asarray(self._rate_raw(inner + eps), dtype=float)
            - np.asarray(self._rate_raw(inner - eps), dtype=float)
        ) / (2.0 * eps)
        ref = np.asarray(self._rate_derivative_raw(inner), dtype=float)
        rel = np.abs(fd - ref) / np.maximum(np.abs(ref), 1e-12)
        if np.max(rel) > _DERIVATIVE_RTOL:
            raise ModelInvalid(
                "rate derivative disagrees with finite differences "
                f"(max relative error {np.max(rel):.3e})"
            )

    # -- kernel operations ----------------------------------------------

    def rate(self, p):
        """Demand rate mu(p); raises PriceOutOfBounds off the admissible interval."""
        arr = np.asarray(p, dtype=float)
        if np.any(arr < self.p_min) or np.any(arr > self.p_max):
            raise PriceOutOfBounds(
                f"price {p} outside [{self.p_min}, {self.p_max}]"
            )
        mu = np.asarray(self._rate_raw(arr), dtype=float)
        if np.any(mu <= 0.0) or not np.all(np.isfinite(mu)):
            raise ModelInvalid("demand rate must be positive")
        return float(mu) if arr.ndim == 0 else mu

    def rate_derivative(self, p):
        arr = np.asarray(p, dtype=float)
        if np.any(arr < self.p_min) or np.any(arr > self.p_max):
            raise PriceOutOfBounds(
                f"price {p} outside [{self.p_min}, {self.p_max}]"
            )
        dmu = np.asarray(self._rate_derivative_raw(arr), dtype=float)
        return float(dmu) if arr.ndim == 0 else dmu

    def payoff(self, p, w):
        """Margin rate mu(p) * (p - w) earned at price p against marginal value w."""
        parr = np.asarray(p, dtype=float)
        warr = np.asarray(w, dtype=float)
        out = self.rate(parr) * (parr - warr)
        return float(out) if np.ndim(out) == 0 else out

    def best_price(self, w):
        """Smallest maximizer of payoff(., w) on [p_min, p_max]."""
        warr = np.asarray(w, dtype=float)
        if warr.ndim == 0:
            return self._best_price_scalar(float(warr))
        return np.array([self._best_price_scalar(float(v)) for v in warr.ravel()]).reshape(
            warr.shape
        )

    def _best_price_scalar(self, w: float) -> float:
        # coarse scan narrows the bracket so a multimodal payoff is not fed
        # to golden-section blindly
        grid = np.linspace(self.p_min, self.p_max, _VALIDATION_POINTS)
        vals = np.asarray(self._rate_raw(grid), dtype=float) * (grid - w)
        i = int(np.argmax(vals))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        f = lambda p: float(self._rate_raw(np.asarray(p))) * (p - w)
        p_best, v_best = _golden_max(f, lo, hi)
        v_max = max(v_best, float(vals[i]))
        # smallest-maximizer sweep: accept the first price within the tie
        # tolerance of the maximum (flat stretches resolve leftward)
        tie = np.nonzero(vals >= v_max - _TIE_TOL)[0]
        candidates = [p_best] if v_best >= v_max - _TIE_TOL else []
        if tie.size:
            candidates.append(float(grid[tie[0]]))
        return min(candidates)

    def pi(self, w):
        """Optimized payoff rate max_p payoff(p, w)."""
        p = self.best_price(w)
        out = np.asarray(self._rate_raw(np.asarray(p, dtype=float)), dtype=float) * (
            np.asarray(p, dtype=float) - np.asarray(w, dtype=float)
        )
        return float(out) if np.ndim(out) == 0 else out

    def pi_derivative(self, w):
        """Derivative of the optimized payoff: -mu(best_price(w))."""
        p = self.best_price(w)
        out = -np.asarray(self._rate_raw(np.asarray(p, dtype=float)), dtype=float)
        return float(out) if np.ndim(out) == 0 else out

    def max_revenue_rate(self):
        """Largest achievable revenue rate max_p p * mu(p)."""
        # identical to the optimized payoff against zero marginal value
        return float(self.pi(0.0))


class HyperbolicDemand(DemandModel):
    """mu(p) = lam1 / (p + lam0).

    The payoff is monotone in p for fixed w, so the optimal price is
    bang-bang: p_max when w > -lam0, p_min when w < -lam0, and the whole
    interval ties at w = -lam0 where the smallest maximizer p_min is used.
    """

    family = "hyperbolic"

    def __init__(self, lam0: float = 1.0, lam1: float = 2.0, p_min: float = 1.0, p_max: float = 5.0):
        super().__init__(p_min, p_max)
        lam0 = float(lam0)
        lam1 = float(lam1)
        if not (lam0 >= 0.0 and lam1 > 0.0):
            raise ModelInvalid("hyperbolic demand needs lam0 >= 0 and lam1 > 0")
        self.lam0 = lam0
        self.lam1 = lam1
        self._validate()

    def _rate_raw(self, p):
        return self.lam1 / (np.asarray(p, dtype=float) + self.lam0)

    def _rate_derivative_raw(self, p):
        return -self.lam1 / (np.asarray(p, dtype=float) + self.lam0) ** 2

    def best_price(self, w):
        warr = np.asarray(w, dtype=float)
        out = np.where(warr > -self.lam0, self.p_max, self.p_min)
        return float(out) if warr.ndim == 0 else out

    def _kernel_params(self):
        return np.array(
            [float(HYPERBOLIC_CODE), self.p_min, self.p_max, self.lam0, self.lam1]
        )

    def _branch_thresholds(self):
        return (-self.lam0,)


class LinearDemand(DemandModel):
    """mu(p) = A - p with A > p_max so the rate stays positive.

    The payoff is concave in p with vertex (A + w) / 2; the optimal price is
    that vertex clamped to [p_min, p_max].
    """

    family = "linear"

    def __init__(self, A: float = 10.0, p_min: float = 2.0, p_max: float = 6.0):
        super().__init__(p_min, p_max)
        A = float(A)
        if not A > self.p_max:
            raise ModelInvalid(
                f"linear demand needs A > p_max for a positive rate, got A={A}, p_max={self.p_max}"
            )
        self.A = A
        self._validate()

    def _rate_raw(self, p):
        return self.A - np.asarray(p, dtype=float)

    def _rate_derivative_raw(self, p):
        return np.full_like(np.asarray(p, dtype=float), -1.0)

    def best_price(self, w):
        warr = np.asarray(w, dtype=float)
        out = np.clip(0.5 * (self.A + warr), self.p_min, self.p_max)
        return float(out) if warr.ndim == 0 else out

    def _kernel_params(self):
        return np.array([float(LINEAR_CODE), self.p_min, self.p_max, self.A, 0.0])

    def _branch_thresholds(self):
        # vertex (A + w) / 2 hits a bound when w crosses 2 p_bound - A
        return (2.0 * self.p_min - self.A, 2.0 * self.p_max - self.A)


class CustomDemand(DemandModel):
    """Demand family defined by user callables.

    ``rate`` and ``rate_derivative`` must accept numpy arrays (scalar
    returns are broadcast, so constant derivatives may be plain lambdas)
    and satisfy the usual invariants (positive, strictly decreasing,
    consistent derivative); violations raise ModelInvalid at construction.
    Optimal prices come from a coarse scan plus golden-section refinement,
    so flat payoff ties resolve at the scan resolution.
    """

    family = "custom"

    def __init__(
        self,
        rate: Callable,
        rate_derivative: Callable,
        p_min: float,
        p_max: float,
    ):
        super().__init__(p_min, p_max)
        self._rate_fn = rate
        self._rate_derivative_fn = rate_derivative
        self._validate()

    @staticmethod
    def _as_shape(out, arr):
        out = np.asarray(out, dtype=float)
        if out.shape == arr.shape:
            return out
        try:
            return np.broadcast_to(out, arr.shape)
        except ValueError as exc:
            raise ModelInvalid(
                f"demand handle returned shape {out.shape} for query shape {arr.shape}"
            ) from exc

    def _rate_raw(self, p):
        arr = np.asarray(p, dtype=float)
        return self._as_shape(self._rate_fn(arr), arr)

    def _rate_derivative_raw(self, p):
        arr = np.asarray(p, dtype=float)
        return self._as_shape(self._rate_derivative_fn(arr), arr)
