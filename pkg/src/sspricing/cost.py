"""Inventory holding/backlog cost families.

A cost model maps an inventory level z (negative = backlog) to an
instantaneous cost rate h(z) with h(0) = 0, h strictly convex, increasing
away from zero on both sides, and polynomially bounded with a declared
growth exponent. Construction validates every invariant on a level grid;
violations raise ModelInvalid.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import ModelInvalid, UndefinedAtZero

_GRID_LO, _GRID_HI, _GRID_POINTS = -50.0, 50.0, 2001
_FAR_PROBE = 1e4
_DERIVATIVE_RTOL = 1e-6
_DERIVATIVE_EXCLUSION = 1e-3

# family codes shared with the compiled kernels
QUADRATIC_CODE = 0
POWER_CODE = 1


class CostModel:
    """Common validation and queries for holding-cost families."""

    family = "custom"
    growth_exponent: int

    # -- family hooks -------------------------------------------------

    def _holding_raw(self, z):
        raise NotImplementedError

    def _holding_derivative_raw(self, z):
        """Derivative for z != 0; never called at exactly zero."""
        raise NotImplementedError

    def _kernel_params(self):
        """Family code + parameter vector for the compiled kernels, or None."""
        return None

    # -- validation ----------------------------------------------------

    def _validate(self):
        n = int(self.growth_exponent)
        if n < 1 or n != self.growth_exponent:
            raise ModelInvalid("growth exponent must be a positive integer")
        grid = np.linspace(_GRID_LO, _GRID_HI, _GRID_POINTS)
        h = np.asarray(self._holding_raw(grid), dtype=float)
        if h.shape != grid.shape or not np.all(np.isfinite(h)):
            raise ModelInvalid("holding cost must be finite on the level grid")
        if abs(float(self._holding_raw(np.asarray(0.0)))) > 1e-12:
            raise ModelInvalid("holding cost must vanish at z = 0")
        if np.any(h < -1e-12):
            raise ModelInvalid("holding cost must be nonnegative")
        nz = grid != 0.0
        dh = np.asarray(self._holding_derivative_raw(grid[nz]), dtype=float)
        if not np.all(np.isfinite(dh)):
            raise ModelInvalid("holding-cost derivative must be finite away from zero")
        if np.any(dh * np.sign(grid[nz]) <= 0.0):
            raise ModelInvalid("holding cost must strictly increase away from z = 0")
        # strict midpoint convexity on consecutive grid triples; exact
        # piecewise-linear stretches produce equality and are rejected
        gap = 0.5 * (h[:-2] + h[2:]) - h[1:-1]
        floor = 1e-12 * np.maximum(1.0, np.maximum(np.abs(h[:-2]), np.abs(h[2:])))
        if np.any(gap <= floor):
            i = int(np.argmin(gap - floor))
            raise ModelInvalid(
                f"holding cost is not strictly convex near z = {grid[i + 1]:.6g}"
            )
        # growth bound: constants fitted on the grid must also cover far probes
        inner = np.abs(grid) <= 1.0
        outer = ~inner
        c1 = float(np.max(h[inner]))
        c2 = float(np.max(h[outer] / np.abs(grid[outer]) ** n))
        for zp in (-_FAR_PROBE, _FAR_PROBE):
            hp = float(self._holding_raw(np.asarray(zp)))
            if not np.isfinite(hp) or hp > (c1 + c2 * abs(zp) ** n) * (1.0 + 1e-9):
                raise ModelInvalid(
                    f"holding cost exceeds the declared growth exponent {n} at z = {zp}"
                )
        # derivative handle must agree with central differences
        far = np.abs(grid) > _DERIVATIVE_EXCLUSION
        pts = grid[far]
        eps = 1e-6 * np.maximum(1.0, np.abs(pts))
        # keep stencils on one side of the kink at zero
        eps = np.minimum(eps, 0.5 * np.abs(pts))
        fd = (
            np.asarray(self._holding_raw(pts + eps), dtype=float)
            - np.asarray(self._holding_raw(pts - eps), dtype=float)
        ) / (2.0 * eps)
        ref = np.asarray(self._holding_derivative_raw(pts), dtype=float)
        rel = np.abs(fd - ref) / np.maximum(np.abs(ref), 1e-12)
        if np.max(rel) > _DERIVATIVE_RTOL:
            raise ModelInvalid(
                "holding-cost derivative disagrees with finite differences "
                f"(max relative error {np.max(rel):.3e})"
            )

    # -- queries ---------------------------------------------------------

    def holding(self, z):
        """Holding/backlog cost rate h(z)."""
        arr = np.asarray(z, dtype=float)
        out = np.asarray(self._holding_raw(arr), dtype=float)
        return float(out) if arr.ndim == 0 else out

    def holding_derivative(self, z):
        """h'(z); raises UndefinedAtZero at z = 0 where the kink may live."""
        arr = np.asarray(z, dtype=float)
        if np.any(arr == 0.0):
            raise UndefinedAtZero("holding-cost derivative is undefined at z = 0")
        out = np.asarray(self._holding_derivative_raw(arr), dtype=float)
        return float(out) if arr.ndim == 0 else out

    def lower_linear_bound(self):
        """Constants (d1, d2) with d1 > 0 and h(z) >= d1 * |z| + d2 on the grid.

        d1 is the smallest chord slope h(z)/|z| beyond |z| = 1 and d2 the
        tightest intercept for that slope, so quadratic families recover the
        familiar z**2 >= |z| - 1/4 bound.
        """
        grid = np.linspace(_GRID_LO, _GRID_HI, _GRID_POINTS)
        h = np.asarray(self._holding_raw(grid), dtype=float)
        outer = np.abs(grid) >= 1.0
        d1 = float(np.min(h[outer] / np.abs(grid[outer])))
        d2 = -float(np.max(d1 * np.abs(grid) - h))
        if not (d1 > 0.0 and np.all(h >= d1 * np.abs(grid) + d2 - 1e-12)):
            raise ModelInvalid("failed to certify a linear lower bound")
        return d1, d2


class QuadraticCost(CostModel):
    """Asymmetric quadratic: h(z) = c_plus * z**2 for z >= 0, c_minus * z**2 below."""

    family = "quadratic"
    growth_exponent = 2

    def __init__(self, c_plus: float = 1.0, c_minus: float = 1.0):
        c_plus = float(c_plus)
        c_minus = float(c_minus)
        if not (c_plus > 0.0 and c_minus > 0.0):
            raise ModelInvalid("quadratic cost needs positive coefficients")
        self.c_plus = c_plus
        self.c_minus = c_minus
        self._validate()

    def _holding_raw(self, z):
        arr = np.asarray(z, dtype=float)
        return np.where(arr >= 0.0, self.c_plus, self.c_minus) * arr * arr

    def _holding_derivative_raw(self, z):
        arr = np.asarray(z, dtype=float)
        return 2.0 * np.where(arr >= 0.0, self.c_plus, self.c_minus) * arr

    def _kernel_params(self):
        return np.array([float(QUADRATIC_CODE), self.c_plus, self.c_minus, 2.0, 2.0])


class PowerCost(CostModel):
    """h(z) = c_plus * z**a_plus for z >= 0 and c_minus * |z|**a_minus below.

    Exponents must exceed 1 for strict convexity; the growth exponent is the
    ceiling of the larger exponent.
    """

    family = "power"

    def __init__(
        self,
        c_plus: float = 1.0,
        c_minus: float = 1.0,
        a_plus: float = 2.0,
        a_minus: float = 2.0,
    ):
        c_plus, c_minus = float(c_plus), float(c_minus)
        a_plus, a_minus = float(a_plus), float(a_minus)
        if not (c_plus > 0.0 and c_minus > 0.0):
            raise ModelInvalid("power cost needs positive coefficients")
        if not (a_plus > 1.0 and a_minus > 1.0):
            raise ModelInvalid("power cost needs exponents > 1 for strict convexity")
        self.c_plus, self.c_minus = c_plus, c_minus
        self.a_plus, self.a_minus = a_plus, a_minus
        self.growth_exponent = int(math.ceil(max(a_plus, a_minus)))
        self._validate()

    def _holding_raw(self, z):
        arr = np.asarray(z, dtype=float)
        pos = arr >= 0.0
        return np.where(
            pos,
            self.c_plus * np.abs(arr) ** self.a_plus,
            self.c_minus * np.abs(arr) ** self.a_minus,
        )

    def _holding_derivative_raw(self, z):
        arr = np.asarray(z, dtype=float)
        pos = arr >= 0.0
        mag = np.where(
            pos,
            self.c_plus * self.a_plus * np.abs(arr) ** (self.a_plus - 1.0),
            self.c_minus * self.a_minus * np.abs(arr) ** (self.a_minus - 1.0),
        )
        return np.sign(arr) * mag

    def _kernel_params(self):
        return np.array(
            [float(POWER_CODE), self.c_plus, self.c_minus, self.a_plus, self.a_minus]
        )


class CustomCost(CostModel):
    """Cost family defined by user callables.

    ``holding`` and ``holding_derivative`` must accept numpy arrays (scalar
    returns are broadcast); the declared ``growth_exponent`` is checked
    against far probes at |z| = 1e4.
    """

    family = "custom"

    def __init__(self, holding: Callable, holding_derivative: Callable, growth_exponent: int):
        self._holding_fn = holding
        self._holding_derivative_fn = holding_derivative
        self.growth_exponent = int(growth_exponent)
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
                f"cost handle returned shape {out.shape} for query shape {arr.shape}"
            ) from exc

    def _holding_raw(self, z):
        arr = np.asarray(z, dtype=float)
        return self._as_shape(self._holding_fn(arr), arr)

    def _holding_derivative_raw(self, z):
        arr = np.asarray(z, dtype=float)
        return self._as_shape(self._holding_derivative_fn(arr), arr)
