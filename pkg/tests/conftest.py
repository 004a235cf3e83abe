"""Shared fixtures: model instances and session-scoped solves.

The two standard fixtures exercise both bundled demand families; the
narrow-margin linear model is tuned so its price profile has all five
segments. Solves are session-scoped because several test modules reuse
them and a solve takes a noticeable fraction of a second.
"""

import pytest

from sspricing import (
    HyperbolicDemand,
    LinearDemand,
    ModelParams,
    QuadraticCost,
    solve_optimal,
)
from sspricing import _kernels


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    # compile the numba kernels up front so timed tests measure the
    # algorithm, not JIT latency
    _kernels.warm_up()


@pytest.fixture(scope="session")
def linear_params():
    return ModelParams(
        demand=LinearDemand(A=10.0, p_min=2.0, p_max=6.0),
        cost=QuadraticCost(),
        sigma=1.0,
        K=1.0,
        k=1.0,
    )


@pytest.fixture(scope="session")
def hyperbolic_params():
    return ModelParams(
        demand=HyperbolicDemand(lam0=1.0, lam1=2.0, p_min=1.0, p_max=5.0),
        cost=QuadraticCost(),
        sigma=1.0,
        K=1.0,
        k=0.5,
    )


@pytest.fixture(scope="session")
def narrow_linear_params():
    # thin price interval with k just under 2*p_min - A and a band wide
    # enough that w tops out above 2*p_max - A: the five-segment regime
    return ModelParams(
        demand=LinearDemand(A=2.9, p_min=2.0, p_max=2.5),
        cost=QuadraticCost(),
        sigma=1.0,
        K=2.0,
        k=1.0,
    )


@pytest.fixture(scope="session")
def linear_solution(linear_params):
    return solve_optimal(linear_params)


@pytest.fixture(scope="session")
def hyperbolic_solution(hyperbolic_params):
    return solve_optimal(hyperbolic_params)


@pytest.fixture(scope="session")
def narrow_linear_solution(narrow_linear_params):
    return solve_optimal(narrow_linear_params)
