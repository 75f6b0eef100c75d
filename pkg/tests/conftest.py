from __future__ import annotations

import numpy as np
import pytest

from orthotug import BoundarySpec, DomainSpec, Problem
from orthotug.solver import solve


@pytest.fixture(scope="session")
def unit_ball() -> DomainSpec:
    return DomainSpec.ball([0.0, 0.0], 1.0)


@pytest.fixture(scope="session")
def affine_problem(unit_ball) -> Problem:
    return Problem(domain=unit_ball, boundary=BoundarySpec.affine([1.0, 0.0], 0.0),
                   epsilon=0.3, n=2, p=2.0)


@pytest.fixture(scope="session")
def quadratic_problem(unit_ball) -> Problem:
    return Problem(domain=unit_ball, boundary=BoundarySpec.quadratic([0.0, 0.0], 1.0),
                   epsilon=0.3, n=2, p=2.0)


@pytest.fixture(scope="session")
def coarse_problem(unit_ball) -> Problem:
    # small stencil tables: property trials stay fast
    return Problem(domain=unit_ball, boundary=BoundarySpec.affine([1.0, 0.5], 0.2),
                   epsilon=0.4, n=2, p=2.0, M=8, K=4, h=0.1)


@pytest.fixture(scope="session")
def affine_solution(affine_problem):
    return solve(affine_problem, tol=1e-7)


@pytest.fixture(scope="session")
def quadratic_solution(quadratic_problem):
    return solve(quadratic_problem, tol=1e-7)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed: int) -> np.random.Generator:
        return np.random.default_rng(seed)

    return make
