from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from orthotug.dpp import Problem
from orthotug.field import BoundarySpec, ScalarField, inf_sup_boundary
from orthotug.geometry import DomainSpec, Region
from orthotug.solver import (
    iterate,
    load_solution_fields,
    residual,
    solve,
    start_field,
    write_solution,
)
from orthotug.verify import compare_analytic

GOLDEN = Path(__file__).parent / "data" / "golden_quadratic_lower.csv"


def _constant_problem(c=3.0):
    return Problem(domain=DomainSpec.ball([0.0, 0.0], 1.0),
                   boundary=BoundarySpec.constant(c, n=2),
                   epsilon=0.4, n=2, p=2.0, M=8, K=4, h=0.1)


def test_constant_data_converges_in_one_sweep():
    res = iterate(_constant_problem(2.0), "below", tol=1e-9, max_iter=50)
    assert res.converged
    assert res.iterations == 1
    mask = res.field.region != int(Region.OUTSIDE)
    assert np.max(np.abs(res.field.values[mask] - 2.0)) <= 1e-14


def test_iterate_sides_and_validation():
    with pytest.raises(ValueError):
        iterate(_constant_problem(), "sideways")
    with pytest.raises(ValueError):
        iterate(_constant_problem(), "below", tol=0.0)


def test_affine_iterate_converges_to_affine_extension(affine_problem):
    res = iterate(affine_problem, "below", tol=1e-8, max_iter=5000)
    assert res.converged
    assert res.monotone_defect <= 1e-12
    mask = res.field.region != int(Region.OUTSIDE)
    coords = res.field.grid.node_coords[mask]
    affine = coords[:, 0]
    assert np.max(np.abs(res.field.values[mask] - affine)) <= 1e-6


def test_iterate_from_above_is_nonincreasing(quadratic_problem):
    res = iterate(quadratic_problem, "above", tol=1e-5, max_iter=5000)
    assert res.converged
    assert res.monotone_defect <= 1e-12


def test_nonconvergence_is_reported_not_silently_accepted(quadratic_problem):
    res = iterate(quadratic_problem, "below", tol=1e-10, max_iter=3)
    assert not res.converged
    assert res.iterations == 3
    assert res.residual > 0


def test_residual_of_exact_affine_solution(affine_problem):
    grid = affine_problem.make_grid()
    from orthotug.field import field_from_function

    fld = field_from_function(grid, affine_problem.domain, affine_problem.epsilon,
                              lambda X: X[:, 0])
    assert residual(affine_problem, fld) <= 1e-10


def test_residual_of_start_field_is_positive(quadratic_problem):
    grid = quadratic_problem.make_grid()
    lo, _ = inf_sup_boundary(quadratic_problem.boundary, quadratic_problem.domain,
                             quadratic_problem.epsilon, quadratic_problem.h)
    u0 = start_field(quadratic_problem, grid, lo)
    assert residual(quadratic_problem, u0) > 0.1


def test_residual_within_twice_the_stopping_tolerance(quadratic_problem):
    tol = 1e-5
    res = iterate(quadratic_problem, "below", tol=tol, max_iter=10_000)
    assert res.converged
    assert res.residual <= 2 * tol


def test_solve_constant_gap_zero():
    sol = solve(_constant_problem(1.0), tol=1e-8)
    assert sol.converged and sol.ok
    assert sol.gap == 0.0
    assert sol.iterations_lower == 1


def test_solve_affine_certificate(affine_solution):
    sol = affine_solution
    assert sol.converged and sol.ok
    assert sol.gap <= 1e-6
    assert sol.gap >= -1e-12
    assert sol.monotone_defect_lower <= 1e-12
    assert sol.monotone_defect_upper <= 1e-12
    assert sol.bracket_defect <= 1e-12
    cmp = compare_analytic(sol, BoundarySpec.affine([1.0, 0.0], 0.0))
    assert cmp.l_inf <= 1e-6
    assert cmp.passed


def test_solve_quadratic_certificate(quadratic_solution, quadratic_problem):
    sol = quadratic_solution
    lo, hi = inf_sup_boundary(quadratic_problem.boundary, quadratic_problem.domain,
                              quadratic_problem.epsilon, quadratic_problem.h)
    assert sol.converged and sol.ok
    assert sol.gap <= 1e-5 * (hi - lo)
    mask = sol.lower.region != int(Region.OUTSIDE)
    assert np.all(sol.lower.values[mask] >= lo - 1e-9)
    assert np.all(sol.upper.values[mask] <= hi + 1e-9)
    assert np.all(sol.lower.values[mask] <= sol.upper.values[mask] + 1e-12)


def test_comparison_principle_across_boundary_data():
    ball = DomainSpec.ball([0.0, 0.0], 1.0)
    mk = lambda b: Problem(domain=ball, boundary=BoundarySpec.affine([1.0, 0.0], b),  # noqa: E731
                           epsilon=0.4, n=2, p=2.0, M=8, K=4, h=0.1)
    sol_low = solve(mk(0.0), tol=1e-7)
    sol_high = solve(mk(0.5), tol=1e-7)
    mask = sol_low.lower.region != int(Region.OUTSIDE)
    assert np.all(sol_low.lower.values[mask] <= sol_high.lower.values[mask] + 1e-12)


def test_golden_quadratic_regression(quadratic_solution):
    golden = ScalarField.from_csv(GOLDEN)
    got = quadratic_solution.lower
    assert golden.grid.shape == got.grid.shape
    mask = got.region != int(Region.OUTSIDE)
    assert np.array_equal(golden.region, got.region)
    assert np.max(np.abs(golden.values[mask] - got.values[mask])) <= 1e-12


def test_solution_serialization_round_trip(tmp_path, quadratic_solution,
                                           quadratic_problem):
    summary = write_solution(quadratic_solution, quadratic_problem, tmp_path)
    for key in ("gap", "residual_lower", "residual_upper", "iterations_lower",
                "iterations_upper", "p", "n", "epsilon", "M", "K", "h", "tol"):
        assert key in summary
    lower, upper, back = load_solution_fields(tmp_path)
    assert back["gap"] == quadratic_solution.gap
    assert np.array_equal(lower.values[lower.supported],
                          quadratic_solution.lower.values[quadratic_solution.lower.supported])
    assert np.array_equal(upper.values[upper.supported],
                          quadratic_solution.upper.values[quadratic_solution.upper.supported])


def test_solve_3d_affine_smoke():
    prob = Problem(domain=DomainSpec.ball([0.0, 0.0, 0.0], 0.5),
                   boundary=BoundarySpec.affine([1.0, 0.0, 0.0], 0.0),
                   epsilon=0.25, n=3, p=2.0, M=6, K=2, h=0.0625)
    sol = solve(prob, tol=1e-6)
    assert sol.converged and sol.ok
    mask = sol.lower.region != int(Region.OUTSIDE)
    coords = sol.lower.grid.node_coords[mask]
    assert np.max(np.abs(sol.lower.values[mask] - coords[:, 0])) <= 1e-5
