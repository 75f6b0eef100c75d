from __future__ import annotations

import copy

import numpy as np
import pytest

from orthotug.dpp import Problem
from orthotug.field import BoundarySpec, inf_sup_boundary
from orthotug.game import Strategy
from orthotug.geometry import DomainSpec, Region
from orthotug.solver import solve
from orthotug.verify import (
    check_lipschitz_bounds,
    check_max_principle,
    check_operator_monotone,
    check_supermartingale,
    check_uniqueness_bracket,
    compare_analytic,
)


@pytest.fixture(scope="module")
def coarse_quadratic():
    return Problem(domain=DomainSpec.ball([0.0, 0.0], 1.0),
                   boundary=BoundarySpec.quadratic([0.0, 0.0], 1.0),
                   epsilon=0.4, n=2, p=2.0, M=8, K=4, h=0.1)


@pytest.fixture(scope="module")
def coarse_quadratic_solution(coarse_quadratic):
    return solve(coarse_quadratic, tol=1e-7)


def _corrupt_one_node(solution, offset):
    out = copy.copy(solution)
    vals = solution.lower.values.copy()
    inside = np.where(solution.lower.region != int(Region.OUTSIDE))[0]
    vals[inside[len(inside) // 2]] += offset
    out.lower = solution.lower.with_values(vals)
    return out


# ---------------------------------------------------------------------------
# maximum principle
# ---------------------------------------------------------------------------

def test_max_principle_constant_data():
    prob = Problem(domain=DomainSpec.ball([0.0, 0.0], 1.0),
                   boundary=BoundarySpec.constant(2.0, n=2),
                   epsilon=0.4, n=2, p=2.0, M=8, K=4, h=0.1)
    sol = solve(prob, tol=1e-8)
    report = check_max_principle(sol, prob.boundary, prob)
    assert report.passed
    assert report.measured <= 1e-12


def test_max_principle_affine_extremes_on_strip(affine_problem, affine_solution):
    report = check_max_principle(affine_solution, affine_problem.boundary,
                                 affine_problem)
    assert report.passed
    # extremal witness sits in the boundary strip
    node = np.asarray(report.witness["node"])
    sd = float(affine_problem.domain.signed_distance_batch(node[None, :])[0])
    assert abs(sd) <= affine_problem.epsilon + 1e-12


def test_max_principle_negative_control(coarse_quadratic, coarse_quadratic_solution):
    _, hi = inf_sup_boundary(coarse_quadratic.boundary, coarse_quadratic.domain,
                             coarse_quadratic.epsilon, coarse_quadratic.h)
    corrupted = _corrupt_one_node(coarse_quadratic_solution, hi + 1.0)
    report = check_max_principle(corrupted, coarse_quadratic.boundary,
                                 coarse_quadratic)
    assert not report.passed
    node = np.asarray(report.witness["node"])
    vals = corrupted.lower.values
    idx = np.where(corrupted.lower.region != int(Region.OUTSIDE))[0]
    worst = idx[np.argmax(vals[idx])]
    assert np.array_equal(node, corrupted.lower.grid.node_coords[worst])


# ---------------------------------------------------------------------------
# operator monotonicity
# ---------------------------------------------------------------------------

def test_operator_monotone_trials(coarse_quadratic):
    report = check_operator_monotone(coarse_quadratic, trials=25, seed=0)
    assert report.passed
    assert report.measured <= 0.0
    assert report.tolerance == 0.0


def test_operator_monotone_reproducible(coarse_quadratic):
    a = check_operator_monotone(coarse_quadratic, trials=5, seed=3)
    b = check_operator_monotone(coarse_quadratic, trials=5, seed=3)
    assert a.measured == b.measured
    assert a.witness == b.witness


def test_operator_monotone_rejects_zero_trials(coarse_quadratic):
    with pytest.raises(ValueError):
        check_operator_monotone(coarse_quadratic, trials=0, seed=0)


# ---------------------------------------------------------------------------
# Lipschitz bounds
# ---------------------------------------------------------------------------

def test_lipschitz_bounds_random_mixtures(coarse_quadratic):
    report = check_lipschitz_bounds(coarse_quadratic, trials=25, seed=1)
    assert report.passed


def test_lipschitz_bounds_on_affine_data(coarse_problem):
    report = check_lipschitz_bounds(coarse_problem, trials=10, seed=2)
    assert report.passed


# ---------------------------------------------------------------------------
# uniqueness bracket
# ---------------------------------------------------------------------------

def test_uniqueness_bracket_constant_data():
    prob = Problem(domain=DomainSpec.ball([0.0, 0.0], 1.0),
                   boundary=BoundarySpec.constant(1.5, n=2),
                   epsilon=0.4, n=2, p=2.0, M=8, K=4, h=0.1)
    sol = solve(prob, tol=1e-8)
    report = check_uniqueness_bracket(prob, sol, [[0.0, 0.0]], N=200, seed=0)
    assert report.passed
    assert report.witness["estimate"] == 1.5


def test_uniqueness_bracket_quadratic(coarse_quadratic, coarse_quadratic_solution):
    report = check_uniqueness_bracket(coarse_quadratic, coarse_quadratic_solution,
                                      [[0.0, 0.0], [0.3, 0.1]], N=4000, seed=1)
    assert report.passed
    assert not report.inconclusive


def test_uniqueness_bracket_small_sample_is_inconclusive(coarse_quadratic,
                                                         coarse_quadratic_solution):
    report = check_uniqueness_bracket(coarse_quadratic, coarse_quadratic_solution,
                                      [[0.0, 0.0]], N=100, seed=2)
    assert report.inconclusive
    assert not report.passed  # inconclusive reports never count as passes


# ---------------------------------------------------------------------------
# supermartingale
# ---------------------------------------------------------------------------

def test_supermartingale_under_greedy_defense(coarse_quadratic,
                                              coarse_quadratic_solution):
    report = check_supermartingale(coarse_quadratic, coarse_quadratic_solution.lower,
                                   [0.0, 0.0], Strategy.uniform_random(),
                                   N=3000, seed=3)
    assert report.passed or report.inconclusive
    assert not report.inconclusive  # 3000 playouts fill the bins


def test_operator_monotone_comparison_has_teeth(coarse_quadratic, rng_factory):
    # the nodewise comparison must separate genuinely different fields:
    # a positive bump strictly raises the sweep somewhere
    from orthotug.dpp import apply_I
    from orthotug.verify import random_lattice_field

    grid = coarse_quadratic.make_grid()
    dirs, rules = coarse_quadratic.move_kit()
    u = random_lattice_field(coarse_quadratic, grid, rng_factory(21), 0.0, 1.0)
    v = u.with_values(np.where(u.supported, u.values + 0.5, np.nan))
    Iu = apply_I(u, coarse_quadratic, dirs, rules)
    Iv = apply_I(v, coarse_quadratic, dirs, rules)
    mask = Iu.region != int(Region.OUTSIDE)
    assert np.max(Iv.values[mask] - Iu.values[mask]) > 0.1


def test_lipschitz_bound_detection_negative_control(coarse_quadratic):
    # understating the field's constant must trip the bound the check uses
    from orthotug.dpp import apply_tilde_sweep
    from orthotug.field import discrete_lipschitz, field_from_function

    grid = coarse_quadratic.make_grid()
    dirs, rules = coarse_quadratic.move_kit()
    u = field_from_function(grid, coarse_quadratic.domain, coarse_quadratic.epsilon,
                            lambda X: 5.0 * X[:, 0])
    vals, mask = apply_tilde_sweep(u, coarse_quadratic, dirs, rules)
    lip_sweep = discrete_lipschitz(grid, vals, mask)
    understated = 0.01
    assert lip_sweep > 3.0 * understated + 10.0 * grid.h * understated


def test_uniqueness_bracket_negative_control(coarse_quadratic,
                                             coarse_quadratic_solution):
    # shifting the rising limit by a constant must break the bracket
    shifted = copy.copy(coarse_quadratic_solution)
    shifted.lower = coarse_quadratic_solution.lower.with_values(
        np.where(coarse_quadratic_solution.lower.supported,
                 coarse_quadratic_solution.lower.values + 0.5, np.nan))
    shifted.upper = shifted.lower
    report = check_uniqueness_bracket(coarse_quadratic, shifted, [[0.0, 0.0]],
                                      N=2000, seed=5)
    assert not report.passed
    assert not report.inconclusive


def test_supermartingale_negative_control(coarse_quadratic,
                                          coarse_quadratic_solution):
    # defending with greedy_max instead of greedy_min turns the value process
    # into a submartingale: the check must catch the systematic rise
    from orthotug.game import collect_transitions
    import math

    field = coarse_quadratic_solution.lower
    S_I = Strategy.greedy_max(field)
    sample = collect_transitions([0.0, 0.0], S_I, S_I, coarse_quadratic,
                                 N=3000, seed=4)
    u_prev = field.sample_batch(sample.prev)
    u_next = field.sample_batch(sample.next)
    drift = float(np.mean(u_next - u_prev))
    se = float(np.std(u_next - u_prev) / math.sqrt(len(u_prev)))
    assert drift > 3 * se  # rises decisively when both players maximize


# ---------------------------------------------------------------------------
# analytic comparison
# ---------------------------------------------------------------------------

def test_compare_analytic_affine(affine_solution):
    table = compare_analytic(affine_solution, BoundarySpec.affine([1.0, 0.0], 0.0))
    assert table.passed
    assert table.l_inf <= 1e-6
    assert table.l2 <= table.l_inf * 3  # discrete norms are commensurate here


def test_compare_analytic_constant():
    prob = Problem(domain=DomainSpec.ball([0.0, 0.0], 1.0),
                   boundary=BoundarySpec.constant(3.0, n=2),
                   epsilon=0.4, n=2, p=2.0, M=8, K=4, h=0.1)
    sol = solve(prob, tol=1e-8)
    table = compare_analytic(sol, prob.boundary)
    assert table.l_inf <= 1e-12


def test_compare_analytic_radial_reported_without_threshold():
    ann = DomainSpec.annulus([0.0, 0.0], 0.5, 1.5)
    F = BoundarySpec.radial_pharmonic(4.0, [0.0, 0.0])
    prob = Problem(domain=ann, boundary=F, epsilon=0.25, n=2, p=4.0,
                   M=8, K=4, h=0.0625)
    sol = solve(prob, tol=1e-6)
    table = compare_analytic(sol, F)
    assert table.threshold is None
    assert table.passed is None
    assert table.l_inf < 0.1  # coarse but sane


def test_radial_error_shrinks_with_epsilon():
    # the discrete solution tracks the radial profile better as the step
    # shrinks; magnitudes are recorded, only the trend is asserted
    ann = DomainSpec.annulus([0.0, 0.0], 0.5, 1.5)
    F = BoundarySpec.radial_pharmonic(4.0, [0.0, 0.0])
    errs = []
    for eps in (0.3, 0.15):
        prob = Problem(domain=ann, boundary=F, epsilon=eps, n=2, p=4.0,
                       M=8, K=4, h=eps / 6)
        sol = solve(prob, tol=1e-6)
        errs.append(compare_analytic(sol, F).l_inf)
    assert errs[1] < errs[0]
