"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The statistical
criteria pin their seeds, so the whole suite is reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np
import pytest

from orthotug.dpp import Problem, apply_I, apply_tilde_sweep, coefficients, tilde_I
from orthotug.field import (
    AnalyticField,
    BoundarySpec,
    discrete_lipschitz,
    field_from_function,
    inf_sup_boundary,
)
from orthotug.game import Strategy, estimate_value, exit_time_stats
from orthotug.geometry import DomainSpec, Region
from orthotug.solver import solve
from orthotug.verify import (
    check_max_principle,
    check_supermartingale,
    random_lattice_field,
)


def _criterion(num: int, name: str, ok: bool, detail: str) -> None:
    state = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:02d} {name}: {state} ({detail})")
    assert ok, f"criterion {num} ({name}): {detail}"


@pytest.fixture(scope="module")
def termination_problem():
    return Problem(domain=DomainSpec.ball([0.0, 0.0], 1.0),
                   boundary=BoundarySpec.quadratic([0.0, 0.0], 1.0),
                   epsilon=0.5, n=2, p=2.0)


@pytest.fixture(scope="module")
def termination_solution(termination_problem):
    return solve(termination_problem, tol=1e-7)


def test_criterion_01_coefficients():
    exact = coefficients(2.0, 2) == (0.25, 0.75) and coefficients(3.0, 2) == (0.4, 0.6)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        p = float(rng.uniform(1.0 + 1e-9, 30.0))
        n = int(rng.integers(2, 12))
        a, b = coefficients(p, n)
        worst = max(worst, abs(a + b - 1.0))
    _criterion(1, "coefficients", exact and worst <= 1e-15,
               f"exact pairs ok, max |alpha+beta-1| = {worst:.2e}")


def test_criterion_02_affine_fixed_point(affine_problem, affine_solution):
    sol = affine_solution
    mask = sol.lower.region != int(Region.OUTSIDE)
    coords = sol.lower.grid.node_coords[mask]
    err = float(np.max(np.abs(sol.lower.values[mask] - coords[:, 0])))
    ok = sol.converged and sol.gap <= 1e-6 and err <= 1e-6
    _criterion(2, "affine fixed point", ok,
               f"gap = {sol.gap:.2e}, L_inf vs affine = {err:.2e}")


def test_criterion_03_quadratic_offset_identity():
    ball = DomainSpec.ball([0.0, 0.0], 1.0)
    quad = AnalyticField(lambda X: X[:, 0] ** 2 + X[:, 1] ** 2)
    worst = 0.0
    for p in (1.5, 2.0, 4.0):
        for eps in (0.1, 0.3):
            prob = Problem(domain=ball, boundary=BoundarySpec.quadratic([0.0, 0.0]),
                           epsilon=eps, n=2, p=p, M=16, K=8)
            dirs, rules = prob.move_kit()
            got = tilde_I(quad, np.zeros(2), dirs, rules, prob)
            want = prob.alpha * eps**2 + prob.beta * eps**2 / 3.0
            worst = max(worst, abs(got - want))
    _criterion(3, "quadratic offset identity", worst <= 1e-10,
               f"max deviation = {worst:.2e}")


def test_criterion_04_monotone_iteration(quadratic_problem, quadratic_solution):
    sol = quadratic_solution
    lo, hi = inf_sup_boundary(quadratic_problem.boundary, quadratic_problem.domain,
                              quadratic_problem.epsilon, quadratic_problem.h)
    ok = (sol.monotone_defect_lower <= 1e-12
          and sol.monotone_defect_upper <= 1e-12
          and sol.bracket_defect <= 1e-12
          and sol.gap <= 1e-5 * (hi - lo))
    _criterion(4, "monotone iteration", ok,
               f"defects ({sol.monotone_defect_lower:.1e}, "
               f"{sol.monotone_defect_upper:.1e}), bracket "
               f"{sol.bracket_defect:.1e}, gap = {sol.gap:.2e} "
               f"<= {1e-5 * (hi - lo):.2e}")


def test_criterion_05_operator_monotonicity_and_range(quadratic_problem):
    prob = quadratic_problem
    grid = prob.make_grid()
    dirs, rules = prob.move_kit()
    lo, hi = inf_sup_boundary(prob.boundary, prob.domain, prob.epsilon, prob.h)
    rng = np.random.default_rng(1)
    mask = None
    order_ok = True
    for _ in range(100):
        u = random_lattice_field(prob, grid, rng, lo - 1.0, hi + 1.0)
        bump = np.where(u.supported, rng.uniform(0.0, 1.0, size=grid.size), np.nan)
        v = u.with_values(np.where(u.supported, u.values + bump, np.nan))
        Iu = apply_I(u, prob, dirs, rules)
        Iv = apply_I(v, prob, dirs, rules)
        mask = Iu.region != int(Region.OUTSIDE)
        order_ok = order_ok and bool(np.all(Iu.values[mask] <= Iv.values[mask]))
    range_ok = True
    for _ in range(100):
        u = random_lattice_field(prob, grid, rng, lo, hi)
        out = apply_I(u, prob, dirs, rules)
        vals = out.values[mask]
        range_ok = range_ok and bool(np.all(vals >= lo) and np.all(vals <= hi))
    _criterion(5, "operator monotonicity and range", order_ok and range_ok,
               f"order exact on 100 pairs: {order_ok}, range kept on 100 fields: "
               f"{range_ok}")


def test_criterion_06_maximum_principle(affine_problem, affine_solution,
                                        quadratic_problem, quadratic_solution,
                                        termination_problem, termination_solution):
    cases = [(affine_problem, affine_solution),
             (quadratic_problem, quadratic_solution),
             (termination_problem, termination_solution)]
    all_ok = True
    worst = -np.inf
    for prob, sol in cases:
        report = check_max_principle(sol, prob.boundary, prob)
        all_ok = all_ok and report.passed
        worst = max(worst, report.measured)
    # negative control: one corrupted node must be caught
    import copy

    corrupted = copy.copy(quadratic_solution)
    vals = quadratic_solution.lower.values.copy()
    inside = np.where(quadratic_solution.lower.region != int(Region.OUTSIDE))[0]
    _, hi = inf_sup_boundary(quadratic_problem.boundary, quadratic_problem.domain,
                             quadratic_problem.epsilon, quadratic_problem.h)
    vals[inside[len(inside) // 3]] = hi + 1.0
    corrupted.lower = quadratic_solution.lower.with_values(vals)
    control = check_max_principle(corrupted, quadratic_problem.boundary,
                                  quadratic_problem)
    _criterion(6, "maximum principle", all_ok and not control.passed,
               f"worst excess = {worst:.2e}, corrupted control caught: "
               f"{not control.passed}")


def test_criterion_07_lipschitz_propagation(quadratic_problem):
    prob = quadratic_problem
    grid = prob.make_grid()
    dirs, rules = prob.move_kit()
    rng = np.random.default_rng(2)
    lo_box, hi_box = prob.domain.bounding_box()
    worst = -np.inf
    for _ in range(50):
        coefs = rng.uniform(-1.0, 1.0, size=3)
        centers = rng.uniform(lo_box - 0.5, hi_box + 0.5, size=(3, 2))
        a = rng.uniform(-1.0, 1.0, size=2)
        b = float(rng.uniform(-1.0, 1.0))

        def fn(X):
            acc = X @ a + b
            for c, q in zip(coefs, centers):
                acc = acc + c * np.sqrt(((X - q) ** 2).sum(axis=1))
            return acc

        lip_u = float(np.sum(np.abs(coefs)) + np.linalg.norm(a))
        u = field_from_function(grid, prob.domain, prob.epsilon, fn)
        vals, mask = apply_tilde_sweep(u, prob, dirs, rules)
        lip_sweep = discrete_lipschitz(grid, vals, mask)
        worst = max(worst, lip_sweep - (3.0 * lip_u + 10.0 * grid.h * lip_u))
    _criterion(7, "Lipschitz propagation", worst <= 0.0,
               f"worst bound excess over 50 mixtures = {worst:.2e}")


def _termination_pairings(solution):
    lower = solution.lower
    return [
        ("greedy x greedy", Strategy.greedy_max(lower), Strategy.greedy_min(lower)),
        ("pull x pull", Strategy.pull_toward([2.0, 0.0]),
         Strategy.pull_toward([-2.0, 0.0])),
        ("random x random", Strategy.uniform_random(), Strategy.uniform_random()),
    ]


def _run_termination(problem, solution, workers: int):
    tables = {}
    for name, S_I, S_II in _termination_pairings(solution):
        tables[name] = exit_time_stats([0.0, 0.0], S_I, S_II, problem,
                                       N=10_000, seed=2024, cap=10**6,
                                       workers=workers)
    return tables


def test_criterion_08_game_termination(termination_problem, termination_solution):
    tables = _run_termination(termination_problem, termination_solution, workers=1)
    ok = True
    details = []
    for name, table in tables.items():
        monotone = all(b <= a for a, b in zip(table.survival, table.survival[1:]))
        ok = ok and table.j_tilde == 64 and table.n_truncated == 0 \
            and monotone and table.theta_hat > 0.0
        details.append(f"{name}: trunc {table.n_truncated}, theta "
                       f"{table.theta_hat:.3g}")
    _criterion(8, "game termination", ok, "; ".join(details))


BRACKET_POINTS = [[0.0, 0.0], [0.3, 0.2], [-0.4, 0.1], [0.1, -0.5], [-0.2, -0.3]]


def _run_bracketing(problem, solution, workers: int):
    S_I = Strategy.greedy_max(solution.lower)
    S_II = Strategy.greedy_min(solution.lower)
    out = []
    for pt in BRACKET_POINTS:
        est = estimate_value(pt, S_I, S_II, problem, N=20_000, seed=515,
                             cap=10**6, workers=workers)
        out.append(est)
    return out


def test_criterion_09_value_bracketing(quadratic_problem, quadratic_solution):
    lo, hi = inf_sup_boundary(quadratic_problem.boundary, quadratic_problem.domain,
                              quadratic_problem.epsilon, quadratic_problem.h)
    estimates = _run_bracketing(quadratic_problem, quadratic_solution, workers=1)
    ok = True
    worst = -np.inf
    for pt, est in zip(BRACKET_POINTS, estimates):
        target = float(quadratic_solution.lower.sample_batch(
            np.asarray(pt, dtype=np.float64)[None, :])[0])
        band = 3.0 * est.std_error + 0.02 * (hi - lo)
        dev = abs(est.mean - target)
        worst = max(worst, dev - band)
        ok = ok and est.ok and dev <= band
    _criterion(9, "value bracketing", ok,
               f"worst deviation minus band = {worst:.2e} over "
               f"{len(BRACKET_POINTS)} points")


def _run_supermartingale(problem, solution, workers: int):
    reports = {}
    for name, S_I in (("greedy adversary", Strategy.greedy_max(solution.lower)),
                      ("random adversary", Strategy.uniform_random())):
        reports[name] = check_supermartingale(problem, solution.lower, [0.0, 0.0],
                                              S_I, N=10_000, seed=77,
                                              cap=10**6, workers=workers)
    return reports


def test_criterion_10_supermartingale(quadratic_problem, quadratic_solution):
    reports = _run_supermartingale(quadratic_problem, quadratic_solution, workers=1)
    ok = all(r.passed and not r.inconclusive for r in reports.values())
    detail = "; ".join(f"{name}: worst bin excess {r.measured:.2e}"
                       for name, r in reports.items())
    _criterion(10, "supermartingale", ok, detail)


def test_criterion_11_determinism(termination_problem, termination_solution,
                                  quadratic_problem, quadratic_solution):
    def canon(obj):
        return json.dumps(obj, sort_keys=True, default=lambda o: asdict(o))

    base = (
        canon({k: asdict(v) for k, v in
               _run_termination(termination_problem, termination_solution, 1).items()}),
        canon([asdict(e) for e in
               _run_bracketing(quadratic_problem, quadratic_solution, 1)]),
        canon({k: asdict(v) for k, v in
               _run_supermartingale(quadratic_problem, quadratic_solution, 1).items()}),
    )
    again = (
        canon({k: asdict(v) for k, v in
               _run_termination(termination_problem, termination_solution, 2).items()}),
        canon([asdict(e) for e in
               _run_bracketing(quadratic_problem, quadratic_solution, 2)]),
        canon({k: asdict(v) for k, v in
               _run_supermartingale(quadratic_problem, quadratic_solution, 2).items()}),
    )
    ok = base == again
    _criterion(11, "determinism", ok,
               "termination, bracketing, and supermartingale outputs are "
               "byte-identical with 1 and 2 workers")
