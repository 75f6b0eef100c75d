"""Two-sided monotone value iteration and the solution certificate.

Iteration starts from the constant infimum of the boundary data (rising)
or the constant supremum (falling).  The operator is monotone, so the two
sequences are nodewise monotone and bracket each other at every sweep; the
certificate is that both sides converge and their gap stays within
``10 * tol``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dpp import OperatorKernel, Problem
from .field import Grid, ScalarField, inf_sup_boundary, supported_mask
from .geometry import Region, classify_region_batch

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000


def start_field(problem: Problem, grid: Grid, value: float) -> ScalarField:
    """Constant field over the thickened domain, boundary extension on the
    supported shell."""
    coords = grid.node_coords
    region = classify_region_batch(problem.domain, problem.epsilon, coords)
    supp = supported_mask(grid, problem.domain, problem.epsilon)
    vals = np.full(grid.size, np.nan)
    vals[region != int(Region.OUTSIDE)] = value
    halo = (region == int(Region.OUTSIDE)) & supp
    vals[halo] = problem.boundary.evaluate_batch(coords[halo])
    return ScalarField(grid=grid, values=vals, region=region, supported=supp)


@dataclass
class IterationResult:
    field: ScalarField
    iterations: int
    residual: float
    converged: bool
    last_diff: float
    monotone_defect: float  # max violation of the expected monotone direction


def _iterate_values(kernel: OperatorKernel, values: np.ndarray, sign: float,
                    tol: float, max_iter: int) -> tuple[np.ndarray, int, bool, float, float]:
    mask = kernel.non_outside()
    defect = 0.0
    diff = np.inf
    k = 0
    while k < max_iter:
        new = kernel.sweep(values)
        step = new[mask] - values[mask]
        diff = float(np.max(np.abs(step)))
        defect = max(defect, float(np.max(-sign * step)))
        values = new
        k += 1
        if diff <= tol:
            return values, k, True, diff, defect
    return values, k, False, diff, defect


def iterate(problem: Problem, side: str, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER, grid: Grid | None = None) -> IterationResult:
    """Monotone fixed-point iteration from below or above.

    Non-convergence is reported through the result (``converged`` False,
    achieved residual recorded), never silently accepted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if side not in ("below", "above"):
        raise ValueError("side must be 'below' or 'above'")
    if grid is None:
        grid = problem.make_grid()
    dirs, rules = problem.move_kit()
    kernel = OperatorKernel(problem, grid, dirs, rules)
    lo, hi = inf_sup_boundary(problem.boundary, problem.domain, problem.epsilon, problem.h)
    u0 = start_field(problem, grid, lo if side == "below" else hi)
    sign = 1.0 if side == "below" else -1.0
    values, k, ok, diff, defect = _iterate_values(kernel, u0.values, sign, tol, max_iter)
    res = _residual_values(kernel, values)
    return IterationResult(field=u0.with_values(values), iterations=k, residual=res,
                           converged=ok, last_diff=diff, monotone_defect=defect)


def _residual_values(kernel: OperatorKernel, values: np.ndarray) -> float:
    mask = kernel.non_outside()
    swept = kernel.sweep(values)
    return float(np.max(np.abs(swept[mask] - values[mask])))


def residual(problem: Problem, field: ScalarField) -> float:
    """Sup-norm defect of the fixed-point equation over in-strip nodes."""
    dirs, rules = problem.move_kit()
    kernel = OperatorKernel(problem, field.grid, dirs, rules)
    return _residual_values(kernel, field.values)


@dataclass
class Solution:
    """Two-sided solve outcome with the bracketing certificate."""

    lower: ScalarField
    upper: ScalarField
    gap: float
    residual_lower: float
    residual_upper: float
    iterations_lower: int
    iterations_upper: int
    converged_lower: bool
    converged_upper: bool
    monotone_defect_lower: float
    monotone_defect_upper: float
    bracket_defect: float   # max over sweeps of (lower - upper), should be <= 0
    gap_tol: float
    gap_witness: tuple[float, ...]
    tol: float

    @property
    def converged(self) -> bool:
        return self.converged_lower and self.converged_upper

    @property
    def ok(self) -> bool:
        return self.converged and self.gap <= self.gap_tol

    def summary(self, problem: Problem) -> dict:
        return {
            "gap": self.gap,
            "residual_lower": self.residual_lower,
            "residual_upper": self.residual_upper,
            "iterations_lower": self.iterations_lower,
            "iterations_upper": self.iterations_upper,
            "p": problem.p,
            "alpha_zero": problem.alpha_zero,
            "n": problem.n,
            "epsilon": problem.epsilon,
            "M": problem.M,
            "K": problem.K,
            "h": problem.h,
            "tol": self.tol,
            "converged": self.converged,
            "certificate_ok": self.ok,
            "gap_tol": self.gap_tol,
            "gap_witness": list(self.gap_witness),
            "monotone_defect_lower": self.monotone_defect_lower,
            "monotone_defect_upper": self.monotone_defect_upper,
            "bracket_defect": self.bracket_defect,
        }


def solve(problem: Problem, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER) -> Solution:
    """Run both monotone iterations in lockstep and certify the gap.

    Sweeping continues until each side's successive difference is within
    ``tol`` and the nodewise gap (upper minus lower) is within
    ``10 * tol``; the gap keeps contracting geometrically once the
    per-side criteria hold, so the joint criterion terminates, and a gap
    certificate failure at ``max_iter`` names the worst node.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    gap_tol = 10.0 * tol
    grid = problem.make_grid()
    dirs, rules = problem.move_kit()
    kernel = OperatorKernel(problem, grid, dirs, rules)
    mask = kernel.non_outside()
    lo, hi = inf_sup_boundary(problem.boundary, problem.domain, problem.epsilon, problem.h)
    below = start_field(problem, grid, lo)
    above = start_field(problem, grid, hi)
    vals_lo = below.values
    vals_hi = above.values

    k_lo = k_hi = 0
    done_lo = done_hi = False
    defect_lo = defect_hi = 0.0
    bracket = float(np.max(vals_lo[mask] - vals_hi[mask]))
    gap_now = float(np.max(vals_hi[mask] - vals_lo[mask]))
    while not (done_lo and done_hi and gap_now <= gap_tol):
        new = kernel.sweep(vals_lo)
        step = new[mask] - vals_lo[mask]
        defect_lo = max(defect_lo, float(np.max(-step)))
        done_lo = float(np.max(np.abs(step))) <= tol
        vals_lo = new
        k_lo += 1

        new = kernel.sweep(vals_hi)
        step = new[mask] - vals_hi[mask]
        defect_hi = max(defect_hi, float(np.max(step)))
        done_hi = float(np.max(np.abs(step))) <= tol
        vals_hi = new
        k_hi += 1

        bracket = max(bracket, float(np.max(vals_lo[mask] - vals_hi[mask])))
        gap_now = float(np.max(vals_hi[mask] - vals_lo[mask]))
        if k_lo >= max_iter:
            break

    diff = vals_hi - vals_lo
    masked = np.where(mask, diff, -np.inf)
    worst = int(np.argmax(masked))
    gap = float(masked[worst])
    witness = tuple(float(c) for c in grid.node_coords[worst])
    return Solution(
        lower=below.with_values(vals_lo),
        upper=above.with_values(vals_hi),
        gap=gap,
        residual_lower=_residual_values(kernel, vals_lo),
        residual_upper=_residual_values(kernel, vals_hi),
        iterations_lower=k_lo,
        iterations_upper=k_hi,
        converged_lower=done_lo,
        converged_upper=done_hi,
        monotone_defect_lower=defect_lo,
        monotone_defect_upper=defect_hi,
        bracket_defect=bracket,
        gap_tol=gap_tol,
        gap_witness=witness,
        tol=tol,
    )


def write_solution(solution: Solution, problem: Problem, outdir) -> dict:
    """Persist the two fields as CSV plus the summary JSON; returns the summary."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    solution.lower.to_csv(outdir / "lower.csv")
    solution.upper.to_csv(outdir / "upper.csv")
    summary = solution.summary(problem)
    with open(outdir / "solve_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def load_solution_fields(outdir) -> tuple[ScalarField, ScalarField, dict]:
    """Load fields and summary written by :func:`write_solution`."""
    outdir = Path(outdir)
    lower = ScalarField.from_csv(outdir / "lower.csv")
    upper = ScalarField.from_csv(outdir / "upper.csv")
    with open(outdir / "solve_summary.json") as fh:
        summary = json.load(fh)
    return lower, upper, summary
