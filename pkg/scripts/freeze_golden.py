#!/usr/bin/env python3
"""Regenerate the solver regression oracle.

Solves the quadratic-data problem at the test discretization, re-solves it
at a much finer one (twice the grid, four times the directions and disk
nodes), and only freezes the coarse rising limit into tests/data/ when the
two agree to 3e-3 in the sup norm at the coarse nodes.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np

from orthotug import BoundarySpec, DomainSpec, Problem
from orthotug.geometry import Region
from orthotug.solver import solve

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_quadratic_lower.csv"
AGREEMENT = 3e-3


def main() -> int:
    ball = DomainSpec.ball([0.0, 0.0], 1.0)
    F = BoundarySpec.quadratic([0.0, 0.0], 1.0)
    coarse = Problem(domain=ball, boundary=F, epsilon=0.3, n=2, p=2.0,
                     M=16, K=8, h=0.3 / 8)
    fine = Problem(domain=ball, boundary=F, epsilon=0.3, n=2, p=2.0,
                   M=64, K=32, h=0.3 / 16)

    t0 = time.time()
    sol_c = solve(coarse, tol=1e-7)
    print(f"coarse: {sol_c.iterations_lower} sweeps, gap {sol_c.gap:.3e}, "
          f"{time.time() - t0:.1f}s")
    t0 = time.time()
    sol_f = solve(fine, tol=1e-6)
    print(f"fine:   {sol_f.iterations_lower} sweeps, gap {sol_f.gap:.3e}, "
          f"{time.time() - t0:.1f}s")

    mask = sol_c.lower.region != int(Region.OUTSIDE)
    coords = sol_c.lower.grid.node_coords[mask]
    fine_at_coarse = sol_f.lower.sample_batch(coords)
    diff = np.abs(sol_c.lower.values[mask] - fine_at_coarse)
    print(f"sup-norm disagreement at coarse nodes: {diff.max():.3e}")
    if diff.max() > AGREEMENT:
        print(f"refusing to freeze: disagreement above {AGREEMENT}")
        return 1
    OUT.parent.mkdir(parents=True, exist_ok=True)
    sol_c.lower.to_csv(OUT)
    print(f"froze {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
