"""Tug-of-war with orthogonal noise.

Solves the boundary-corrected dynamic programming equation tied to the
p-Laplacian by two-sided monotone value iteration, simulates the
two-player game that realizes it, and checks the structural theory as
executable properties.
"""

from .geometry import (
    DirectionSet,
    DiskRule,
    DomainSpec,
    DomainViolation,
    Region,
    classify_region,
    cutoff_delta,
    disk_quadrature,
    make_direction_set,
    minimal_rotation,
    orthonormal_complement,
    signed_distance,
)
from .field import (
    AnalyticField,
    BoundarySpec,
    Grid,
    SamplingViolation,
    ScalarField,
    boundary_value,
    field_from_function,
    inf_sup_boundary,
    lipschitz_estimate,
    make_grid,
    sample,
)
from .dpp import (
    Problem,
    apply_I,
    apply_I_point,
    coefficients,
    direction_value,
    tilde_I,
)
from .solver import Solution, iterate, residual, solve
from .game import (
    GameState,
    GameStatus,
    Strategy,
    Trajectory,
    block_turn_bound,
    estimate_value,
    exit_time_stats,
    greedy_move,
    play,
    step,
)
from .verify import (
    CheckReport,
    check_lipschitz_bounds,
    check_max_principle,
    check_operator_monotone,
    check_supermartingale,
    check_uniqueness_bracket,
    compare_analytic,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticField", "BoundarySpec", "CheckReport", "DirectionSet", "DiskRule",
    "DomainSpec", "DomainViolation", "GameState", "GameStatus", "Grid",
    "Problem", "Region", "SamplingViolation", "ScalarField", "Solution",
    "Strategy", "Trajectory", "apply_I", "apply_I_point", "block_turn_bound",
    "boundary_value", "check_lipschitz_bounds", "check_max_principle",
    "check_operator_monotone", "check_supermartingale",
    "check_uniqueness_bracket", "classify_region", "coefficients",
    "compare_analytic", "cutoff_delta", "direction_value", "disk_quadrature",
    "estimate_value", "exit_time_stats", "field_from_function", "greedy_move",
    "inf_sup_boundary", "iterate", "lipschitz_estimate", "make_direction_set",
    "make_grid", "minimal_rotation", "orthonormal_complement", "play",
    "residual", "sample", "signed_distance", "solve", "step", "tilde_I",
]
