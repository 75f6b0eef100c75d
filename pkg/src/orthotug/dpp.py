"""The dynamic programming operator for tug-of-war with orthogonal noise.

Per direction v on the epsilon sphere, the direction value is

    W(x, v) = alpha u(x + v) + beta * sum_k w_k u(x + z_k),

with (z_k, w_k) the orthogonal-disk quadrature.  The mean operator takes
half the sum of the best and worst direction values; the boundary-corrected
operator blends it with the boundary data through the cutoff.  All sweeps
evaluate the previous iterate only (Jacobi style), so monotonicity holds
nodewise and exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .geometry import (
    DirectionSet,
    DiskRule,
    DomainSpec,
    DomainViolation,
    Region,
    classify_region,
    classify_region_batch,
    delta_from_sd,
    disk_quadrature,
    make_direction_set,
)
from .field import (
    BoundarySpec,
    Grid,
    ScalarField,
    gather,
    interp_pack,
    make_grid,
    supported_mask,
)


def coefficients(p: float | None, n: int, alpha_zero: bool = False) -> tuple[float, float]:
    """Averaging coefficients (alpha, beta) from p and the dimension.

    alpha = (p - 1) / (p + n), beta = (n + 1) / (p + n); the alpha_zero
    flag selects the degenerate pair (0, 1).
    """
    if n < 2:
        raise ValueError("dimension must be at least 2")
    if alpha_zero:
        return 0.0, 1.0
    if p is None or p <= 1.0:
        raise ValueError("p must exceed 1")
    return (p - 1.0) / (p + n), (n + 1.0) / (p + n)


@dataclass(frozen=True)
class Problem:
    """A solve instance: domain, boundary data, step size, and numerics.

    ``M`` directions discretize the move sphere (default 16 in n=2, 32 in
    n=3); ``K`` controls the disk quadrature; ``h`` is the lattice spacing
    (default epsilon/8, never above epsilon/4).
    """

    domain: DomainSpec
    boundary: BoundarySpec
    epsilon: float
    n: int
    p: float | None = None
    alpha_zero: bool = False
    M: int | None = None
    K: int = 8
    h: float | None = None
    alpha: float = dc_field(init=False, repr=False, default=0.0)
    beta: float = dc_field(init=False, repr=False, default=1.0)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be at least 2")
        if self.domain.dim != self.n:
            raise ValueError("domain dimension does not match n")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.alpha_zero:
            if self.p is not None:
                raise ValueError("give either p or the alpha_zero flag, not both")
        elif self.p is None or self.p <= 1.0:
            raise ValueError("p must exceed 1 unless alpha_zero is set")
        if self.M is None:
            object.__setattr__(self, "M", 16 if self.n == 2 else 32)
        if self.M % 2 != 0 or self.M < 2 * self.n:
            raise ValueError("M must be even and at least 2n")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.h is None:
            object.__setattr__(self, "h", self.epsilon / 8.0)
        if self.h <= 0 or self.h > self.epsilon / 4 + 1e-12 * self.epsilon:
            raise ValueError("h must lie in (0, epsilon/4]")
        alpha, beta = coefficients(self.p, self.n, self.alpha_zero)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    def move_kit(self) -> tuple[DirectionSet, list[DiskRule]]:
        dirs = make_direction_set(self.epsilon, self.n, self.M)
        rules = [disk_quadrature(v, self.epsilon, self.K) for v in dirs.vectors]
        return dirs, rules

    def make_grid(self) -> Grid:
        return make_grid(self.domain, self.epsilon, self.h)


def _disk_term(sampler, X: np.ndarray, rule: DiskRule) -> np.ndarray:
    acc = rule.weights[0] * sampler.sample_batch(X + rule.nodes[0])
    for k in range(1, len(rule)):
        acc = acc + rule.weights[k] * sampler.sample_batch(X + rule.nodes[k])
    return acc


def direction_values_batch(sampler, X: np.ndarray, dirs: DirectionSet,
                           rules: list[DiskRule], alpha: float, beta: float) -> np.ndarray:
    """Direction values W(x, v) for a batch of points; shape (m, M)."""
    X = np.asarray(X, dtype=np.float64)
    W = np.empty((X.shape[0], len(dirs)), dtype=np.float64)
    for j in range(len(dirs)):
        move = sampler.sample_batch(X + dirs.vectors[j])
        W[:, j] = alpha * move + beta * _disk_term(sampler, X, rules[j])
    return W


def direction_value(field, x, v, rule: DiskRule, problem: Problem) -> float:
    """W(x, v): the tug part plus the orthogonal-disk average."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    move = field.sample_batch((x + v)[None, :])
    disk = _disk_term(field, x[None, :], rule)
    return float(problem.alpha * move[0] + problem.beta * disk[0])


def tilde_I(field, x, dirs: DirectionSet, rules: list[DiskRule], problem: Problem) -> float:
    """Half the sum of the best and worst direction values at ``x``."""
    if len(dirs) == 0:
        raise ValueError("empty direction set")
    x = np.asarray(x, dtype=np.float64)
    W = direction_values_batch(field, x[None, :], dirs, rules, problem.alpha, problem.beta)[0]
    return float(0.5 * (np.max(W) + np.min(W)))


def apply_I_point(field, x, problem: Problem, dirs: DirectionSet,
                  rules: list[DiskRule]) -> float:
    """Boundary-corrected operator at one point of the thickened domain.

    On the outer strip this is the boundary data with no field reads; on
    the inner strip a cutoff-weighted blend; in the bulk the mean operator.
    """
    x = np.asarray(x, dtype=np.float64)
    region = classify_region(problem.domain, problem.epsilon, x)
    if region == Region.OUTSIDE:
        raise DomainViolation("operator applied outside the thickened domain")
    if region == Region.OUTER_STRIP:
        return float(problem.boundary.evaluate_batch(x[None, :])[0])
    t = tilde_I(field, x, dirs, rules, problem)
    if region == Region.INTERIOR_BULK:
        return t
    sd = float(problem.domain.signed_distance_batch(x[None, :])[0])
    delta = float(delta_from_sd(np.asarray([sd]), problem.epsilon)[0])
    f = float(problem.boundary.evaluate_batch(x[None, :])[0])
    return (1.0 - delta) * t + delta * f


class OperatorKernel:
    """Vectorized full-lattice sweep of the boundary-corrected operator.

    Reuses one set of interpolation stencils across sweeps; for large
    stencil tables the pack is rebuilt on the fly instead (identical
    arithmetic either way).  Node values at the supported shell beyond the
    outer strip are pinned to the boundary family's closed form.
    """

    _PACK_BYTES_LIMIT = 200_000_000

    def __init__(self, problem: Problem, grid: Grid, dirs: DirectionSet,
                 rules: list[DiskRule]):
        self.problem = problem
        self.grid = grid
        self.dirs = dirs
        self.rules = rules
        coords = grid.node_coords
        region = classify_region_batch(problem.domain, problem.epsilon, coords)
        supp = supported_mask(grid, problem.domain, problem.epsilon)
        self.region = region
        self.supported = supp
        self.idx_active = np.where(region <= int(Region.INNER_STRIP))[0]
        self.idx_outer = np.where(region == int(Region.OUTER_STRIP))[0]
        self.idx_halo = np.where((region == int(Region.OUTSIDE)) & supp)[0]
        act_region = region[self.idx_active]
        self.inner_pos = np.where(act_region == int(Region.INNER_STRIP))[0]
        self.coords_active = coords[self.idx_active]
        self.coords_inner = self.coords_active[self.inner_pos]
        self.F_outer = problem.boundary.evaluate_batch(coords[self.idx_outer]) \
            if len(self.idx_outer) else np.empty(0)
        self.F_halo = problem.boundary.evaluate_batch(coords[self.idx_halo]) \
            if len(self.idx_halo) else np.empty(0)
        self.F_inner = problem.boundary.evaluate_batch(self.coords_inner) \
            if len(self.inner_pos) else np.empty(0)
        A = len(self.idx_active)
        samples = len(dirs) * (1 + len(rules[0]))
        self._precomputed = A * samples * (1 << grid.dim) * 12 <= self._PACK_BYTES_LIMIT
        if self._precomputed:
            self._move_packs = []
            self._disk_packs = []
            for j in range(len(dirs)):
                self._move_packs.append(self._checked_pack(self.coords_active + dirs.vectors[j]))
                self._disk_packs.append([
                    self._checked_pack(self.coords_active + rules[j].nodes[k])
                    for k in range(len(rules[j]))
                ])

    def _checked_pack(self, pts: np.ndarray):
        idx, w = interp_pack(self.grid, pts)
        touched = idx[w > 0.0]
        if not np.all(self.supported[touched]):
            raise DomainViolation("operator stencil escaped the supported lattice")
        return idx, w

    def _direction_values(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        alpha, beta = self.problem.alpha, self.problem.beta
        W_max = W_min = None
        if self._precomputed:
            for j in range(len(self.dirs)):
                mi, mw = self._move_packs[j]
                move = gather(values, mi, mw)
                rule = self.rules[j]
                di, dw = self._disk_packs[j][0]
                acc = rule.weights[0] * gather(values, di, dw)
                for k in range(1, len(rule)):
                    di, dw = self._disk_packs[j][k]
                    acc = acc + rule.weights[k] * gather(values, di, dw)
                W = alpha * move + beta * acc
                if W_max is None:
                    W_max, W_min = W.copy(), W
                else:
                    np.maximum(W_max, W, out=W_max)
                    np.minimum(W_min, W, out=W_min)
        else:
            sampler = _RawSampler(self.grid, values)
            for j in range(len(self.dirs)):
                move = sampler.sample_batch(self.coords_active + self.dirs.vectors[j])
                W = alpha * move + beta * _disk_term(sampler, self.coords_active, self.rules[j])
                if W_max is None:
                    W_max, W_min = W.copy(), W
                else:
                    np.maximum(W_max, W, out=W_max)
                    np.minimum(W_min, W, out=W_min)
        return W_max, W_min

    def tilde_active(self, values: np.ndarray) -> np.ndarray:
        """Mean-operator values at the in-domain nodes."""
        W_max, W_min = self._direction_values(values)
        return 0.5 * (W_max + W_min)

    def sweep(self, values: np.ndarray) -> np.ndarray:
        """One Jacobi sweep of the boundary-corrected operator."""
        tilde = self.tilde_active(values)
        out = np.full(self.grid.size, np.nan)
        out[self.idx_active] = tilde
        if len(self.inner_pos):
            # cutoff recomputed from the analytic distance on every sweep
            sd = self.problem.domain.signed_distance_batch(self.coords_inner)
            delta = delta_from_sd(sd, self.problem.epsilon)
            out[self.idx_active[self.inner_pos]] = \
                (1.0 - delta) * tilde[self.inner_pos] + delta * self.F_inner
        out[self.idx_outer] = self.F_outer
        out[self.idx_halo] = self.F_halo
        return out

    def non_outside(self) -> np.ndarray:
        return self.region != int(Region.OUTSIDE)


class _RawSampler:
    """Interpolation over a raw value array (kernel fallback path)."""

    def __init__(self, grid: Grid, values: np.ndarray):
        self.grid = grid
        self.values = values

    def sample_batch(self, X: np.ndarray) -> np.ndarray:
        idx, w = interp_pack(self.grid, X)
        return gather(self.values, idx, w)


def apply_I(field: ScalarField, problem: Problem, dirs: DirectionSet,
            rules: list[DiskRule]) -> ScalarField:
    """Apply the boundary-corrected operator at every lattice node.

    The input field is untouched; outer-strip nodes of the result carry
    the boundary data exactly, and the supported shell carries the
    boundary family's closed-form extension.
    """
    kernel = OperatorKernel(problem, field.grid, dirs, rules)
    return field.with_values(kernel.sweep(field.values))


def apply_tilde_sweep(field: ScalarField, problem: Problem, dirs: DirectionSet,
                      rules: list[DiskRule]) -> tuple[np.ndarray, np.ndarray]:
    """Mean-operator sweep without boundary correction.

    Returns ``(values, mask)``: a full-length array holding the sweep at
    in-domain nodes (NaN elsewhere) and the in-domain node mask.
    """
    kernel = OperatorKernel(problem, field.grid, dirs, rules)
    out = np.full(field.grid.size, np.nan)
    out[kernel.idx_active] = kernel.tilde_active(field.values)
    mask = np.zeros(field.grid.size, dtype=bool)
    mask[kernel.idx_active] = True
    return out, mask
