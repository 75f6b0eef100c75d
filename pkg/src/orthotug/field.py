"""Grid-sampled scalar functions on the thickened domain, multilinear
interpolation, closed-form boundary data families, and discrete Lipschitz
estimation.

The lattice covers the bounding box of the thickened domain plus a
one-cell margin.  Nodes far outside carry a NaN sentinel and are never
read; a thin shell of supported nodes just beyond the outer strip carries
the boundary family's closed-form extension so that interpolation cells
straddling the outer edge stay finite.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import (
    DomainSpec,
    DomainViolation,
    Region,
    REGION_NAMES,
    REGION_CODES,
    classify_region_batch,
    norm_rows,
)


class SamplingViolation(ValueError):
    """A sample point left the covered lattice or touched a sentinel node."""


@dataclass(frozen=True)
class Grid:
    """Uniform lattice: node i has coordinates origin + i * h per axis."""

    origin: tuple[float, ...]
    shape: tuple[int, ...]
    h: float

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def strides(self) -> tuple[int, ...]:
        s = [1] * self.dim
        for i in range(self.dim - 2, -1, -1):
            s[i] = s[i + 1] * self.shape[i + 1]
        return tuple(s)

    @cached_property
    def node_coords(self) -> np.ndarray:
        axes = [np.asarray(self.origin[i]) + self.h * np.arange(self.shape[i])
                for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.reshape(-1) for m in mesh], axis=1)
        coords.setflags(write=False)
        return coords

    def axis_coords(self, i: int) -> np.ndarray:
        return self.origin[i] + self.h * np.arange(self.shape[i])


def make_grid(domain: DomainSpec, epsilon: float, h: float) -> Grid:
    """Lattice covering the thickened domain plus a one-cell margin."""
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    if h > epsilon / 4 + 1e-12 * epsilon:
        raise ValueError("grid spacing must not exceed epsilon/4")
    lo, hi = domain.bounding_box()
    lo_g = lo - epsilon - h
    hi_g = hi + epsilon + h
    shape = []
    for i in range(len(lo_g)):
        span = float(hi_g[i] - lo_g[i])
        cells = int(math.ceil(span / h - 1e-12))
        shape.append(cells + 1)
    return Grid(origin=tuple(float(c) for c in lo_g), shape=tuple(shape), h=float(h))


def supported_mask(grid: Grid, domain: DomainSpec, epsilon: float) -> np.ndarray:
    """Nodes that may participate in interpolation of points in the
    thickened domain: everything within ``epsilon + 2 sqrt(n) h`` of the
    domain in signed distance."""
    sd = domain.signed_distance_batch(grid.node_coords)
    return sd <= epsilon + 2.0 * math.sqrt(grid.dim) * grid.h


def interp_pack(grid: Grid, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Corner indices and multilinear weights for a batch of points.

    Returns ``(idx, w)`` of shape ``(m, 2^n)``; weights are nonnegative and
    sum to one per row, with the corner order fixed (axis i <-> bit i).
    """
    X = np.asarray(X, dtype=np.float64)
    n = grid.dim
    rel = (X - np.asarray(grid.origin)) / grid.h
    # points within 1e-9 cells of a lattice plane snap onto it, so lattice
    # nodes reproduce their stored values exactly
    snapped = np.round(rel)
    rel = np.where(np.abs(rel - snapped) <= 1e-9, snapped, rel)
    if np.any(rel < -1e-9) or np.any(rel > np.asarray(grid.shape) - 1 + 1e-9):
        raise SamplingViolation("sample point outside the covered lattice")
    cell = np.floor(rel).astype(np.int64)
    for i in range(n):
        np.clip(cell[:, i], 0, grid.shape[i] - 2, out=cell[:, i])
    frac = np.clip(rel - cell, 0.0, 1.0)
    strides = grid.strides
    base = cell[:, 0] * strides[0]
    for i in range(1, n):
        base = base + cell[:, i] * strides[i]
    m = X.shape[0]
    idx = np.empty((m, 1 << n), dtype=np.int64)
    w = np.empty((m, 1 << n), dtype=np.float64)
    for c in range(1 << n):
        off = 0
        wt = None
        for i in range(n):
            if (c >> i) & 1:
                off += strides[i]
                wt = frac[:, i] if wt is None else wt * frac[:, i]
            else:
                wt = (1.0 - frac[:, i]) if wt is None else wt * (1.0 - frac[:, i])
        idx[:, c] = base + off
        w[:, c] = wt
    return idx, w


def gather(values: np.ndarray, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted corner sum shared by every interpolation path.

    Zero-weight corners are masked before the product so a sentinel NaN on
    an untouched corner cannot poison the sum.
    """
    return (np.where(w > 0.0, values[idx], 0.0) * w).sum(axis=1)


@dataclass
class ScalarField:
    """Lattice sample of a scalar function over the thickened domain.

    ``values`` are finite at supported nodes and NaN at the sentinel
    nodes; ``region`` holds the strip classification per node.  Fields are
    immutable snapshots: the arrays are marked read-only.
    """

    grid: Grid
    values: np.ndarray
    region: np.ndarray
    supported: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.size,):
            raise ValueError("values must be flat over the grid")
        if np.any(~np.isfinite(self.values[self.supported])):
            raise ValueError("supported nodes must carry finite values")
        for arr in (self.values, self.region, self.supported):
            arr.setflags(write=False)

    def sample_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        if squeeze:
            X = X[None, :]
        idx, w = interp_pack(self.grid, X)
        vals = gather(self.values, idx, w)
        if np.any(np.isnan(vals)):
            raise SamplingViolation("interpolation touched a sentinel node")
        return vals[0] if squeeze else vals

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(grid=self.grid, values=values,
                           region=self.region.copy(), supported=self.supported.copy())

    def to_csv(self, path) -> None:
        """Write one row per node: x1..xn, region, value (17 significant digits)."""
        n = self.grid.dim
        coords = self.grid.node_coords
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(n)] + ["region", "value"])
            for i in range(self.grid.size):
                row = [f"{coords[i, j]:.17g}" for j in range(n)]
                row.append(REGION_NAMES[Region(int(self.region[i]))])
                row.append(f"{self.values[i]:.17g}")
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "ScalarField":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n = len(header) - 2
            coords, regions, values = [], [], []
            for row in reader:
                coords.append([float(c) for c in row[:n]])
                regions.append(REGION_CODES[row[n]])
                values.append(float(row[n + 1]))
        coords = np.asarray(coords)
        values = np.asarray(values)
        regions = np.asarray(regions, dtype=np.uint8)
        axes = [np.unique(coords[:, i]) for i in range(n)]
        shape = tuple(len(a) for a in axes)
        if int(np.prod(shape)) != len(values):
            raise ValueError("rows do not form a full lattice")
        h = _recover_spacing(axes)
        grid = Grid(origin=tuple(float(a[0]) for a in axes), shape=shape, h=h)
        order = np.lexsort(tuple(coords[:, i] for i in range(n - 1, -1, -1)))
        return cls(grid=grid, values=values[order], region=regions[order],
                   supported=np.isfinite(values[order]))


def _recover_spacing(axes: list[np.ndarray]) -> float:
    """Spacing whose lattice regenerates the parsed axis coordinates exactly.

    Axis coordinates were generated as ``origin + h * arange``, so the
    original ``h`` is within one ulp of the end-to-end average; candidates
    are tested for an exact match before falling back to the average.
    """
    ref = max(axes, key=len)
    if len(ref) < 2:
        raise ValueError("cannot recover grid spacing from a single node")
    avg = float((ref[-1] - ref[0]) / (len(ref) - 1))
    candidates = [avg, float(np.nextafter(avg, np.inf)),
                  float(np.nextafter(avg, -np.inf)), float(ref[1] - ref[0])]
    for h in candidates:
        if all(np.array_equal(a[0] + h * np.arange(len(a)), a) for a in axes):
            return h
    return avg


class AnalyticField:
    """Closed-form function exposed through the field sampling protocol.

    Lets operator kernels be exercised against exact functions, without
    interpolation error, wherever a test has a closed-form oracle.
    """

    def __init__(self, fn):
        self.fn = fn

    def sample_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        if squeeze:
            X = X[None, :]
        vals = np.asarray(self.fn(X), dtype=np.float64)
        return vals[0] if squeeze else vals


def sample(field: ScalarField, x) -> float:
    """Multilinear interpolation of the field at a point; exact on affine data."""
    return float(field.sample_batch(np.asarray(x, dtype=np.float64)[None, :])[0])


def field_from_function(grid: Grid, domain: DomainSpec, epsilon: float, fn) -> ScalarField:
    """Sample a globally defined closed form onto the lattice."""
    region = classify_region_batch(domain, epsilon, grid.node_coords)
    supp = supported_mask(grid, domain, epsilon)
    values = np.full(grid.size, np.nan)
    values[supp] = np.asarray(fn(grid.node_coords[supp]), dtype=np.float64)
    return ScalarField(grid=grid, values=values, region=region, supported=supp)


# ---------------------------------------------------------------------------
# Boundary data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundarySpec:
    """Closed-form boundary data family, Lipschitz on the boundary strip.

    Families: ``affine(a, b)``, ``quadratic(center, scale)`` for
    scale*|x-center|^2, ``radial_pharmonic(p, center)`` for the radial
    p-harmonic profile, ``cone(vertex)`` for |x-vertex|, and ``tabulated``
    nearest-sample data with a recorded Lipschitz constant.
    """

    family: str
    a: tuple[float, ...] | None = None
    b: float | None = None
    center: tuple[float, ...] | None = None
    scale: float | None = None
    p: float | None = None
    points: tuple[tuple[float, ...], ...] | None = None
    tab_values: tuple[float, ...] | None = None
    lip: float | None = None

    @classmethod
    def affine(cls, a, b: float) -> "BoundarySpec":
        a = tuple(float(c) for c in np.atleast_1d(a))
        return cls(family="affine", a=a, b=float(b))

    @classmethod
    def constant(cls, c: float, n: int = 2) -> "BoundarySpec":
        return cls.affine(np.zeros(n), c)

    @classmethod
    def quadratic(cls, center, scale: float = 1.0) -> "BoundarySpec":
        center = tuple(float(c) for c in np.atleast_1d(center))
        return cls(family="quadratic", center=center, scale=float(scale))

    @classmethod
    def radial_pharmonic(cls, p: float, center) -> "BoundarySpec":
        if p <= 1:
            raise ValueError("radial profile needs p > 1")
        center = tuple(float(c) for c in np.atleast_1d(center))
        return cls(family="radial_pharmonic", p=float(p), center=center)

    @classmethod
    def cone(cls, vertex) -> "BoundarySpec":
        center = tuple(float(c) for c in np.atleast_1d(vertex))
        return cls(family="cone", center=center)

    @classmethod
    def tabulated(cls, points, values, lipschitz: float) -> "BoundarySpec":
        pts = tuple(tuple(float(c) for c in p) for p in points)
        vals = tuple(float(v) for v in values)
        if len(pts) != len(vals) or not pts:
            raise ValueError("tabulated data needs matching nonempty points/values")
        return cls(family="tabulated", points=pts, tab_values=vals, lip=float(lipschitz))

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if self.family == "affine":
            a = np.asarray(self.a)
            acc = X[:, 0] * a[0]
            for i in range(1, len(a)):
                acc = acc + X[:, i] * a[i]
            return acc + self.b
        if self.family == "quadratic":
            d = X - np.asarray(self.center)
            return self.scale * (norm_rows(d) ** 2)
        if self.family == "cone":
            return norm_rows(X - np.asarray(self.center))
        if self.family == "radial_pharmonic":
            r = norm_rows(X - np.asarray(self.center))
            n = X.shape[1]
            if abs(self.p - n) < 1e-14:
                return np.log(r)
            kappa = (self.p - n) / (self.p - 1.0)
            return r ** kappa
        pts = np.asarray(self.points)
        d2 = np.zeros((X.shape[0], pts.shape[0]))
        for i in range(X.shape[1]):
            diff = X[:, i][:, None] - pts[:, i][None, :]
            d2 += diff * diff
        nearest = np.argmin(d2, axis=1)
        return np.asarray(self.tab_values)[nearest]

    def lipschitz_constant(self, domain: DomainSpec, epsilon: float) -> float:
        """Analytic Lipschitz constant of the family over the boundary strip."""
        if self.family == "affine":
            return float(norm_rows(np.asarray(self.a))[()])
        if self.family == "tabulated":
            return self.lip
        if self.family == "cone":
            return 1.0
        rmin, rmax = domain.boundary_radius_range(np.asarray(self.center))
        rmin = max(rmin - epsilon, 0.0)
        rmax = rmax + epsilon
        if self.family == "quadratic":
            return abs(self.scale) * 2.0 * rmax
        n = domain.dim
        if rmin <= 0:
            raise ValueError("radial profile is singular inside the strip")
        if abs(self.p - n) < 1e-14:
            return 1.0 / rmin
        kappa = (self.p - n) / (self.p - 1.0)
        return max(abs(kappa * rmin ** (kappa - 1.0)), abs(kappa * rmax ** (kappa - 1.0)))

    def analytic_extrema(self, domain: DomainSpec, epsilon: float) -> tuple[float, float] | None:
        """Exact strip extrema when the family/domain pair permits them."""
        if self.family == "affine":
            a = np.asarray(self.a)
            na = float(norm_rows(a)[()])
            hi = domain.support(a) + epsilon * na + self.b
            lo = -(domain.support(-a) + epsilon * na) + self.b
            return lo, hi
        if self.family in ("quadratic", "cone", "radial_pharmonic"):
            rmin, rmax = domain.boundary_radius_range(np.asarray(self.center))
            rmin = max(rmin - epsilon, 0.0)
            rmax = rmax + epsilon
            if self.family == "quadratic":
                vals = sorted((self.scale * rmin * rmin, self.scale * rmax * rmax))
                return float(vals[0]), float(vals[1])
            if self.family == "cone":
                return float(rmin), float(rmax)
            if rmin <= 0:
                return None
            n = domain.dim
            if abs(self.p - n) < 1e-14:
                return math.log(rmin), math.log(rmax)
            kappa = (self.p - n) / (self.p - 1.0)
            vals = sorted((rmin ** kappa, rmax ** kappa))
            return float(vals[0]), float(vals[1])
        return None


def boundary_value(F: BoundarySpec, x, domain: DomainSpec, epsilon: float) -> float:
    """Evaluate boundary data at a point of the boundary strip."""
    x = np.asarray(x, dtype=np.float64)
    sd = float(domain.signed_distance_batch(x[None, :])[0])
    if abs(sd) > epsilon:
        raise DomainViolation(
            f"point at signed distance {sd:.3g} is outside the boundary strip")
    return float(F.evaluate_batch(x[None, :])[0])


def inf_sup_boundary(F: BoundarySpec, domain: DomainSpec, epsilon: float,
                     h: float | None = None) -> tuple[float, float]:
    """Infimum and supremum of the boundary data over the strip.

    Dense lattice sampling of the strip at resolution h/2, replaced by the
    family's analytic extrema whenever those are available (they dominate
    any sample).
    """
    exact = F.analytic_extrema(domain, epsilon)
    if exact is not None:
        return exact
    if h is None:
        h = epsilon / 8.0
    step = h / 2.0
    lo, hi = domain.bounding_box()
    axes = [np.arange(lo[i] - epsilon, hi[i] + epsilon + step, step)
            for i in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    sd = domain.signed_distance_batch(pts)
    strip = np.abs(sd) <= epsilon
    vals = F.evaluate_batch(pts[strip])
    return float(np.min(vals)), float(np.max(vals))


# ---------------------------------------------------------------------------
# Discrete Lipschitz estimation
# ---------------------------------------------------------------------------

def _neighbor_offsets(n: int) -> list[tuple[int, ...]]:
    # Positive-lexicographic half of {-1,0,1}^n \ {0}: each unordered node
    # pair is visited once, axes and diagonals included.
    offsets = []
    for raw in np.ndindex(*([3] * n)):
        off = tuple(int(r) - 1 for r in raw)
        if all(o == 0 for o in off):
            continue
        if off > tuple([0] * n):
            offsets.append(off)
    return offsets


def discrete_lipschitz(grid: Grid, values: np.ndarray, include: np.ndarray) -> float:
    """Max |du|/|dx| over adjacent node pairs (diagonals included) whose
    endpoints are both in ``include``."""
    shape = grid.shape
    vals = values.reshape(shape)
    mask = include.reshape(shape)
    best = 0.0
    for off in _neighbor_offsets(grid.dim):
        src = tuple(slice(None, s - o if o else None) if o >= 0 else slice(-o, None)
                    for s, o in zip(shape, off))
        dst = tuple(slice(o, None) if o >= 0 else slice(None, s + o)
                    for s, o in zip(shape, off))
        both = mask[src] & mask[dst]
        if not np.any(both):
            continue
        du = np.abs(vals[dst][both] - vals[src][both])
        dist = grid.h * math.sqrt(sum(o * o for o in off))
        best = max(best, float(np.max(du)) / dist)
    return best


def lipschitz_estimate(field: ScalarField) -> float:
    """Discrete Lipschitz surrogate over nodes of the thickened domain."""
    include = (field.region != int(Region.OUTSIDE)) & np.isfinite(field.values)
    return discrete_lipschitz(field.grid, field.values, include)
