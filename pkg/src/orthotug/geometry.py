"""Domains with exact signed distance, boundary strips, the boundary cutoff,
move spheres, and quadrature for the orthogonal-disk noise measure.

Conventions used throughout the package:

* a point is a length-n float array; batches of points are ``(m, n)`` arrays;
* every routine is batch-first and fully deterministic, so single-point
  wrappers and vectorized sweeps produce bitwise-identical numbers;
* the signed distance is negative inside the domain, positive outside, and
  its absolute value is the exact distance to the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class DomainViolation(ValueError):
    """A point lies outside the region where the operation is defined."""


class Region(IntEnum):
    """Classification of a point relative to the domain and its strips."""

    INTERIOR_BULK = 0   # inside, farther than epsilon from the boundary
    INNER_STRIP = 1     # inside (or on the boundary), within epsilon of it
    OUTER_STRIP = 2     # outside, within epsilon of the boundary
    OUTSIDE = 3         # outside, farther than epsilon


REGION_NAMES = {
    Region.INTERIOR_BULK: "bulk",
    Region.INNER_STRIP: "inner",
    Region.OUTER_STRIP: "outer",
    Region.OUTSIDE: "outside",
}
REGION_CODES = {name: code for code, name in REGION_NAMES.items()}


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return X


def norm_rows(X: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis, accumulated in fixed axis order."""
    X = np.asarray(X, dtype=np.float64)
    acc = X[..., 0] * X[..., 0]
    for i in range(1, X.shape[-1]):
        acc = acc + X[..., i] * X[..., i]
    return np.sqrt(acc)


@dataclass(frozen=True)
class DomainSpec:
    """A bounded primitive domain with an analytic signed distance.

    Supported shapes: ``ball(center, radius)``, ``box(lo, hi)`` and
    ``annulus(center, r_inner, r_outer)``.  Primitive shapes keep the
    distance exact, which every strip, cutoff, and termination rule
    downstream relies on.
    """

    kind: str
    center: tuple[float, ...] | None = None
    radius: float | None = None
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None
    r_inner: float | None = None
    r_outer: float | None = None

    @classmethod
    def ball(cls, center, radius: float) -> "DomainSpec":
        center = tuple(float(c) for c in np.atleast_1d(center))
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        return cls(kind="ball", center=center, radius=float(radius))

    @classmethod
    def box(cls, lo, hi) -> "DomainSpec":
        lo = tuple(float(c) for c in np.atleast_1d(lo))
        hi = tuple(float(c) for c in np.atleast_1d(hi))
        if len(lo) != len(hi):
            raise ValueError("box corners must share a dimension")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("box needs lo < hi per axis")
        return cls(kind="box", lo=lo, hi=hi)

    @classmethod
    def annulus(cls, center, r_inner: float, r_outer: float) -> "DomainSpec":
        center = tuple(float(c) for c in np.atleast_1d(center))
        if not 0 < r_inner < r_outer:
            raise ValueError("annulus needs 0 < r_inner < r_outer")
        return cls(kind="annulus", center=center,
                   r_inner=float(r_inner), r_outer=float(r_outer))

    @property
    def dim(self) -> int:
        if self.kind == "box":
            return len(self.lo)
        return len(self.center)

    def signed_distance_batch(self, X) -> np.ndarray:
        X = _as_points(X)
        if self.kind == "ball":
            return norm_rows(X - np.asarray(self.center)) - self.radius
        if self.kind == "annulus":
            rho = norm_rows(X - np.asarray(self.center))
            return np.maximum(self.r_inner - rho, rho - self.r_outer)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        d = np.abs(X - mid) - half
        outside = norm_rows(np.maximum(d, 0.0))
        inside = np.minimum(np.max(d, axis=-1), 0.0)
        return outside + inside

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box of the closed domain."""
        if self.kind == "ball":
            c = np.asarray(self.center)
            return c - self.radius, c + self.radius
        if self.kind == "annulus":
            c = np.asarray(self.center)
            return c - self.r_outer, c + self.r_outer
        return np.asarray(self.lo), np.asarray(self.hi)

    def support(self, a) -> float:
        """sup of <a, x> over the closed domain (support function)."""
        a = np.asarray(a, dtype=np.float64)
        if self.kind == "ball":
            return float(np.dot(a, self.center) + self.radius * math.sqrt(float(np.dot(a, a))))
        if self.kind == "annulus":
            return float(np.dot(a, self.center) + self.r_outer * math.sqrt(float(np.dot(a, a))))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return float(np.sum(np.maximum(a * lo, a * hi)))

    def boundary_radius_range(self, q) -> tuple[float, float]:
        """Range of |x - q| over the domain boundary."""
        q = np.asarray(q, dtype=np.float64)
        if self.kind == "ball":
            d = float(norm_rows(q - np.asarray(self.center))[()])
            return abs(d - self.radius), d + self.radius
        if self.kind == "annulus":
            d = float(norm_rows(q - np.asarray(self.center))[()])
            lo = min(abs(d - self.r_inner), abs(d - self.r_outer))
            hi = max(d + self.r_inner, d + self.r_outer)
            return lo, hi
        near = abs(float(self.signed_distance_batch(q[None, :])[0]))
        corners = np.array(np.meshgrid(*zip(self.lo, self.hi), indexing="ij"))
        corners = corners.reshape(len(self.lo), -1).T
        far = float(np.max(norm_rows(corners - q)))
        return near, far


def signed_distance(domain: DomainSpec, x) -> float:
    """Signed distance to the domain boundary (negative inside)."""
    return float(domain.signed_distance_batch(_as_points(x))[0])


def classify_region_batch(domain: DomainSpec, epsilon: float, X) -> np.ndarray:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    sd = domain.signed_distance_batch(_as_points(X))
    out = np.full(sd.shape, int(Region.OUTSIDE), dtype=np.uint8)
    inside = sd <= 0.0
    out[inside & (-sd > epsilon)] = int(Region.INTERIOR_BULK)
    out[inside & (-sd <= epsilon)] = int(Region.INNER_STRIP)
    out[(~inside) & (sd <= epsilon)] = int(Region.OUTER_STRIP)
    return out


def classify_region(domain: DomainSpec, epsilon: float, x) -> Region:
    """Locate a point: interior bulk, inner strip, outer strip, or outside.

    Boundary points (distance zero) classify as the inner strip.
    """
    return Region(int(classify_region_batch(domain, epsilon, _as_points(x))[0]))


def delta_from_sd(sd: np.ndarray, epsilon: float) -> np.ndarray:
    """Boundary cutoff as a function of signed distance.

    0 deep inside, ``1 - dist/epsilon`` across the inner strip, 1 outside.
    """
    sd = np.asarray(sd, dtype=np.float64)
    dist = -sd
    inner = 1.0 - dist / epsilon
    out = np.where(sd > 0.0, 1.0, np.where(dist > epsilon, 0.0, inner))
    return out


def cutoff_delta_batch(domain: DomainSpec, epsilon: float, X) -> np.ndarray:
    X = _as_points(X)
    sd = domain.signed_distance_batch(X)
    if np.any(sd > epsilon):
        raise DomainViolation("point outside the thickened domain")
    return delta_from_sd(sd, epsilon)


def cutoff_delta(domain: DomainSpec, epsilon: float, x) -> float:
    """The boundary cutoff at one point of the thickened domain."""
    return float(cutoff_delta_batch(domain, epsilon, _as_points(x))[0])


@dataclass(frozen=True)
class DirectionSet:
    """Finite, antipodally closed move set on the radius-epsilon sphere.

    Vectors are stored as matched pairs: entry ``j + M/2`` is the exact
    floating-point negation of entry ``j``.
    """

    epsilon: float
    vectors: np.ndarray  # (M, n)

    def __post_init__(self):
        v = self.vectors
        M, n = v.shape
        if M % 2 != 0:
            raise ValueError("direction count must be even")
        if M < 2 * n:
            raise ValueError("need at least 2n directions")
        norms = norm_rows(v)
        if np.any(np.abs(norms - self.epsilon) > 1e-12 * self.epsilon):
            raise ValueError("direction vectors must have norm epsilon")
        if not np.array_equal(v[M // 2:], -v[: M // 2]):
            raise ValueError("direction set is not antipodally paired")
        v.setflags(write=False)

    def __len__(self) -> int:
        return self.vectors.shape[0]


def make_direction_set(epsilon: float, n: int, M: int) -> DirectionSet:
    """Discretize the move sphere with M antipodally paired directions.

    ``M == 2n`` gives the signed coordinate axes exactly.  Otherwise n=2
    uses equally spaced angles and n=3 a symmetrized spherical Fibonacci
    set; both build one half and append exact negations.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if M % 2 != 0:
        raise ValueError("M must be even (antipodal closure)")
    if M < 2 * n:
        raise ValueError("M must be at least 2n")
    half = M // 2
    if M == 2 * n:
        first = epsilon * np.eye(n)
    elif n == 2:
        angles = 2.0 * math.pi * np.arange(half) / M
        first = epsilon * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    elif n == 3:
        i = np.arange(half, dtype=np.float64)
        z = (i + 0.5) / half
        r = np.sqrt(1.0 - z * z)
        phi = i * GOLDEN_ANGLE
        first = epsilon * np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        raise ValueError("direction sets beyond the coordinate axes are only "
                         "built for n in {2, 3}")
    vectors = np.concatenate([first, -first], axis=0)
    return DirectionSet(epsilon=float(epsilon), vectors=vectors)


def orthonormal_complement(v) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to ``v``.

    Built from the Householder reflection about the dominant axis, so the
    basis is a deterministic function of the direction alone.  Returns an
    ``(n-1, n)`` array of rows.
    """
    v = np.asarray(v, dtype=np.float64)
    nrm = float(norm_rows(v)[()])
    if nrm == 0.0:
        raise ValueError("zero vector has no orthogonal complement")
    u = v / nrm
    n = u.shape[0]
    k = int(np.argmax(np.abs(u)))
    s = 1.0 if u[k] >= 0.0 else -1.0
    w = u.copy()
    w[k] += s
    H = np.eye(n) - (2.0 / np.dot(w, w)) * np.outer(w, w)
    cols = [j for j in range(n) if j != k]
    return H[:, cols].T.copy()


def minimal_rotation(v_from, v_to) -> np.ndarray:
    """Rotation taking ``v_from`` to ``v_to`` and fixing their common complement.

    For equal-norm inputs the rotation maps the disk orthogonal to
    ``v_from`` onto the disk orthogonal to ``v_to`` while moving every
    point z by at most ``|z| |v_from - v_to| / |v_from|``.
    """
    v1 = np.asarray(v_from, dtype=np.float64)
    v2 = np.asarray(v_to, dtype=np.float64)
    u1 = v1 / float(norm_rows(v1)[()])
    u2 = v2 / float(norm_rows(v2)[()])
    c = float(np.dot(u1, u2))
    if c <= -1.0 + 1e-12:
        raise ValueError("antipodal directions have no unique minimal rotation")
    n = u1.shape[0]
    w = u1 + u2
    return np.eye(n) - np.outer(w, w) / (1.0 + c) + 2.0 * np.outer(u2, u1)


@dataclass(frozen=True)
class DiskRule:
    """Quadrature for the uniform probability measure on the orthogonal disk.

    Nodes are offsets perpendicular to the move direction with |z| <= eps;
    weights are nonnegative, sum to one, and the node set is symmetric
    under z -> -z with matched weights by construction.
    """

    nodes: np.ndarray    # (Kt, n)
    weights: np.ndarray  # (Kt,)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return self.nodes.shape[0]


def _gauss_symmetric(K: int) -> tuple[np.ndarray, np.ndarray]:
    # Gauss-Legendre on [-1, 1], forced exactly symmetric about 0.
    xs, ws = np.polynomial.legendre.leggauss(K)
    for i in range(K // 2):
        xs[i] = -xs[K - 1 - i]
        ws[i] = ws[K - 1 - i]
    if K % 2 == 1:
        xs[K // 2] = 0.0
    return xs, ws


def disk_quadrature(v, epsilon: float, K: int) -> DiskRule:
    """Quadrature nodes and weights for the disk orthogonal to ``v``.

    n=2: the disk is a segment; symmetric Gauss-Legendre on [-eps, eps]
    with the uniform density folded into the weights.  n=3: a tensor rule,
    Gauss in radius (weighted by the radius, normalized over the 2-disk)
    times 2K equispaced angles built as exact +/- pairs.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if n == 1:
        raise ValueError("the orthogonal disk degenerates in dimension 1")
    if n > 3:
        raise ValueError("disk quadrature is only built for n in {2, 3}")
    if K < 2:
        raise ValueError("need at least two quadrature nodes")
    nrm = float(norm_rows(v)[()])
    if abs(nrm - epsilon) > 1e-12 * epsilon:
        raise ValueError("move vector must lie on the epsilon sphere")
    basis = orthonormal_complement(v)
    if n == 2:
        xs, ws = _gauss_symmetric(K)
        nodes = (epsilon * xs)[:, None] * basis[0][None, :]
        weights = ws / 2.0
        return DiskRule(nodes=nodes, weights=weights)
    xs, ws = np.polynomial.legendre.leggauss(K)
    radii = epsilon * (xs + 1.0) / 2.0
    radial_w = ws * (epsilon / 2.0)
    J = 2 * K
    angles = 2.0 * math.pi * np.arange(K) / J
    dirs = np.cos(angles)[:, None] * basis[0][None, :] + \
        np.sin(angles)[:, None] * basis[1][None, :]
    pos = radii[:, None, None] * dirs[None, :, :]
    pos = pos.reshape(-1, n)
    w_half = (2.0 * (radial_w * radii) / (J * epsilon * epsilon))
    w_half = np.repeat(w_half, K)
    nodes = np.concatenate([pos, -pos], axis=0)
    weights = np.concatenate([w_half, w_half], axis=0)
    return DiskRule(nodes=nodes, weights=weights)
