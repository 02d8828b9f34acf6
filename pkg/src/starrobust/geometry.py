"""Star-shaped constraint sets.

Every other module touches a constraint set only through the :class:`StarSet`
interface: a membership predicate, a star center, an optional diameter and a
candidate generator that discretizes ``B(nu, r) & K`` on a lattice.

Lattices are anchored at the set's center, so candidate lists produced for
different balls are subsets of one global lattice. Tree construction and
verification rely on that alignment.
"""
from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist, squareform

from ._kernels import lattice_ball

TAU_MEM = 1e-9
LEX_TOL = 1e-12
MAX_LATTICE_POINTS = 6_000_000


class DegenerateSetError(ValueError):
    """Raised when an operation needs a set with positive diameter."""


class UnboundedSetError(ValueError):
    """Raised when an operation needs a bounded set."""


def as_point(p, dimension: int | None = None) -> np.ndarray:
    """Coerce ``p`` to a finite 1-D float array, checking its length."""
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"expected a vector, got shape {arr.shape}")
    if dimension is not None and arr.shape[0] != dimension:
        raise ValueError(f"dimension mismatch: point has length {arr.shape[0]}, set has {dimension}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite entries")
    return arr


def lex_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting ``points`` lexicographically (first coordinate slowest).

    Coordinates are compared after rounding to ``LEX_TOL`` so that values which
    differ only by floating point noise are treated as equal. Ties keep their
    input order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    q = np.round(pts / LEX_TOL) * LEX_TOL
    keys = tuple(q[:, k] for k in range(q.shape[1] - 1, -1, -1))
    return np.lexsort(keys).astype(np.int64)


def lex_sorted(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts[lex_order(pts)]


def lex_less(a, b) -> bool:
    """True when ``a`` precedes ``b`` in the tolerant lexicographic order."""
    for x, y in zip(np.asarray(a, float), np.asarray(b, float)):
        if abs(x - y) <= LEX_TOL:
            continue
        return bool(x < y)
    return False


def _lattice_box(anchor: np.ndarray, spacing: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """All points ``anchor + spacing * k`` (integer k) inside the box [lo, hi], in lex order."""
    kmin = np.ceil((lo - anchor) / spacing - 1e-9).astype(np.int64)
    kmax = np.floor((hi - anchor) / spacing + 1e-9).astype(np.int64)
    if np.any(kmax < kmin):
        return np.zeros((0, anchor.shape[0]))
    counts = kmax - kmin + 1
    total = int(np.prod(counts.astype(float)))
    if total > MAX_LATTICE_POINTS:
        raise MemoryError(
            f"candidate lattice would hold {total} points; increase the pitch or shrink the ball"
        )
    axes = [anchor[k] + spacing * np.arange(kmin[k], kmax[k] + 1) for k in range(anchor.shape[0])]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _in_ball(points: np.ndarray, nu: np.ndarray, radius: float) -> np.ndarray:
    d2 = ((points - nu) ** 2).sum(axis=1)
    slack = radius * (1.0 + LEX_TOL) + LEX_TOL
    return d2 <= slack * slack


class StarSet(ABC):
    """A star-shaped subset of R^n with a lattice candidate generator."""

    kind: str = "abstract"

    def __init__(self, dimension: int, center):
        if int(dimension) < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        self._center = as_point(center, self.dimension)

    @property
    def center(self) -> np.ndarray:
        return self._center.copy()

    @property
    def diameter(self) -> float | None:
        """The l2 diameter, or ``None`` for unbounded sets."""
        return None

    @property
    def bounded(self) -> bool:
        return self.diameter is not None

    @property
    def intrinsic_dimension(self) -> int:
        """Dimension of the pieces the lattice lives on; sets the lattice spacing."""
        return self.dimension

    def lattice_spacing(self, pitch: float) -> float:
        """Spacing that keeps every lattice cell diagonal at most ``pitch``."""
        if not pitch > 0:
            raise ValueError("pitch must be positive")
        return pitch / math.sqrt(self.intrinsic_dimension)

    def _scale(self) -> float:
        d = self.diameter
        return max(1.0, d if d is not None else 1.0, float(np.abs(self._center).max(initial=0.0)))

    @abstractmethod
    def contains_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (m, n) array."""

    def contains(self, p) -> bool:
        """Membership of one point, up to a relative tolerance ``TAU_MEM``."""
        return bool(self.contains_many(as_point(p, self.dimension)[None, :])[0])

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.dimension
        return np.full(n, -np.inf), np.full(n, np.inf)

    def _raw_candidates(self, nu: np.ndarray, radius: float, spacing: float) -> np.ndarray:
        """Lattice members of the ball, already in lexicographic order."""
        lo, hi = self.bounding_box()
        lo = np.maximum(lo, nu - radius)
        hi = np.minimum(hi, nu + radius)
        kmin = np.ceil((lo - self._center) / spacing - 1e-9).astype(np.int64)
        kmax = np.floor((hi - self._center) / spacing + 1e-9).astype(np.int64)
        if np.any(kmax < kmin):
            return np.zeros((0, self.dimension))
        if float(np.prod((kmax - kmin + 1).astype(float))) > MAX_LATTICE_POINTS:
            raise MemoryError("candidate lattice too large; increase the pitch or shrink the ball")
        pts = lattice_ball(self._center, float(spacing), kmin, kmax, nu, float(radius))
        if pts.shape[0] == 0:
            return pts
        return pts[self.contains_many(pts)]

    def candidates(self, nu, radius: float, pitch: float) -> np.ndarray:
        """Lattice members of ``B(nu, radius) & K`` in lexicographic order.

        The lattice is anchored at :attr:`center` with spacing
        :meth:`lattice_spacing`. When the lattice misses a tiny ball entirely
        and ``nu`` itself is a member, ``nu`` is returned so the ball is still
        represented. Subclasses emit lattice points in lexicographic order.
        """
        nu = as_point(nu, self.dimension)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        pts = self._raw_candidates(nu, float(radius), self.lattice_spacing(pitch))
        if pts.shape[0] == 0 and self.contains(nu):
            return nu[None, :].copy()
        return pts

    def spec(self) -> dict[str, Any]:
        raise NotImplementedError

    def key(self) -> str:
        """A hashable identity used for caching entropy estimates."""
        return repr(sorted(self.spec().items()))

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.spec().items() if k != "kind")
        return f"{type(self).__name__}({args})"


class Singleton(StarSet):
    kind = "singleton"

    def __init__(self, point):
        p = as_point(point)
        super().__init__(p.shape[0], p)

    @property
    def diameter(self) -> float:
        return 0.0

    def bounding_box(self):
        return self.center, self.center

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        return np.sqrt(((pts - self._center) ** 2).sum(axis=1)) <= TAU_MEM * self._scale()

    def candidates(self, nu, radius, pitch):
        nu = as_point(nu, self.dimension)
        if _in_ball(self._center[None, :], nu, radius)[0]:
            return self.center[None, :]
        return np.zeros((0, self.dimension))

    def spec(self):
        return {"kind": self.kind, "point": self._center.tolist()}


class EuclideanBall(StarSet):
    kind = "ball"

    def __init__(self, center, radius: float):
        c = as_point(center)
        super().__init__(c.shape[0], c)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.radius = float(radius)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def bounding_box(self):
        return self._center - self.radius, self._center + self.radius

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        dist = np.sqrt(((pts - self._center) ** 2).sum(axis=1))
        return dist <= self.radius + TAU_MEM * self._scale()

    def spec(self):
        return {"kind": self.kind, "center": self._center.tolist(), "radius": self.radius}


class Hyperrectangle(StarSet):
    kind = "box"

    def __init__(self, lower, upper):
        lo, hi = as_point(lower), as_point(upper)
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ValueError("need lower <= upper with matching lengths")
        super().__init__(lo.shape[0], (lo + hi) / 2.0)
        self.lower, self.upper = lo, hi

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        tol = TAU_MEM * self._scale()
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)

    def spec(self):
        return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


def Interval(a: float = 0.0, b: float = 1.0) -> Hyperrectangle:
    """The closed interval [a, b] as a one-dimensional box."""
    return Hyperrectangle([a], [b])


class StarCross(StarSet):
    """Union of axis-parallel segments through a common center.

    Arm ``k`` is ``{center + t e_k : |t| <= half_lengths[k]}``. The set is
    star-shaped about the center but not convex once two arms are present.
    """

    kind = "star_cross"

    def __init__(self, center, half_lengths):
        c = as_point(center)
        super().__init__(c.shape[0], c)
        a = np.broadcast_to(np.asarray(half_lengths, float), c.shape).copy()
        if np.any(a < 0):
            raise ValueError("half lengths must be nonnegative")
        self.half_lengths = a

    @property
    def intrinsic_dimension(self) -> int:
        return 1

    @property
    def diameter(self) -> float:
        # Two arms i != j give sqrt(a_i^2 + a_j^2) <= 2 max(a), so one arm wins.
        return float(2.0 * self.half_lengths.max())

    def bounding_box(self):
        return self._center - self.half_lengths, self._center + self.half_lengths

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        tol = TAU_MEM * self._scale()
        off = np.abs(pts - self._center)
        moved = off > tol
        on_axis = moved.sum(axis=1) <= 1
        within = np.all(off <= self.half_lengths + tol, axis=1)
        return on_axis & within

    def _raw_candidates(self, nu, radius, spacing):
        n = self.dimension
        pieces = []
        for k in range(n):
            a = self.half_lengths[k]
            lo = max(-a, nu[k] - radius - self._center[k])
            hi = min(a, nu[k] + radius - self._center[k])
            if hi < lo:
                continue
            steps = np.arange(math.ceil(lo / spacing - 1e-9), math.floor(hi / spacing + 1e-9) + 1)
            pts = np.repeat(self._center[None, :], steps.shape[0], axis=0)
            pts[:, k] = self._center[k] + spacing * steps
            pieces.append(pts)
        if not pieces:
            return np.zeros((0, n))
        pts = np.unique(np.concatenate(pieces), axis=0)
        return pts[_in_ball(pts, nu, radius)]

    def spec(self):
        return {"kind": self.kind, "center": self._center.tolist(), "half_lengths": self.half_lengths.tolist()}


class SparseCone(StarSet):
    """Vectors in R^n with at most ``s`` nonzero coordinates (unbounded, center 0)."""

    kind = "sparse"

    def __init__(self, n: int, s: int):
        if not 1 <= s <= n:
            raise ValueError("need 1 <= s <= n")
        super().__init__(n, np.zeros(n))
        self.s = int(s)

    @property
    def intrinsic_dimension(self) -> int:
        return self.s

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        scale = np.maximum(1.0, np.abs(pts).max(axis=1, initial=0.0))
        nonzero = np.abs(pts) > (TAU_MEM * scale)[:, None]
        return nonzero.sum(axis=1) <= self.s

    def _raw_candidates(self, nu, radius, spacing):
        n, s = self.dimension, self.s
        pieces = []
        for support in itertools.combinations(range(n), s):
            idx = list(support)
            off = np.ones(n, bool)
            off[idx] = False
            # The ball meets this coordinate subspace only if the off-support mass fits.
            rest = float((nu[off] ** 2).sum())
            if rest > radius * radius * (1 + 1e-12) + 1e-24:
                continue
            sub = _lattice_box(np.zeros(s), spacing, nu[idx] - radius, nu[idx] + radius)
            pts = np.zeros((sub.shape[0], n))
            pts[:, idx] = sub
            pieces.append(pts[_in_ball(pts, nu, radius)])
        if not pieces:
            return np.zeros((0, n))
        pts = np.concatenate(pieces)
        return np.unique(pts, axis=0) if pts.shape[0] else pts

    def spec(self):
        return {"kind": self.kind, "n": self.dimension, "s": self.s}


class Simplex(StarSet):
    """The corner simplex ``{x >= 0, sum(x) <= 1}`` in R^n, centered at its centroid."""

    kind = "simplex"

    def __init__(self, n: int):
        super().__init__(n, np.full(n, 1.0 / (n + 1)))

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0) if self.dimension >= 2 else 1.0

    def bounding_box(self):
        n = self.dimension
        return np.zeros(n), np.ones(n)

    def contains_many(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        tol = TAU_MEM
        return np.all(pts >= -tol, axis=1) & (pts.sum(axis=1) <= 1.0 + tol)

    def spec(self):
        return {"kind": self.kind, "n": self.dimension}


def make_set(spec: dict[str, Any]) -> StarSet:
    """Build a set from its JSON form, e.g. ``{"kind": "ball", "center": [0, 0], "radius": 1}``."""
    kind = spec.get("kind")
    if kind == "ball":
        return EuclideanBall(spec["center"], spec["radius"])
    if kind in ("box", "hyperrectangle"):
        return Hyperrectangle(spec["lower"], spec["upper"])
    if kind == "interval":
        return Interval(spec.get("a", 0.0), spec.get("b", 1.0))
    if kind == "star_cross":
        return StarCross(spec["center"], spec.get("half_lengths", 1.0))
    if kind == "sparse":
        return SparseCone(spec["n"], spec["s"])
    if kind == "simplex":
        return Simplex(spec["n"])
    if kind == "singleton":
        return Singleton(spec["point"])
    raise ValueError(f"unknown set kind {kind!r}")


@dataclass
class LatticeIndex:
    """Lattice members of ``B(center, radius) & K`` with a dense integer lookup.

    ``grid`` maps the row-major lattice cell ``k - kbase`` to the row of
    ``points`` holding that lattice point, or ``-1`` when it is not a member.
    Any ball inside the indexed region can then be enumerated without
    re-evaluating membership.
    """

    points: np.ndarray
    grid: np.ndarray
    dims: np.ndarray
    kbase: np.ndarray
    anchor: np.ndarray
    spacing: float
    center: np.ndarray
    radius: float


def lattice_index(K: StarSet, center, radius: float, pitch: float, max_cells: float = 5e7) -> LatticeIndex | None:
    """Index the lattice members of ``B(center, radius) & K``; ``None`` when too large."""
    center = as_point(center, K.dimension)
    spacing = K.lattice_spacing(pitch)
    if (2.0 * radius / spacing + 1.0) ** K.dimension > max_cells:
        return None
    try:
        pts = np.ascontiguousarray(K.candidates(center, radius, pitch))
    except MemoryError:
        return None
    if pts.shape[0] == 0:
        return None
    anchor = K.center
    k = np.rint((pts - anchor) / spacing).astype(np.int64)
    if not np.array_equal(anchor + spacing * k, pts):
        # Only lattice-aligned members can be looked up exactly.
        return None
    kbase = k.min(axis=0)
    dims = k.max(axis=0) - kbase + 1
    if float(np.prod(dims.astype(float))) > max_cells:
        return None
    grid = np.full(int(np.prod(dims)), -1, np.int64)
    grid[np.ravel_multi_index((k - kbase).T, dims)] = np.arange(pts.shape[0])
    return LatticeIndex(pts, grid, dims.astype(np.int64), kbase, anchor, float(spacing), center, float(radius))


def membership(K: StarSet, p) -> int:
    """1 if ``p`` lies in ``K`` (up to ``TAU_MEM``), else 0."""
    return int(K.contains(as_point(p, K.dimension)))


def _farthest_pair(points: np.ndarray) -> tuple[int, int, float]:
    m = points.shape[0]
    if m == 1:
        return 0, 0, 0.0
    idx = np.arange(m)
    if m > 3000 and points.shape[1] >= 2:
        try:
            idx = ConvexHull(points).vertices
        except (QhullError, ValueError):
            idx = np.arange(m)
    if points.shape[1] == 1:
        idx = np.array([int(np.argmin(points[:, 0])), int(np.argmax(points[:, 0]))])
    sub = points[idx]
    dist = squareform(pdist(sub))
    i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return int(idx[i]), int(idx[j]), float(dist[i, j])


def diameter_estimate(K: StarSet, pitch: float) -> float:
    """Largest pairwise distance among the lattice members of ``K``.

    The true diameter is within ``2 * pitch`` of the returned value because
    every member lies within one pitch of a lattice member.
    """
    if not K.bounded:
        raise UnboundedSetError("diameter_estimate needs a bounded set")
    d = K.diameter
    if d == 0:
        return 0.0
    pts = K.candidates(K.center, d, pitch)
    return _farthest_pair(pts)[2]


def find_long_segment(K: StarSet, pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of a segment inside ``K`` with length at least ``d/3 - pitch``.

    Take a lattice pair nearly achieving the diameter; by the triangle
    inequality one of them is at least ``d/2`` from the center, and the segment
    joining it to the center lies in ``K`` because ``K`` is star-shaped.
    """
    if not K.bounded:
        raise UnboundedSetError("find_long_segment needs a bounded set")
    if K.diameter == 0:
        raise DegenerateSetError("set is a singleton; no segment of positive length exists")
    pts = K.candidates(K.center, K.diameter, pitch)
    i, j, _ = _farthest_pair(pts)
    c = K.center
    a, b = pts[i], pts[j]
    far = a if np.linalg.norm(a - c) >= np.linalg.norm(b - c) else b
    return c, far.copy()
