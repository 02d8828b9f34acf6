"""Packings, local metric entropy and the statistical-geometric radius eta*.

All packings are greedy over lexicographically sorted lattice candidates, so
"maximal" means maximal relative to the candidate lattice. Entropy values are
lower estimates of the true local metric entropy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import greedy_assign, packed_offspring
from .geometry import StarSet, _in_ball, as_point, lattice_index, lex_order

DEFAULT_MAX_CENTERS = 400
# Largest dense lattice index built to batch the per-center packings.
INDEX_MAX_CELLS = 3e7
_ENTROPY_CACHE: dict[tuple, float] = {}
_CACHE_LIMIT = 50_000


@dataclass
class PackingResult:
    """A separated point set inside ``B(ball_center, ball_radius) & K``."""

    points: np.ndarray
    separation: float
    ball_center: np.ndarray
    ball_radius: float
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


@dataclass
class EntropyProfile:
    """Local entropy estimates along a decreasing list of radii.

    ``raw_log_Mloc`` holds the per-radius lower estimates; ``log_Mloc`` is their
    running maximum as eta decreases, which restores the monotonicity that the
    exact quantity has.
    """

    etas: np.ndarray
    log_Mloc: np.ndarray
    raw_log_Mloc: np.ndarray
    c: float
    note: str = "log_Mloc is the cumulative max of raw_log_Mloc as eta decreases"


def greedy_packing(points: np.ndarray, sep: float) -> tuple[np.ndarray, np.ndarray]:
    """Greedy ``sep``-packing of already-sorted points.

    Returns the admitted indices and, for every input point, the index of the
    earliest admitted point within ``sep`` (itself when admitted).
    """
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.shape[0] == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    rep = greedy_assign(pts, float(sep))
    return np.flatnonzero(rep == np.arange(pts.shape[0])), rep


def maximal_packing(
    K: StarSet,
    center,
    radius: float,
    sep: float,
    pitch: float | None = None,
    within: tuple[np.ndarray, float] | None = None,
) -> PackingResult:
    """Greedy lexicographic ``sep``-packing of ``B(center, radius) & K``.

    The result is a ``sep``-packing of the candidate lattice and a
    ``(sep + pitch)``-covering of the ball intersection. ``within`` optionally
    intersects the ball with a second localization ball ``(point, radius)``.
    """
    center = as_point(center, K.dimension)
    if pitch is None:
        pitch = sep / 4.0
    if not sep > 2 * pitch:
        raise ValueError(f"need sep > 2 * pitch, got sep={sep}, pitch={pitch}")
    cand = K.candidates(center, radius, pitch)
    if within is not None and cand.shape[0]:
        cand = cand[_in_ball(cand, as_point(within[0], K.dimension), within[1])]
    if cand.shape[0] == 0:
        if K.contains(center):
            cand = center[None, :]
        else:
            raise ValueError("ball does not meet the set")
    keep, _ = greedy_packing(cand, sep)
    return PackingResult(cand[keep], float(sep), center, float(radius), {"candidates": int(cand.shape[0])})


def _region_of(K: StarSet, region) -> tuple[np.ndarray, float]:
    if region is None:
        if not K.bounded:
            raise ValueError("unbounded sets need a localization region")
        region = (K.center, K.diameter)
    return as_point(region[0], K.dimension), float(region[1])


def _sweep_centers(K: StarSet, eta: float, region, max_centers: int) -> np.ndarray:
    rc, rr = _region_of(K, region)
    sweep_pitch = eta / 4.0
    while True:
        try:
            pts = K.candidates(rc, rr, sweep_pitch)
        except MemoryError:
            pts = None
        if pts is not None and pts.shape[0] <= max_centers:
            return pts
        sweep_pitch *= 2.0


def _batched_counts(K: StarSet, centers: np.ndarray, eta: float, sep: float, pitch: float) -> int:
    """Largest greedy packing count over ``centers``, batched through one lattice index.

    Gives the same counts as :func:`maximal_packing` per center, which is the
    fallback when the shared index would be too large.
    """
    lo, hi = centers.min(axis=0), centers.max(axis=0)
    mid = 0.5 * (lo + hi)
    reach = float(np.sqrt(((centers - mid) ** 2).sum(axis=1)).max())
    try:
        index = lattice_index(K, mid, reach + eta, pitch, max_cells=INDEX_MAX_CELLS)
    except MemoryError:
        index = None
    if index is not None:
        child, owner = packed_offspring(index.grid, index.dims, index.kbase, index.anchor, index.spacing,
                                        index.points, np.ascontiguousarray(centers), float(eta), float(sep))
        if not np.any(child < 0):
            return int(np.bincount(owner, minlength=centers.shape[0]).max())
    return max(maximal_packing(K, c, eta, sep, pitch).count for c in centers)


def local_entropy(
    K: StarSet,
    eta: float,
    c: float,
    pitch: float | None = None,
    region: tuple[np.ndarray, float] | None = None,
    centers: np.ndarray | None = None,
    max_centers: int = DEFAULT_MAX_CENTERS,
) -> float:
    """Lower estimate of ``log M^loc(eta, c)``.

    Sweeps ball centers over a lattice of pitch ``eta/4`` covering ``K`` (or
    the localization ``region`` for unbounded sets), coarsened until at most
    ``max_centers`` centers remain, plus any extra ``centers`` supplied, and
    returns the log of the largest greedy ``eta/c``-packing count found.
    """
    if not c > 2:
        raise ValueError("local entropy needs c > 2")
    if not eta > 0:
        raise ValueError("eta must be positive")
    if K.bounded and K.diameter == 0:
        return 0.0
    sep = eta / c
    if pitch is None:
        pitch = sep / 4.0
    key = None
    if centers is None:
        reg = None if region is None else (tuple(np.asarray(region[0], float).tolist()), float(region[1]))
        key = (K.key(), float(eta), float(c), float(pitch), reg, int(max_centers))
        if key in _ENTROPY_CACHE:
            return _ENTROPY_CACHE[key]
    sweep = _sweep_centers(K, eta, region, max_centers)
    best = 1
    if sweep.shape[0]:
        best = max(best, _batched_counts(K, sweep, eta, sep, pitch))
    if centers is not None:
        for nu in np.atleast_2d(np.asarray(centers, float)):
            best = max(best, maximal_packing(K, nu, eta, sep, pitch).count)
    value = math.log(best)
    if key is not None:
        if len(_ENTROPY_CACHE) > _CACHE_LIMIT:
            _ENTROPY_CACHE.clear()
        _ENTROPY_CACHE[key] = value
    return value


def log_mloc_upper(n: int, c: float) -> float:
    """Volume bound ``n log(2c + 1)`` on ``log M^loc(eta, c)`` in R^n, valid for every eta.

    Disjoint balls of radius ``eta/(2c)`` centered in ``B(nu, eta)`` fit inside
    ``B(nu, eta (1 + 1/(2c)))``.
    """
    return n * math.log(2.0 * c + 1.0)


def entropy_profile(K: StarSet, etas, c: float, pitch_ratio: float = 0.25, region=None) -> EntropyProfile:
    """Local entropy along ``etas`` (sorted to decreasing) with a monotone envelope."""
    etas = np.sort(np.asarray(etas, float))[::-1]
    raw = np.array([local_entropy(K, e, c, pitch=pitch_ratio * e / c, region=region) for e in etas])
    return EntropyProfile(etas, np.maximum.accumulate(raw), raw, float(c))


def vg_bound(n: int, s: int) -> float:
    """The sparse Varshamov-Gilbert lower bound ``(s/8) log(1 + n/(2s))``."""
    return s / 8.0 * math.log(1.0 + n / (2.0 * s))


def vg_sparse_packing(
    n: int,
    s: int,
    delta: float,
    c: float = 2.0,
    max_points: int = 4096,
    max_enumerate: int = 200_000,
    seed: int = 0,
) -> PackingResult:
    """Scaled sparse binary codewords with pairwise Hamming distance at least s/2.

    Supports are visited in lexicographic order when there are at most
    ``max_enumerate`` of them, otherwise drawn at random from ``seed``. A
    codeword is retained when it disagrees with every retained codeword on at
    least ``s/2`` coordinates, i.e. shares at most ``3s/4`` of its support.
    Points are ``delta / sqrt(s)`` times the codewords, so all have norm
    ``delta`` and pairwise distance at least ``delta / sqrt(2) > delta / c``.
    """
    if not 1 <= s <= n / 8:
        raise ValueError("vg_sparse_packing supports 1 <= s <= n/8 only")
    if not c > math.sqrt(2):
        raise ValueError("need c > sqrt(2)")
    total = math.comb(n, s)
    if total <= max_enumerate:
        supports = itertools.combinations(range(n), s)
    else:
        rng = np.random.default_rng(seed)
        supports = (tuple(sorted(rng.choice(n, size=s, replace=False))) for _ in range(max_enumerate))
    kept = np.zeros((0, n), dtype=np.int64)
    limit = 0.75 * s
    for sup in supports:
        w = np.zeros(n, dtype=np.int64)
        w[list(sup)] = 1
        if kept.shape[0] and np.any(kept @ w > limit):
            continue
        kept = np.vstack([kept, w[None, :]])
        if kept.shape[0] >= max_points:
            break
    pts = kept.astype(float) * (delta / math.sqrt(s))
    return PackingResult(pts, delta / c, np.zeros(n), float(delta), {"supports_examined": total})


def eta_star(
    K: StarSet,
    N: int,
    sigma: float,
    c: float,
    region: tuple[np.ndarray, float] | None = None,
    pitch_ratio: float = 0.25,
    max_iter: int = 60,
    rel_tol: float = 1e-3,
    max_centers: int = DEFAULT_MAX_CENTERS,
) -> float:
    """Bisection for ``sup{eta : N eta^2 / sigma^2 <= log M^loc(eta, c)}``.

    Each evaluation uses :func:`local_entropy` at pitch ``pitch_ratio * eta / c``.
    Returns 0 for singleton sets.
    """
    if N < 1 or not sigma > 0:
        raise ValueError("need N >= 1 and sigma > 0")
    if K.bounded and K.diameter == 0:
        return 0.0

    def ok(eta: float) -> bool:
        ent = local_entropy(K, eta, c, pitch=pitch_ratio * eta / c, region=region, max_centers=max_centers)
        return N * eta * eta / (sigma * sigma) <= ent

    hi = K.diameter if K.bounded else float(region[1])
    # Beyond this radius the condition fails for any packing.
    hi = min(hi, sigma * math.sqrt(log_mloc_upper(K.dimension, c) / N) * (1.0 + 1e-9))
    grow = 0
    while ok(hi) and grow < 60:
        hi *= 2.0
        grow += 1
    lo = 0.0
    for _ in range(max_iter):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def countable_packing(
    K: StarSet,
    m: float,
    region: tuple[np.ndarray, float],
    pitch: float | None = None,
) -> PackingResult:
    """An ``m``-packing and ``2m``-covering of ``K & region`` built from grid balls.

    Grid centers ``q`` sit on a cubic lattice (anchored at the origin) whose
    balls ``B(q, m/2)`` cover space. Each ball contributes the lexicographically
    smallest member it contains, and those representatives are pruned greedily
    at distance ``m``.
    """
    rc, rr = as_point(region[0], K.dimension), float(region[1])
    if pitch is None:
        pitch = m / 8.0
    cand = K.candidates(rc, rr, pitch)
    if cand.shape[0] <= 1:
        return PackingResult(cand, float(m), rc, rr)
    n = K.dimension
    spacing = m / math.sqrt(n)
    lo = cand.min(axis=0) - m / 2.0
    hi = cand.max(axis=0) + m / 2.0
    axes = [spacing * np.arange(math.floor(lo[k] / spacing), math.ceil(hi[k] / spacing) + 1) for k in range(n)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    tree = cKDTree(cand)
    hits = tree.query_ball_point(grid, m / 2.0)
    reps = sorted({min(h) for h in hits if h})
    reps_pts = cand[np.asarray(reps, dtype=np.int64)]
    reps_pts = reps_pts[lex_order(reps_pts)]
    keep, _ = greedy_packing(reps_pts, m)
    return PackingResult(reps_pts[keep], float(m), rc, rr, {"grid_balls": int(grid.shape[0])})
