"""Localization for unbounded sets and the end-to-end unbounded estimator.

The random set ``S(R)`` collects members of ``K`` lying within ``R`` of a
strict majority of the observations. When it is nonempty the estimator roots
a packing tree of diameter ``d_m`` at the countable-packing point nearest to
``S(R)`` and descends as in the bounded case. Otherwise it falls back to the
smallest radius ``R_hat`` with ``S(R_hat)`` nonempty and returns the
lexicographically smallest witness there.

Everything is evaluated on the candidate lattice of ``K``, so ``S(R)`` is
represented by its lattice witnesses.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import outside_counts
from .constants import (
    GammaBoundWarning,
    UnboundedParams,
    gamma_lower_bound_gaussian,
    gamma_lower_bound_subgaussian,
    select_R,
    solve_gaussian_constants,
    solve_unknown_subgaussian_constants,
)
from .entropy import countable_packing
from .geometry import StarSet, lex_order
from .tournament import (
    EstimatorConfig,
    TraversalState,
    default_pitch,
    estimator_j_star,
    prepare_rows,
    run_estimator,
    tree_depth_for,
)
from .tree import cached_tree

UNBOUNDED_DEFAULT_GAMMA = 0.5


class LocalizationError(ValueError):
    """The search for a localization radius ran out of room."""


@dataclass
class LocalizationResult:
    """Lattice witnesses of ``S(R)`` and the root chosen from them."""

    R: float
    S_nonempty: bool
    witness_points: np.ndarray
    chosen_root: np.ndarray | None = None
    hat_R: float | None = None
    hat_p: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _as_rows(data, dimension: int) -> np.ndarray:
    X = np.asarray(getattr(data, "observed", data), float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != dimension:
        raise ValueError("data dimension does not match the set")
    if X.shape[0] == 0:
        raise ValueError("need at least one observation")
    return np.ascontiguousarray(X)


def violation_limit(N: int) -> float:
    """``N/2 - 1``: the largest number of observations allowed farther than ``R``."""
    return N / 2.0 - 1.0


def in_S(nu, X: np.ndarray, R: float) -> bool:
    """True iff at most ``N/2 - 1`` observations lie farther than ``R`` from ``nu``."""
    X = np.atleast_2d(np.asarray(X, float))
    nu = np.atleast_2d(np.asarray(nu, float))
    cnt = outside_counts(np.ascontiguousarray(X), np.ascontiguousarray(nu), float(R))[0]
    return bool(cnt <= violation_limit(X.shape[0]))


def search_window(X: np.ndarray, K: StarSet, R: float, pitch: float) -> np.ndarray:
    """Lattice members of ``K`` within ``R`` of some of the first ``ceil(N/2)`` observations.

    Any member of ``S(R)`` is within ``R`` of more than ``N/2`` observations,
    and every such majority meets the first ``ceil(N/2)`` rows, so the window
    contains every lattice witness. Rows come back lexicographically sorted.
    """
    N = X.shape[0]
    pieces = [K.candidates(x, R, pitch) for x in X[: math.ceil(N / 2)]]
    pieces = [p for p in pieces if p.shape[0]]
    if not pieces:
        return np.zeros((0, K.dimension))
    pts = np.unique(np.concatenate(pieces), axis=0)
    return pts[lex_order(pts)]


def compute_S(data, K: StarSet, R: float, pitch: float) -> LocalizationResult:
    """Lattice witnesses of ``S(R)``: members with at most ``N/2 - 1`` observations beyond ``R``."""
    if not R >= 0:
        raise ValueError("R must be nonnegative")
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    X = _as_rows(data, K.dimension)
    window = search_window(X, K, R, pitch)
    if window.shape[0] == 0:
        return LocalizationResult(float(R), False, window, meta={"window": 0})
    cnt = outside_counts(X, np.ascontiguousarray(window), float(R))
    wit = window[cnt <= violation_limit(X.shape[0])]
    return LocalizationResult(float(R), bool(wit.shape[0]), wit, meta={"window": int(window.shape[0])})


def _max_pairwise(X: np.ndarray) -> float:
    if X.shape[0] < 2:
        return 0.0
    diffs = X[:, None, :] - X[None, :, :]
    return float(np.sqrt((diffs ** 2).sum(axis=-1)).max())


def hat_R(
    data,
    K: StarSet,
    R: float,
    pitch: float,
    R_max: float | None = None,
    tol: float | None = None,
) -> tuple[float, np.ndarray]:
    """Smallest ``t > R`` with ``S(t)`` nonempty (by bisection) and the lex-smallest witness there.

    ``R_max`` defaults to twice the largest pairwise distance between
    observations; ``tol`` defaults to ``1e-6`` of the search interval.
    Feasibility is monotone in ``t`` because the sets ``S(t)`` are nested.
    """
    X = _as_rows(data, K.dimension)
    if compute_S(X, K, R, pitch).S_nonempty:
        raise ValueError("S(R) is nonempty; the fallback radius is only defined when it is empty")
    hi = 2.0 * _max_pairwise(X) if R_max is None else float(R_max)
    top = compute_S(X, K, hi, pitch) if hi > R else None
    if top is None or not top.S_nonempty:
        raise LocalizationError(f"S(t) is empty up to R_max = {hi}; widen the window or refine the pitch")
    lo = float(R)
    tol = 1e-6 * (hi - lo) if tol is None else float(tol)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if compute_S(X, K, mid, pitch).S_nonempty:
            hi = mid
        else:
            lo = mid
    wit = compute_S(X, K, hi, pitch).witness_points
    return hi, wit[0].copy()


def choose_root(witnesses: np.ndarray, K: StarSet, m: float, pitch: float) -> tuple[np.ndarray, np.ndarray]:
    """The countable-packing point nearest to the witness set (ties lexicographic).

    The packing is an ``m``-packing and ``2m``-covering of ``K`` restricted to a
    ball that contains every witness plus a ``2m`` margin. Returns the root and
    the packing points examined.
    """
    lo, hi = witnesses.min(axis=0), witnesses.max(axis=0)
    mid = 0.5 * (lo + hi)
    reach = float(np.sqrt(((witnesses - mid) ** 2).sum(axis=1)).max()) + 2.0 * m + pitch
    pack = countable_packing(K, m, (mid, reach), pitch=pitch).points
    if pack.shape[0] == 0:
        return witnesses[0].copy(), pack
    d2 = ((pack[:, None, :] - witnesses[None, :, :]) ** 2).sum(axis=-1).min(axis=1)
    # Packing points come lexicographically sorted, so argmin takes the lex-smallest tie.
    return pack[int(np.argmin(d2))].copy(), pack


def gamma_bound_for(config: EstimatorConfig) -> float:
    """The variant's lower bound on gamma (the grouped variant reuses the Gaussian one)."""
    noise = config.noise
    C = config.C
    if noise.variant == "unknown_subgaussian":
        k = solve_unknown_subgaussian_constants(noise.C3, noise.D2)
        return gamma_lower_bound_subgaussian(C, k.C5, k.C1)
    return gamma_lower_bound_gaussian(solve_gaussian_constants(C, config.kappa))


def unbounded_params(
    K: StarSet,
    config: EstimatorConfig,
    gamma: float = UNBOUNDED_DEFAULT_GAMMA,
    strict: bool = False,
) -> UnboundedParams:
    """Localization radius ``R``, packing scale ``m`` and tree diameter ``d_m`` for ``config``."""
    noise = config.noise
    return select_R(K.dimension, noise.sigma, noise.epsilon, gamma, config.c,
                    gamma_bound=gamma_bound_for(config), strict=strict)


def run_unbounded_estimator(
    data,
    K: StarSet,
    config: EstimatorConfig | None = None,
    rng: np.random.Generator | None = None,
    gamma: float = UNBOUNDED_DEFAULT_GAMMA,
    R: float | None = None,
    S_pitch: float | None = None,
    strict_gamma: bool = False,
) -> tuple[np.ndarray, TraversalState, LocalizationResult]:
    """Localize with ``S(R)``, then descend a ``d_m``-diameter tree rooted near ``S(R)``.

    ``R`` overrides the radius from :func:`unbounded_params` (``m`` and
    ``d_m`` are then rescaled from it). ``S_pitch`` is the lattice pitch of
    the localization sweep and defaults to ``m / 8``. When ``S(R)`` is empty
    the fallback witness is returned with a zero-step trace.
    """
    config = config or EstimatorConfig()
    if K.bounded:
        raise ValueError("use run_estimator for bounded sets")
    X = _as_rows(data, K.dimension)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", GammaBoundWarning)
        params = unbounded_params(K, config, gamma, strict_gamma)
    if R is None:
        R, m, d_m = params.R, params.m, params.d_m
    else:
        R = float(R)
        m = R / (config.c - 1.0)
        d_m = 2.0 * m + 2.0 * R
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)
    S_pitch = m / 8.0 if S_pitch is None else float(S_pitch)
    loc = compute_S(X, K, R, S_pitch)
    loc.meta.update({"m": m, "d_m": d_m, "gamma": gamma, "gamma_ok": params.gamma_ok})
    if not loc.S_nonempty:
        t, p = hat_R(X, K, R, S_pitch)
        loc.hat_R, loc.hat_p = t, p
        state = TraversalState([0], [p.copy()], [], [], 0, 0, p.copy(), {"fallback": True, "hat_R": t})
        return p.copy(), state, loc
    root, _ = choose_root(loc.witness_points, K, m, S_pitch)
    loc.chosen_root = root
    region = (root, d_m)
    js, _ = estimator_j_star(config, K, prepare_rows(X, config.noise)[0].shape[0], d_m, region)
    depth = tree_depth_for(config, js)
    pitch = config.pitch if config.pitch is not None else default_pitch(d_m, depth, config.c)
    tree = cached_tree(K, root, depth, config.c, pitch, d_override=d_m, max_depth=config.max_depth)
    out, state = run_estimator(X, K, config, rng=rng, tree=tree, region=region)
    state.meta.update({"R": R, "m": m, "d_m": d_m, "root": root.tolist(), "fallback": False})
    return out, state, loc
