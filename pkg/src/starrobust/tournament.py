"""Tournament selection down the packing tree.

At step ``k`` the traversal sits at node ``Y_k`` and moves to the offspring
minimizing the tournament statistic

    T(delta, nu, S) = max{|nu - nu'| : nu' in S, nu' dominates nu, |nu - nu'| >= C delta}

(0 when no such ``nu'`` exists) at scale ``delta_k = d / (2^k (C + 1))``, with
ties going to the lexicographically smallest point. The number of steps is
set by the stopping rule :func:`j_star` or chosen explicitly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._kernels import argmin_tournament, distance_matrix, point_sq_dists
from .constants import (
    GroupedConstants,
    derived_C,
    delta_k,
    eta_J,
    solve_gaussian_constants,
    solve_unknown_subgaussian_constants,
)
from .entropy import local_entropy, log_mloc_upper
from .geometry import StarSet, as_point, lex_order
from .hypotests import DominationContext, NoiseModel, dominates, sq_dists
from .tree import PackingTree, cached_tree

LOG2 = math.log(2.0)
BOUNDED_POWER = 4.0
UNBOUNDED_POWER = 6.0


class TreeDepthError(ValueError):
    """Raised when the traversal needs more levels than the tree holds."""


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix computed as ``sqrt(sum((a - b)^2))``."""
    return distance_matrix(np.ascontiguousarray(np.atleast_2d(np.asarray(points, float))))


def _dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(distance_matrix(np.stack([a, b]))[0, 1])


def tournament_T(delta: float, nu, S, ctx: DominationContext, C: float) -> float:
    """Largest distance from ``nu`` to a far (``>= C delta``) member of ``S`` that dominates it."""
    if not C > 2:
        raise ValueError("need C > 2")
    nu = np.asarray(nu, float)
    best = 0.0
    for other in np.atleast_2d(np.asarray(S, float)):
        gap = _dist(nu, other)
        if gap == 0 or gap < C * delta:
            continue
        if dominates(other, nu, ctx, delta) and gap > best:
            best = gap
    return best


def select_next(offspring, delta: float, ctx: DominationContext, C: float, method: str = "fast") -> tuple[int, float]:
    """Index of the offspring minimizing ``T`` (ties to the lex-smallest) and its ``T`` value.

    ``method="fast"`` runs a compiled branch-and-bound search that returns
    the same minimizer as ``method="naive"``, which evaluates ``T`` for every
    candidate.
    """
    pts = np.atleast_2d(np.asarray(offspring, float))
    m = pts.shape[0]
    if m == 0:
        raise ValueError("no offspring to select from")
    if m == 1:
        return 0, 0.0
    order_lex = lex_order(pts)
    lexrank = np.empty(m, np.int64)
    lexrank[order_lex] = np.arange(m)
    if method == "naive":
        T = np.array([tournament_T(delta, p, pts, ctx, C) for p in pts])
        best = min(range(m), key=lambda i: (T[i], lexrank[i]))
        return int(best), float(T[best])
    if method != "fast":
        raise ValueError("method must be 'fast' or 'naive'")
    mode, level = ctx.mode(delta)
    rows = np.ascontiguousarray(ctx.effective_rows(), dtype=float)
    D = point_sq_dists(np.ascontiguousarray(pts), rows)
    dist = pairwise_distances(pts)
    # Candidates near the bulk of the data tend to have small T; trying them
    # first lets the search discard the rest early.
    order = np.lexsort((lexrank, D.mean(axis=1))).astype(np.int64)
    best, best_t = argmin_tournament(D, dist, lexrank, order, float(C * delta), int(mode), float(level))
    return int(best), float(best_t)


def exponent_constant(noise: NoiseModel, C: float, kappa: float = 0.25) -> float:
    """The exponent constant entering the stopping rule for the given noise model."""
    if noise.variant == "gaussian":
        return solve_gaussian_constants(C, kappa).C3
    if noise.variant == "known_subgaussian":
        return GroupedConstants(noise.k, noise.gamma).C3
    return solve_unknown_subgaussian_constants(noise.C3, noise.D2).C5


def j_star(
    K: StarSet,
    N: int,
    sigma: float,
    c: float,
    exponent_const: float,
    d: float | None = None,
    power: float | None = None,
    fine_entropy: bool = False,
    region: tuple | None = None,
    max_J: int = 12,
    pitch_ratio: float = 0.25,
) -> int:
    """Deepest ``J`` for which ``N eta_J^2 / sigma^2 > max(power * log M, log 2)``.

    ``eta_J = d sqrt(C3) / (2^{J-1} (C + 1))`` and ``M = M^loc(d / 2^{J-2}, 2c)``
    (the radius ``c eta_J / sqrt(C3)`` simplified using ``C = c/2 - 1``).
    With ``fine_entropy`` the entropy term is ``M^loc(d / 2^{J-1}, c)`` instead.
    ``power`` defaults to 4 for bounded sets and 6 when ``d`` is the
    localized diameter of an unbounded set. Returns 1 when even ``J = 1``
    fails; the scan stops at the first failure.
    """
    C = derived_C(c)
    if d is None:
        if not K.bounded:
            raise ValueError("unbounded sets need the localized diameter d")
        d = float(K.diameter)
    if power is None:
        power = BOUNDED_POWER if K.bounded else UNBOUNDED_POWER
    if d == 0:
        return 1
    best = 1
    for J in range(1, max_J + 1):
        eta = eta_J(d, J, C, exponent_const)
        lhs = N * eta * eta / (sigma * sigma)
        if fine_entropy:
            radius, cc = d / 2.0 ** (J - 1), c
        else:
            radius, cc = d / 2.0 ** (J - 2), 2.0 * c
        if lhs <= LOG2:
            break
        if lhs > power * log_mloc_upper(K.dimension, cc):
            best = J
            continue
        ent = local_entropy(K, radius, cc, pitch=pitch_ratio * radius / cc, region=region)
        if lhs > max(power * ent, LOG2):
            best = J
        else:
            break
    return best


@dataclass
class EstimatorConfig:
    """Settings for one run of the tree-tournament estimator.

    ``iterations`` is ``"jstar"`` (stop at the stopping rule), ``"full"``
    (descend to the last tree level) or an integer number of extra steps
    beyond ``J*``; any count at least ``J*`` is admissible. ``depth`` is the
    number of tree levels to build when the stopping rule does not fix it.
    """

    noise: NoiseModel = field(default_factory=NoiseModel)
    c: float = 8.0
    kappa: float = 0.25
    depth: int = 5
    pitch: float | None = None
    iterations: str | int = "jstar"
    fine_entropy: bool = False
    n_smoothing_reps: int = 1
    max_depth: int = 12
    method: str = "fast"
    exponent_const: float | None = None

    @property
    def C(self) -> float:
        return derived_C(self.c)


@dataclass
class TraversalState:
    """Trace of one descent: node ids, points, scales and the selected output."""

    path: list[int]
    points: list[np.ndarray]
    delta_schedule: list[float]
    T_values: list[float]
    J_star: int
    steps: int
    output: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["points"] = [p.tolist() for p in self.points]
        out["output"] = self.output.tolist()
        return out


def default_pitch(d: float, depth: int, c: float) -> float:
    """A pitch 2.5 times finer than the deepest packing radius."""
    return d / (2.0 ** (depth - 1) * c) / 2.5


def resolve_steps(config: EstimatorConfig, jstar: int, depth: int) -> int:
    """Number of descent steps implied by ``config.iterations``."""
    it = config.iterations
    if it == "jstar":
        steps = jstar
    elif it == "full":
        steps = depth - 1
    elif isinstance(it, (int, np.integer)) and not isinstance(it, bool) and it >= 0:
        steps = jstar + int(it)
    else:
        raise ValueError(f"iterations must be 'jstar', 'full' or a nonnegative int, got {it!r}")
    if steps + 1 > depth:
        raise TreeDepthError(f"{steps} steps need {steps + 1} tree levels but the tree has {depth}")
    return steps


def traverse(tree: PackingTree, ctx: DominationContext, C: float, steps: int, method: str = "fast",
             d: float | None = None) -> TraversalState:
    """Descend ``steps`` levels from the root by tournament selection."""
    if steps + 1 > tree.depth:
        raise TreeDepthError(f"{steps} steps need {steps + 1} tree levels but the tree has {tree.depth}")
    d = tree.d if d is None else d
    off = tree.offsets()
    idx = 0
    path, points, deltas, Ts = [0], [tree.levels[0][0].copy()], [], []
    for k in range(1, steps + 1):
        kids = tree.offspring_indices(k, idx)
        if kids.shape[0] == 0:
            raise TreeDepthError(f"node {path[-1]} has no offspring")
        delta = delta_k(d, k, C)
        sub = tree.levels[k][kids]
        j, t = select_next(sub, delta, ctx, C, method)
        idx = int(kids[j])
        path.append(int(off[k] + idx))
        points.append(sub[j].copy())
        deltas.append(delta)
        Ts.append(t)
    return TraversalState(path, points, deltas, Ts, -1, steps, points[-1].copy())


def tree_depth_for(config: EstimatorConfig, jstar: int) -> int:
    """Tree depth needed by ``config.iterations`` once ``J*`` is known."""
    if config.iterations == "full":
        depth = config.depth
    elif config.iterations == "jstar":
        depth = jstar + 1
    else:
        depth = jstar + int(config.iterations) + 1
    return max(depth, 2)


def estimator_j_star(config: EstimatorConfig, K: StarSet, N: int, d: float, region: tuple | None = None) -> tuple[int, float]:
    """``J*`` and the exponent constant used for ``N`` observations (halved for the trimmed variant)."""
    noise = config.noise
    const = config.exponent_const if config.exponent_const is not None else exponent_constant(noise, config.C, config.kappa)
    N_eff = N // 2 if noise.variant == "unknown_subgaussian" else N
    js = j_star(K, N_eff, noise.sigma, config.c, const, d=d, fine_entropy=config.fine_entropy,
                region=region, max_J=config.max_depth - 1)
    return js, const


def prepare_rows(X: np.ndarray, noise: NoiseModel) -> tuple[np.ndarray, dict]:
    """Pad an odd sample with a zero row for the trimmed variant, which splits the data in halves."""
    meta: dict = {}
    if noise.variant == "unknown_subgaussian" and X.shape[0] % 2:
        X = np.vstack([X, np.zeros((1, X.shape[1]))])
        meta["padded_rows"] = 1
    return X, meta


def run_estimator(
    data,
    K: StarSet,
    config: EstimatorConfig | None = None,
    rng: np.random.Generator | None = None,
    tree: PackingTree | None = None,
    d_override: float | None = None,
    region: tuple | None = None,
) -> tuple[np.ndarray, TraversalState]:
    """Run the estimator on ``data`` (an ``(N, n)`` array or a dataset).

    Builds (or reuses) the packing tree rooted at the set's center, computes
    ``J*`` and descends. The smoothed variants draw ``R_i ~ N(0, sigma^2 I)``
    once per run from ``rng``; the grouped variant averages the output of
    ``n_smoothing_reps`` independent runs.
    """
    config = config or EstimatorConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    noise = config.noise
    X = np.asarray(getattr(data, "observed", data), float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != K.dimension:
        raise ValueError("data dimension does not match the set")
    X, meta = prepare_rows(X, noise)
    N = X.shape[0]
    C = config.C
    if tree is not None:
        d = tree.d
    elif d_override is not None:
        d = float(d_override)
    else:
        if not K.bounded:
            raise ValueError("unbounded sets need d_override or a prebuilt tree")
        d = float(K.diameter)
    if d == 0:
        root = tree.root if tree is not None else K.center
        state = TraversalState([0], [root.copy()], [], [], 1, 0, root.copy(), meta)
        return root.copy(), state
    js, const = estimator_j_star(config, K, N, d, region)
    if tree is None:
        if d_override is not None:
            raise ValueError("the localized variant needs a prebuilt tree")
        depth = tree_depth_for(config, js)
        pitch = config.pitch if config.pitch is not None else default_pitch(d, depth, config.c)
        tree = cached_tree(K, K.center, depth, config.c, pitch, None, config.max_depth)
    steps = resolve_steps(config, js, tree.depth)
    reps = config.n_smoothing_reps if noise.variant == "known_subgaussian" else 1
    if reps < 1:
        raise ValueError("n_smoothing_reps must be at least 1")
    outputs, state = [], None
    for _ in range(reps):
        R = rng.normal(0.0, noise.sigma, size=X.shape) if noise.smoothed else None
        ctx = DominationContext(X, noise, R)
        st = traverse(tree, ctx, C, steps, config.method)
        st.meta.update(ctx.meta)
        outputs.append(st.output)
        state = state or st
    out = np.mean(outputs, axis=0) if reps > 1 else outputs[0]
    state.J_star = js
    state.output = out.copy()
    state.meta.update(meta)
    state.meta.update({"exponent_const": const, "C": C, "c": config.c, "tree_depth": tree.depth,
                       "pitch": tree.pitch, "smoothing_reps": reps, "d": d})
    if reps > 1:
        state.meta["rep_outputs"] = [o.tolist() for o in outputs]
    return out, state
