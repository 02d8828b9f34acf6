import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starrobust.constants import delta_k, derived_C, eta_J
from starrobust.entropy import local_entropy
from starrobust.geometry import EuclideanBall, Hyperrectangle, Interval, Singleton, lex_less
from starrobust.hypotests import DominationContext, NoiseModel, dominates
from starrobust.tournament import (
    EstimatorConfig,
    TreeDepthError,
    default_pitch,
    exponent_constant,
    j_star,
    resolve_steps,
    run_estimator,
    select_next,
    tournament_T,
)
from starrobust.tree import build_tree


def _T_reference(delta, i, pts, ctx, C):
    """T for candidate ``i`` by direct enumeration over the other candidates."""
    best = 0.0
    for j, q in enumerate(pts):
        gap = math.dist(pts[i], q)
        if j != i and gap >= C * delta and dominates(q, pts[i], ctx, delta):
            best = max(best, gap)
    return best


def _select_reference(pts, delta, ctx, C):
    T = [_T_reference(delta, i, pts, ctx, C) for i in range(len(pts))]
    best = 0
    for i in range(1, len(pts)):
        if T[i] < T[best] or (T[i] == T[best] and lex_less(pts[i], pts[best])):
            best = i
    return best


def test_T_examples():
    ctx = DominationContext(np.zeros((9, 1)), NoiseModel())
    S = np.array([[0.0], [1.0], [3.0]])
    C = 3.0
    # Data at 0: the point 0 dominates both others, so it has T = 0.
    assert tournament_T(0.1, [0.0], S, ctx, C) == 0.0
    assert tournament_T(0.1, [1.0], S, ctx, C) == pytest.approx(1.0)
    assert tournament_T(0.1, [3.0], S, ctx, C) == pytest.approx(3.0)
    # The distance threshold C delta is inclusive; above it no contender counts.
    assert tournament_T(1.0, [3.0], S, ctx, C) == pytest.approx(3.0)
    assert tournament_T(1.1, [3.0], S, ctx, C) == 0.0
    with pytest.raises(ValueError):
        tournament_T(0.1, [0.0], S, ctx, 2.0)


def test_T_pair_property():
    # max(T_i, T_j) >= |nu_i - nu_j| for every far pair in the candidate set.
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 1, size=(12, 2))
    ctx = DominationContext(rng.normal(size=(31, 2)) * 0.3, NoiseModel())
    C, delta = 3.0, 0.05
    T = [tournament_T(delta, p, pts, ctx, C) for p in pts]
    for i in range(12):
        for j in range(i + 1, 12):
            gap = math.dist(pts[i], pts[j])
            if gap >= C * delta:
                assert max(T[i], T[j]) >= gap - 1e-12


@given(st.integers(0, 10 ** 6), st.integers(2, 20), st.floats(0.01, 0.3))
def test_select_next_fast_matches_reference(seed, m, delta):
    rng = np.random.default_rng(seed)
    pts = np.round(rng.uniform(-1, 1, size=(m, 2)), 3)
    pts = np.unique(pts, axis=0)
    rng.shuffle(pts)
    ctx = DominationContext(rng.normal(size=(int(rng.integers(1, 40)), 2)) * 0.5, NoiseModel())
    C = 3.0
    want = _select_reference(pts, delta, ctx, C)
    fast, t_fast = select_next(pts, delta, ctx, C, "fast")
    naive, t_naive = select_next(pts, delta, ctx, C, "naive")
    assert fast == naive == want
    assert t_fast == pytest.approx(t_naive)


def test_select_next_single_and_errors():
    ctx = DominationContext(np.zeros((3, 2)), NoiseModel())
    assert select_next([[0.2, 0.3]], 0.1, ctx, 3.0) == (0, 0.0)
    with pytest.raises(ValueError):
        select_next(np.zeros((0, 2)), 0.1, ctx, 3.0)
    with pytest.raises(ValueError):
        select_next([[0.0, 0.0], [1.0, 1.0]], 0.1, ctx, 3.0, method="slow")


def _j_star_scan(K, N, sigma, c, const, max_J=12):
    """Evaluate the stopping condition at every level and keep the deepest level before the first failure."""
    C = derived_C(c)
    d = K.diameter
    ok = []
    for J in range(1, max_J + 1):
        eta = eta_J(d, J, C, const)
        radius = d / 2.0 ** (J - 2)
        ent = local_entropy(K, radius, 2 * c, pitch=0.25 * radius / (2 * c))
        ok.append(N * eta * eta / sigma ** 2 > max(4 * ent, math.log(2)))
    return ok.index(False) if False in ok else max_J


@pytest.mark.parametrize("N", [10 ** 4, 10 ** 6, 10 ** 8])
def test_j_star_matches_scan(N):
    K, sigma, c = Interval(0, 1), 0.1, 8.0
    const = exponent_constant(NoiseModel(), derived_C(c))
    want = max(_j_star_scan(K, N, sigma, c, const), 1)
    assert j_star(K, N, sigma, c, const) == want


def test_j_star_grows_with_N():
    K, sigma, c = Hyperrectangle([0, 0], [1, 1]), 0.1, 8.0
    const = exponent_constant(NoiseModel(), derived_C(c))
    js = [j_star(K, N, sigma, c, const) for N in (10, 10 ** 4, 10 ** 6, 10 ** 8)]
    assert js == sorted(js)
    assert js[0] == 1
    assert js[-1] > 1
    assert j_star(Singleton([0.0]), 100, 1.0, c, const) == 1


def test_resolve_steps():
    cfg = EstimatorConfig(iterations="full")
    assert resolve_steps(cfg, 2, 5) == 4
    assert resolve_steps(EstimatorConfig(iterations="jstar"), 2, 5) == 2
    assert resolve_steps(EstimatorConfig(iterations=1), 2, 5) == 3
    with pytest.raises(TreeDepthError):
        resolve_steps(EstimatorConfig(iterations=3), 2, 5)
    with pytest.raises(ValueError):
        resolve_steps(EstimatorConfig(iterations="all"), 2, 5)


def _descend_reference(tree, X, C):
    """Plain transcription of the descent: at step k pick the offspring minimizing T at scale delta_k."""
    ctx = DominationContext(X, NoiseModel())
    idx = 0
    for k in range(1, tree.depth):
        kids = [j for p, j in tree.edges[k].tolist() if p == idx]
        pts = tree.levels[k][kids]
        best = _select_reference(pts, delta_k(tree.d, k, C), ctx, C)
        idx = kids[best]
    return tree.levels[-1][idx]


def test_estimator_matches_reference_descent():
    K = Hyperrectangle([0, 0], [1, 1])
    c, depth = 8.0, 4
    cfg = EstimatorConfig(c=c, depth=depth, iterations="full")
    tree = build_tree(K, K.center, depth, c, default_pitch(K.diameter, depth, c))
    rng = np.random.default_rng(11)
    mu = rng.uniform(0, 1, size=2)
    X = mu + 0.1 * rng.normal(size=(200, 2))
    out, state = run_estimator(X, K, cfg, tree=tree)
    assert np.array_equal(out, _descend_reference(tree, X, cfg.C))
    assert state.steps == depth - 1
    assert len(state.delta_schedule) == depth - 1


def test_estimator_singleton_returns_point():
    K = Singleton([0.25, -1.0])
    X = np.random.default_rng(0).normal(size=(50, 2))
    out, state = run_estimator(X, K)
    assert np.array_equal(out, K.center)
    assert state.steps == 0


def test_estimator_output_is_member_and_close():
    K = EuclideanBall([0, 0], 1.0)
    mu = np.array([0.3, -0.2])
    X = mu + 0.05 * np.random.default_rng(2).normal(size=(400, 2))
    out, _ = run_estimator(X, K, EstimatorConfig(depth=5, iterations="full"))
    assert K.contains(out)
    assert np.linalg.norm(out - mu) < 0.15


def test_estimator_rejects_bad_input():
    K = Interval(0, 1)
    with pytest.raises(ValueError):
        run_estimator(np.zeros((5, 2)), K)
    with pytest.raises(ValueError):
        run_estimator(np.zeros((5, 2)), EuclideanBall([0, 0], 1.0),
                      EstimatorConfig(iterations="full", n_smoothing_reps=0,
                                      noise=NoiseModel("known_subgaussian")))
