import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.distance import cdist, pdist

from starrobust.entropy import (
    countable_packing,
    entropy_profile,
    eta_star,
    greedy_packing,
    local_entropy,
    log_mloc_upper,
    maximal_packing,
    vg_bound,
    vg_sparse_packing,
)
from starrobust.geometry import EuclideanBall, Interval, Singleton, SparseCone, StarCross, lex_order

from .conftest import points_2d


def _greedy_oracle(points, sep):
    """Plain-Python greedy packing: admit a point iff it is farther than sep from all admitted.

    Distances within a relative 1e-9 of sep count as ties, which conflict.
    """
    limit = sep * (1 + 1e-9)
    kept = []
    for i, p in enumerate(points):
        if all(math.dist(p, points[j]) > limit for j in kept):
            kept.append(i)
    return kept


@given(points_2d(max_size=60), st.floats(0.05, 2.0))
def test_greedy_packing_matches_oracle(pts, sep):
    pts = pts[lex_order(pts)]
    keep, rep = greedy_packing(pts, sep)
    assert keep.tolist() == _greedy_oracle(pts.tolist(), sep)
    # Every point is within sep of its representative, which is admitted and earlier.
    assert np.all(np.linalg.norm(pts - pts[rep], axis=1) <= sep * (1 + 2e-9))
    assert np.all(rep <= np.arange(pts.shape[0]))
    assert set(rep.tolist()) <= set(keep.tolist())


def test_greedy_packing_boundary_ties():
    # Points exactly sep apart are in conflict, whatever the floating rounding of cells.
    pts = np.column_stack([np.linspace(-0.08625, -0.02625, 65), np.zeros(65)])
    sep = 0.00375
    keep, _ = greedy_packing(pts, sep)
    assert keep.tolist() == _greedy_oracle(pts.tolist(), sep)


def test_packing_count_is_scale_invariant():
    # A lattice anchored at the ball center scales with eta, so exact lattice
    # ties must resolve identically and the count cannot change.
    K = EuclideanBall([0, 0], 100.0)
    counts = {maximal_packing(K, [0, 0], e, e / 8, e / 32).count for e in np.geomspace(2, 0.04, 12)}
    assert len(counts) == 1


def test_maximal_packing_singleton():
    K = Singleton([1.0, 2.0])
    res = maximal_packing(K, [1.0, 2.0], 0.7, 0.1)
    assert res.count == 1
    assert np.array_equal(res.points[0], [1.0, 2.0])


def test_maximal_packing_interval():
    res = maximal_packing(Interval(0, 1), [0.5], 0.5, 0.26, pitch=1e-3)
    assert res.count == 4
    assert pdist(res.points).min() > 0.26


def test_maximal_packing_ball_count_range():
    K = EuclideanBall([0, 0], 1.0)
    res = maximal_packing(K, [0, 0], 1.0, 1.1, pitch=0.05)
    assert 2 <= res.count <= 5


@pytest.mark.parametrize("K", [EuclideanBall([0, 0], 1.0), StarCross([0, 0], 1.0), Interval(0, 1)],
                         ids=lambda K: type(K).__name__)
def test_maximal_packing_is_packing_and_covering(K):
    sep, pitch = 0.2, 0.02
    nu = K.center
    res = maximal_packing(K, nu, 0.6, sep, pitch)
    if res.count > 1:
        assert pdist(res.points).min() > sep
    cand = K.candidates(nu, 0.6, pitch / 4)
    assert cdist(cand, res.points).min(axis=1).max() <= sep + pitch + 1e-12


def test_local_entropy_singleton():
    assert local_entropy(Singleton([0.0]), 0.3, 8.0) == 0.0


def test_local_entropy_interval_matches_enumeration():
    eta, c = 0.5, 4.0
    sep = eta / c
    pitch = sep / 4
    # The widest window B(0.5, 0.5) & [0, 1] is the whole interval; enumerate its lattice directly.
    grid = [0.5 + pitch * k for k in range(-16, 17)]
    grid = [x for x in grid if -1e-12 <= x <= 1 + 1e-12]
    count = len(_greedy_oracle([[x] for x in grid], sep))
    assert local_entropy(Interval(0, 1), eta, c, pitch=pitch) == pytest.approx(math.log(count))


def test_local_entropy_bounded_by_volume():
    K = EuclideanBall([0, 0], 1.0)
    for eta in (1.0, 0.3):
        assert local_entropy(K, eta, 8.0) <= log_mloc_upper(2, 8.0)


def test_entropy_profile_envelope_is_monotone():
    prof = entropy_profile(StarCross([0, 0], 1.0), np.geomspace(1.0, 0.02, 8), 8.0)
    assert np.all(np.diff(prof.etas) < 0)
    assert np.all(np.diff(prof.log_Mloc) >= 0)
    assert np.all(prof.log_Mloc >= prof.raw_log_Mloc)


@pytest.mark.parametrize("n,s", [(8, 1), (16, 2), (64, 4), (64, 8)])
def test_vg_packing_meets_bound(n, s):
    res = vg_sparse_packing(n, s, 1.0)
    assert math.log(res.count) >= vg_bound(n, s)
    assert np.allclose(np.linalg.norm(res.points, axis=1), 1.0)
    assert pdist(res.points).min() > res.separation


def test_vg_one_sparse_enumeration():
    res = vg_sparse_packing(8, 1, 1.0)
    assert res.count == 8
    assert np.array_equal(res.points, np.eye(8))


def test_vg_two_sparse_against_enumeration():
    # Oracle: greedy over all supports of size 2 in lexicographic order, keeping overlap <= 1.5.
    kept = []
    for sup in itertools.combinations(range(16), 2):
        if all(len(set(sup) & set(k)) <= 1.5 for k in kept):
            kept.append(sup)
    res = vg_sparse_packing(16, 2, 1.0)
    assert res.count == len(kept)
    assert math.log(res.count) >= 2 / 8 * math.log(5)


def test_vg_sparse_packing_rejects_dense():
    with pytest.raises(ValueError):
        vg_sparse_packing(8, 2, 1.0)


def test_eta_star_singleton():
    assert eta_star(Singleton([0.0, 0.0]), 100, 0.1, 8.0) == 0.0


def test_eta_star_interval_crossing():
    K, N, sigma, c = Interval(0, 1), 100, 0.1, 8.0
    es = eta_star(K, N, sigma, c)
    assert 0 < es <= 1

    def lhs_minus_rhs(eta):
        return N * eta * eta / sigma ** 2 - local_entropy(K, eta, c, pitch=0.25 * eta / c)

    assert lhs_minus_rhs(es) <= 0
    # Dense scan oracle. The raw entropy estimate moves by one packing count as
    # the lattice shifts with eta, so the crossing is a narrow band rather than
    # a point: below it every radius is feasible, above it none is.
    scan = np.linspace(0.5 * es, 2.0 * es, 301)
    feasible = np.array([lhs_minus_rhs(e) <= 0 for e in scan])
    first_bad = scan[np.argmin(feasible)]
    last_good = scan[np.flatnonzero(feasible).max()]
    assert first_bad * (1 - 1e-3) <= es * (1 + 0.05)
    assert es <= last_good * (1 + 1e-3)
    assert last_good / first_bad < 1.05


def test_eta_star_scales_with_sigma():
    K = EuclideanBall([0.0], 1000.0)
    a = eta_star(K, 100, 1.0, 8.0)
    b = eta_star(K, 100, 2.0, 8.0)
    assert b / a == pytest.approx(2.0, rel=5e-3)


def test_countable_packing_real_line():
    K = SparseCone(1, 1)
    res = countable_packing(K, 1.0, (np.zeros(1), 5.0))
    assert pdist(res.points).min() > 1.0
    grid = K.candidates(np.zeros(1), 5.0, 0.01)
    assert cdist(grid, res.points).min(axis=1).max() <= 2.0


def test_countable_packing_singleton():
    res = countable_packing(Singleton([0.2, 0.1]), 0.5, (np.array([0.2, 0.1]), 1.0))
    assert res.count == 1


def test_countable_packing_covering_sampled():
    K = SparseCone(2, 1)
    m = 0.4
    res = countable_packing(K, m, (np.zeros(2), 3.0))
    rng = np.random.default_rng(3)
    axis = rng.integers(0, 2, size=1000)
    t = rng.uniform(-3, 3, size=1000)
    members = np.zeros((1000, 2))
    members[np.arange(1000), axis] = t
    assert cdist(members, res.points).min(axis=1).max() <= 2 * m
    assert pdist(res.points).min() > m
