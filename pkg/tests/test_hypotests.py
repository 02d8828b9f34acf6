import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starrobust.hypotests import (
    DominationContext,
    InvalidRegimeError,
    NoiseModel,
    clamp,
    dominates,
    eps_tilde,
    group_means,
    psi_gaussian,
    psi_grouped,
    psi_unknown_subgaussian,
    tm_branch,
    trimmed_mean,
    trimmed_mean_at,
    type1_quantiles,
    v_statistic,
)

from .conftest import points_2d


def test_psi_gaussian_single_observation():
    nu1, nu2 = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    assert psi_gaussian(nu1, nu2, nu1[None, :]) == 0
    assert psi_gaussian(nu1, nu2, nu2[None, :]) == 1


def test_psi_gaussian_hand_count():
    assert psi_gaussian([0.0], [1.0], np.array([0.2, 0.3, 0.9])) == 0
    # Ties count toward nu2: two of four rows at the midpoint reach N/2.
    assert psi_gaussian([0.0], [1.0], np.array([0.5, 0.5, 0.1, 0.1])) == 1


@given(points_2d(min_size=1, max_size=25))
def test_psi_gaussian_matches_count(X):
    nu1, nu2 = np.array([-0.5, 0.2]), np.array([0.7, -0.1])
    closer2 = sum(math.dist(x, nu1) >= math.dist(x, nu2) for x in X.tolist())
    # Ties in the square root can flip only on exact equality, which random floats avoid.
    assert psi_gaussian(nu1, nu2, X) == int(closer2 >= len(X) / 2)


def test_psi_grouped_reduces_to_gaussian():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(21, 2))
    nu1, nu2 = np.array([0.0, 0.0]), np.array([0.3, 0.1])
    assert psi_grouped(nu1, nu2, X, np.zeros_like(X), 1) == psi_gaussian(nu1, nu2, X)


def test_psi_grouped_single_group():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(10, 1))
    R = rng.normal(size=(10, 1))
    grand = float((X + R).mean())
    expect = int(abs(grand - 0.0) >= abs(grand - 1.0))
    assert psi_grouped([0.0], [1.0], X, R, 10) == expect


def test_psi_grouped_two_groups_by_hand():
    X = np.array([[0.0], [0.2], [1.0], [1.2]])
    R = np.zeros_like(X)
    # Group means 0.1 and 1.1: one of two groups is closer to 1, which meets G/2 = 1.
    assert psi_grouped([0.0], [1.0], X, R, 2) == 1
    # Against nu2 = 3 both means are closer to 0.
    assert psi_grouped([0.0], [3.0], X, R, 2) == 0


def test_group_means_drops_tail():
    means, dropped = group_means(np.arange(7.0), 3)
    assert means.ravel().tolist() == [1.0, 4.0]
    assert dropped == 1
    with pytest.raises(ValueError):
        group_means(np.arange(3.0), 4)


def test_v_statistic_examples():
    assert v_statistic([0.0, 0.0], [2.0, 0.0], [1.0, 5.0]) == 0.0
    nu1, nu2 = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    assert v_statistic(nu1, nu2, nu2) == pytest.approx(5.0)
    assert v_statistic([0.0], [2.0], [0.5]) == pytest.approx(-1.0)
    rows = v_statistic([0.0], [2.0], np.array([[0.5], [1.0]]))
    assert rows.tolist() == pytest.approx([-1.0, 0.0])


def test_clamp_exact():
    assert clamp([-3.0, 0.5, 7.0], 0.0, 1.0).tolist() == [0.0, 0.5, 1.0]
    assert clamp([0.25], 0.25, 0.25).tolist() == [0.25]
    with pytest.raises(ValueError):
        clamp([0.0], 1.0, 0.0)


def test_type1_quantiles_convention():
    assert type1_quantiles([3, 1, 2, 0], 0.25) == (0.0, 2.0)
    assert type1_quantiles(np.arange(10.0), 0.1) == (0.0, 8.0)


def test_trimmed_mean_all_equal():
    assert trimmed_mean(np.full(400, 2.5), 0.01, 0.5) == 2.5


def test_trimmed_mean_hand_example():
    values = np.array([-100.0, 1.0, 1.0, 100.0, 0.0, 1.0, 2.0, 3.0])
    # Quantiles of {0, 1, 2, 3} at 0.25 and 0.75 are 0 and 2; the clamped first half is {0, 1, 1, 2}.
    assert trimmed_mean_at(values, 0.25) == pytest.approx(1.0)


@given(st.integers(0, 10 ** 6), st.integers(0, 9), st.floats(0.0, 50.0))
def test_trimmed_mean_monotone(seed, idx, bump):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=20)
    base = trimmed_mean_at(values, 0.2)
    values[idx] += bump
    assert trimmed_mean_at(values, 0.2) >= base


def test_trimmed_mean_level_checks():
    assert eps_tilde(0.05, 0.05, 500) == pytest.approx(0.4 + 12 * math.log(80) / 500)
    with pytest.raises(InvalidRegimeError):
        trimmed_mean(np.zeros(1000), 0.05, 0.05)
    with pytest.raises(ValueError):
        trimmed_mean_at(np.zeros(3), 0.1)


def test_unknown_branch_reduces_to_majority():
    noise = NoiseModel("unknown_subgaussian", sigma=1.0, epsilon=0.0)
    delta = 2.0 * math.sqrt(1.0 / (4 * noise.D3))
    assert not tm_branch(delta, noise)
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 2))
    R = rng.normal(size=(40, 2))
    nu1, nu2 = np.array([0.0, 0.0]), np.array([0.5, 0.0])
    Y = X + R
    closer2 = np.sum(((Y - nu1) ** 2).sum(1) >= ((Y - nu2) ** 2).sum(1))
    assert psi_unknown_subgaussian(nu1, nu2, X, R, delta, noise) == int(closer2 >= 20)
    assert psi_unknown_subgaussian(nu1, nu2, X, R, 1e6, noise) == int(closer2 >= 20)


def test_unknown_trimmed_branch_sign():
    noise = NoiseModel("unknown_subgaussian", sigma=1.0, epsilon=0.0, C3=0.1)
    delta = 0.5 * math.sqrt(1.0 / (4 * noise.D3))
    assert tm_branch(delta, noise)
    N = 4000
    X = np.zeros((2 * N, 1))
    R = np.zeros((2 * N, 1))
    # Data at nu1: every V equals -|nu1 - nu2| < 0, so the trimmed mean is negative.
    assert psi_unknown_subgaussian([0.0], [1.0], X, R, delta, noise) == 0
    assert psi_unknown_subgaussian([-1.0], [0.0], X, R, delta, noise) == 1


def test_dominates_concentrated_data():
    a = np.array([0.3, 0.3])
    ctx = DominationContext(np.repeat(a[None, :], 11, axis=0), NoiseModel())
    for b in ([5.0, 0.0], [-4.0, 2.0], [0.3, 9.0]):
        assert dominates(a, b, ctx) == 1
        assert dominates(b, a, ctx) == 0


@given(st.integers(0, 10 ** 6))
def test_dominates_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    ctx = DominationContext(rng.normal(size=(15, 2)), NoiseModel())
    for _ in range(25):
        a, b = rng.normal(size=2), rng.normal(size=2)
        assert dominates(a, b, ctx) + dominates(b, a, ctx) == 1


def test_domination_cycle_exists():
    z1, z2, z3 = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.5, math.sqrt(3) / 2])
    # Voters each sit near one vertex, leaning toward the next one around the triangle.
    voters = np.stack([0.8 * z1 + 0.2 * z2, 0.8 * z2 + 0.2 * z3, 0.8 * z3 + 0.2 * z1])
    ctx = DominationContext(voters, NoiseModel())
    assert dominates(z1, z2, ctx) == 1
    assert dominates(z2, z3, ctx) == 1
    assert dominates(z3, z1, ctx) == 1


def test_noise_model_checks():
    with pytest.raises(ValueError):
        NoiseModel("cauchy")
    with pytest.raises(ValueError):
        NoiseModel("known_subgaussian", epsilon=0.2, k=4, gamma=0.1)
    with pytest.raises(ValueError):
        DominationContext(np.zeros((4, 1)), NoiseModel("known_subgaussian"))
