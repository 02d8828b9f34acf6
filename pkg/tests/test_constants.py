import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from starrobust.constants import (
    GammaBoundWarning,
    GroupedConstants,
    R_candidates,
    delta_k,
    derived_C,
    eta_J,
    g,
    g_ratio,
    h,
    h_inverse,
    select_R,
    solve_gaussian_constants,
    solve_unknown_subgaussian_constants,
    subgaussian_feasibility,
)

GRID = np.linspace(0.0, 0.5, 1001)[:-1]


def test_g_at_zero():
    assert g(0.0) == pytest.approx(-math.log(2) / 2, abs=1e-12)


def test_g_ratio_limit_at_zero():
    t = 1e-8
    assert -2 * g(t) / (0.5 - t) == pytest.approx(math.log(4), abs=1e-5)


def test_h_near_half():
    assert h(0.49) > 0.45


def test_g_negative_on_grid():
    assert np.all(g(GRID) < 0)


def test_g_ratio_increasing_on_grid():
    r = g_ratio(GRID[1:])
    assert np.all(np.diff(r) > 0)
    assert np.all(r > math.log(4))


def test_h_over_t_in_unit_interval():
    t = GRID[1:]
    ratio = h(t) / t
    assert np.all((ratio > 0) & (ratio < 1))


def test_g_matches_direct_formula():
    t = GRID[::37]
    direct = [(0.5 + x) * math.log(0.5 + x) + (0.5 - x) * math.log(1 - 2 * x) for x in t]
    assert np.allclose(g(t), direct, rtol=1e-12, atol=1e-15)


@given(st.floats(1e-6, 0.49))
def test_h_inverse_round_trip(target):
    t = h_inverse(target)
    assert h(t) == pytest.approx(target, abs=1e-10)


def test_g_rejects_out_of_range():
    with pytest.raises(ValueError):
        g(0.5)
    with pytest.raises(ValueError):
        h(-0.1)


@pytest.mark.parametrize("C,kappa", [(6, 0.25), (10, 0.1), (6, 0.45)])
def test_gaussian_constants_product_and_conditions(C, kappa):
    k = solve_gaussian_constants(C, kappa)
    assert k.C1 * k.C2 == pytest.approx(2.0, abs=1e-9)
    assert k.C_prime == pytest.approx((C - 2) / (2 * math.sqrt(2 * math.pi)))
    # L solves Phi(L) - 1/2 = beta / C'.
    assert norm.cdf(k.L) - 0.5 == pytest.approx(k.beta / k.C_prime, rel=1e-10)
    eps = 0.5 - kappa
    # C' delta / sigma ranges over (L, 10 L] on a 100-point grid.
    ratios = np.linspace(k.L, 10 * k.L, 101)[1:]
    rho = np.exp(-ratios ** 2)
    assert np.all(eps < k.alpha * (1 - rho))
    assert np.all((0.5 - k.alpha) * np.log(1 / rho) >= -2 * g(k.alpha))
    assert 0 < k.alpha < 0.5
    assert k.C3 > 0


def test_gaussian_constants_argument_checks():
    with pytest.raises(ValueError):
        solve_gaussian_constants(2.0, 0.25)
    with pytest.raises(ValueError):
        solve_gaussian_constants(6.0, 0.0)


def test_grouped_constants():
    k = GroupedConstants()
    assert k.C1 * k.C2 == pytest.approx(2 * k.k)
    assert k.max_epsilon() == pytest.approx(k.gamma / k.k)
    with pytest.raises(ValueError):
        GroupedConstants(k=2, C2=1.0, C1=3.0)


def test_unknown_subgaussian_constants_feasible():
    k = solve_unknown_subgaussian_constants()
    assert subgaussian_feasibility(k.C, k.C3, k.D2, k.C1) == []
    assert k.D1 == pytest.approx(4 * math.sqrt(2 * (0.1 + math.log(4))))
    assert k.D3 == pytest.approx(8 + 3 * k.D1 ** 2 / 8)
    assert 0 < k.C5 <= k.C3
    assert subgaussian_feasibility(5.0) != []


def test_select_R_matches_candidates():
    n, sigma, eps, gamma, c = 2, 1.0, 0.1, 0.99, 8.0
    C = derived_C(c)
    half = 0.5 - eps
    g_eps = (0.5 + eps) * math.log(0.5 + eps) + (0.5 - eps) * math.log(1 - 2 * eps)
    direct = max(
        math.sqrt(8 * n * sigma ** 2 * math.log(5) / (1 - gamma)),
        math.sqrt(-32 * sigma ** 2 * g_eps / (gamma * half)),
        math.sqrt(512 * sigma ** 2 * math.log(2) / (gamma * half)),
        2 * (C + 1),
    )
    p = select_R(n, sigma, eps, gamma, c)
    assert p.R == pytest.approx(1.01 * direct, rel=1e-12)
    assert p.d_m / p.R == pytest.approx(16 / 7)
    assert p.m == pytest.approx(p.R / 7)


@given(st.floats(1e-4, 0.499))
def test_second_radicand_positive(eps):
    assert g_ratio(eps) > math.log(4)
    assert R_candidates(2, 1.0, eps, 0.5, 3.0)["g_term"] > 0


def test_select_R_gamma_bound():
    with pytest.warns(GammaBoundWarning):
        p = select_R(2, 1.0, 0.1, 0.5, gamma_bound=0.9)
    assert not p.gamma_ok
    with pytest.raises(ValueError):
        select_R(2, 1.0, 0.1, 0.5, gamma_bound=0.9, strict=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert select_R(2, 1.0, 0.1, 0.95, gamma_bound=0.9).gamma_ok


def test_eta_J_and_delta_k():
    d, C, c3 = 2.0, 3.0, 0.04
    assert eta_J(d, 1, C, c3) == pytest.approx(d * math.sqrt(c3) / (C + 1))
    for J in range(1, 8):
        assert eta_J(d, J + 1, C, c3) == eta_J(d, J, C, c3) / 2
    assert delta_k(d, 3, C) == pytest.approx(d / (8 * (C + 1)))
    with pytest.raises(ValueError):
        eta_J(d, 0, C, c3)
