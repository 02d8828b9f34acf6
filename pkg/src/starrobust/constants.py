"""Constant recipes for the pairwise tests, the stopping rule and localization.

Only existence of most constants is guaranteed by the theory, so every recipe
here picks a concrete value with a 1% margin that keeps strict inequalities
strict under floating point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

MARGIN = 1.01
LOG2 = math.log(2.0)
LOG4 = math.log(4.0)


class InfeasibleConstantsError(ValueError):
    """Raised when no admissible constant exists for the requested parameters."""


class GammaBoundWarning(UserWarning):
    """Emitted when a user-supplied gamma violates its theoretical lower bound."""


def Phi(z):
    """Standard normal CDF."""
    return ndtr(z)


def Phi_inv(p):
    """Standard normal quantile."""
    return ndtri(p)


def _check_t(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr >= 0.5) or np.any(~np.isfinite(arr)):
        raise ValueError("t must lie in [0, 1/2)")
    return arr


def g(t):
    """``(1/2 + t) log(1/2 + t) + (1/2 - t) log(1 - 2t)`` on ``[0, 1/2)``."""
    arr = _check_t(t)
    out = (0.5 + arr) * np.log(0.5 + arr) + (0.5 - arr) * np.log1p(-2.0 * arr)
    return float(out) if out.ndim == 0 else out


def h(t):
    """``t (1 - exp(2 g(t) / (1/2 - t)))`` on ``[0, 1/2)``; increases from 0 toward 1/2."""
    arr = _check_t(t)
    out = arr * (1.0 - np.exp(2.0 * np.asarray(g(arr)) / (0.5 - arr)))
    return float(out) if out.ndim == 0 else out


def g_ratio(t):
    """``-2 g(t) / (1/2 - t)``, which increases from ``log 4`` on ``[0, 1/2)``."""
    arr = _check_t(t)
    out = -2.0 * np.asarray(g(arr)) / (0.5 - arr)
    return float(out) if out.ndim == 0 else out


def h_inverse(target: float) -> float:
    """The unique ``t`` in ``[0, 1/2)`` with ``h(t) = target``."""
    if not 0.0 <= target < 0.5:
        raise ValueError("h maps [0, 1/2) onto [0, 1/2)")
    if target == 0.0:
        return 0.0
    hi = 0.5 - 1e-15
    if h(hi) <= target:
        raise InfeasibleConstantsError(f"h does not reach {target} in double precision")
    return float(brentq(lambda t: h(t) - target, 0.0, hi, xtol=1e-15, rtol=1e-14, maxiter=500))


def _alpha_for(target: float) -> float:
    root = h_inverse(target)
    alpha = MARGIN * root if root > 0 else (MARGIN - 1.0) / 2.0
    if not alpha < 0.5:
        raise InfeasibleConstantsError(
            f"alpha = {alpha:.6g} leaves (0, 1/2) after the margin; the corruption level is too close to 1/2"
        )
    return alpha


@dataclass(frozen=True)
class GaussianConstants:
    """Resolved constants for the Gaussian majority test."""

    C: float
    kappa: float
    C_prime: float
    alpha: float
    beta: float
    C1: float
    C2: float
    L: float
    C3: float

    def as_dict(self) -> dict:
        return asdict(self)


def solve_gaussian_constants(C: float, kappa: float) -> GaussianConstants:
    """Constants for the Gaussian test at corruption level ``1/2 - kappa``.

    ``alpha`` is 1% above the root of ``h(alpha) = 1/2 - kappa``; ``beta`` is
    1% above the smallest value with ``Phi^{-1}(1/2 + beta/C') >
    sqrt(-2 g(alpha) / (1/2 - alpha))``. Then ``L = Phi^{-1}(1/2 + beta/C')``,
    ``C1 = 2L/beta``, ``C2 = beta/L`` (so ``C1 C2 = 2``) and ``C3`` is the
    smaller of the two case exponents ``C2^2/2`` and ``(1/2 - alpha) C'^2 / 2``.
    """
    if not C > 2:
        raise ValueError("need C > 2")
    if not 0 < kappa <= 0.5:
        raise ValueError("need kappa in (0, 1/2]")
    c_prime = (C - 2.0) / (2.0 * math.sqrt(2.0 * math.pi))
    alpha = _alpha_for(0.5 - kappa)
    s = math.sqrt(g_ratio(alpha))
    beta = MARGIN * c_prime * (float(Phi(s)) - 0.5)
    if not beta / c_prime < 0.5:
        raise InfeasibleConstantsError("beta / C' must stay below 1/2")
    L = float(Phi_inv(0.5 + beta / c_prime))
    C1 = 2.0 * L / beta
    C2 = beta / L
    C3 = min(C2 * C2 / 2.0, (0.5 - alpha) * c_prime * c_prime / 2.0)
    return GaussianConstants(float(C), float(kappa), c_prime, alpha, beta, C1, C2, L, C3)


@dataclass(frozen=True)
class GroupedConstants:
    """Configuration for the grouped majority test (known or symmetric sub-Gaussian noise).

    The theory only asserts that suitable constants exist, so ``k`` and
    ``gamma`` are plain settings. ``C1 C2 = 2k`` is enforced and the exponent
    is taken as ``C3 = C2^2 / (2k)``, mirroring the Gaussian first-case exponent
    after grouping.
    """

    k: int = 4
    gamma: float = 0.1
    C2: float = 1.0
    C1: float = field(default=float("nan"))
    C3: float = field(default=float("nan"))

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("group size must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.C2 > 0:
            raise ValueError("C2 must be positive")
        c1 = 2.0 * self.k / self.C2
        if not math.isnan(self.C1) and abs(self.C1 * self.C2 - 2 * self.k) > 1e-9:
            raise ValueError("need C1 * C2 = 2k")
        object.__setattr__(self, "C1", c1)
        if math.isnan(self.C3):
            object.__setattr__(self, "C3", self.C2 ** 2 / (2.0 * self.k))

    def max_epsilon(self) -> float:
        """Largest admissible corruption level ``gamma / k``."""
        return self.gamma / self.k

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class UnknownSubGaussianConstants:
    """Constants for the trimmed-mean test under unknown sub-Gaussian noise.

    ``C3`` and ``D2`` are settings; the rest follow from them::

        D1 = 4 sqrt(2 (C3 + log 4))      D3 = 8 + 3 D1^2 / 8
        D4 = D2 sqrt(2 D3) + D1          D6 = sqrt(64 D3 log 2)

    ``C - 2`` is 1% above ``max(D1, D4, D6, sqrt(64 D3 (log 2 + s^2)))`` with
    ``s^2 = -2 g(alpha) / (1/2 - alpha)``; ``C1`` is 1% above
    ``D2 D3 / (C - 2 - D1)``; the majority-branch exponent is
    ``C4 = (1/2 - alpha) beta (C - 2)^2 / 32`` with
    ``beta = 1 - 64 D3 log 2 / (C - 2)^2``; and ``C5 = min(C3, C4)``.
    """

    C3: float
    D1: float
    D2: float
    D3: float
    D4: float
    D6: float
    C: float
    C1: float
    C4: float
    C5: float
    alpha: float
    beta: float

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def c(self) -> float:
        """The packing constant ``c = 2(C + 1)`` matching this ``C``."""
        return 2.0 * (self.C + 1.0)


def _d_constants(C3: float, D2: float) -> tuple[float, float, float, float]:
    D1 = 4.0 * math.sqrt(2.0 * (C3 + LOG4))
    D3 = 8.0 + 3.0 * D1 * D1 / 8.0
    D4 = D2 * math.sqrt(2.0 * D3) + D1
    D6 = math.sqrt(64.0 * D3 * LOG2)
    return D1, D3, D4, D6


def solve_unknown_subgaussian_constants(C3: float = 0.1, D2: float = 24.0) -> UnknownSubGaussianConstants:
    """Resolve the unknown sub-Gaussian constants from ``C3`` and ``D2``."""
    if not C3 > 0 or not D2 > 0:
        raise ValueError("C3 and D2 must be positive")
    D1, D3, D4, D6 = _d_constants(C3, D2)
    alpha = _alpha_for(1.0 / 32.0)
    s2 = g_ratio(alpha)
    gap = MARGIN * max(D1, D4, D6, math.sqrt(64.0 * D3 * (LOG2 + s2)))
    C = gap + 2.0
    C1 = MARGIN * D2 * D3 / (gap - D1)
    beta = 1.0 - 64.0 * D3 * LOG2 / gap ** 2
    C4 = (0.5 - alpha) * beta * gap ** 2 / 32.0
    return UnknownSubGaussianConstants(C3, D1, D2, D3, D4, D6, C, C1, C4, min(C3, C4), alpha, beta)


def subgaussian_feasibility(C: float, C3: float = 0.1, D2: float = 24.0, C1: float | None = None) -> list[str]:
    """Violated requirements for running the trimmed-mean test with a given ``C``.

    An empty list means ``C`` satisfies ``C - 2 > max(D1, D4, D6)`` and, when
    ``C1`` is given, ``D2 D3 / (C1 (C - 2 - D1))`` lies in ``(0, 1)``.
    """
    D1, D3, D4, D6 = _d_constants(C3, D2)
    problems = []
    if not C - 2.0 > max(D1, D4, D6):
        problems.append(f"C - 2 = {C - 2.0:.4g} must exceed max(D1, D4, D6) = {max(D1, D4, D6):.4g}")
    if C1 is not None:
        denom = C1 * (C - 2.0 - D1)
        ratio = D2 * D3 / denom if denom != 0 else math.inf
        if not 0 < ratio < 1:
            problems.append(f"D2 D3 / (C1 (C - 2 - D1)) = {ratio:.4g} must lie in (0, 1)")
    return problems


def derived_C(c: float) -> float:
    """``C = c/2 - 1``; the tournament constant is always tied to the packing constant."""
    return c / 2.0 - 1.0


def eta_J(d: float, J: int, C: float, exponent_const: float) -> float:
    """``d sqrt(C3) / (2^{J-1} (C + 1))``."""
    if J < 1:
        raise ValueError("J must be at least 1")
    return d * math.sqrt(exponent_const) / (2.0 ** (J - 1) * (C + 1.0))


def delta_k(d: float, k: int, C: float) -> float:
    """Tournament scale ``d / (2^k (C + 1))`` used when selecting level ``k + 1``."""
    return d / (2.0 ** k * (C + 1.0))


def gamma_lower_bound_gaussian(consts: GaussianConstants) -> float:
    C = consts.C
    return max(1.0 - consts.C3 / (6.0 * (C + 1.0) ** 2 * LOG2), 1.0 - 4.0 / ((C + 1.0) ** 2 * consts.C1 ** 2))


def gamma_lower_bound_subgaussian(C: float, C5: float, C1: float) -> float:
    return max(
        1.0 - C5 / (6.0 * (C + 1.0) ** 2 * LOG2),
        1.0 - 1.0 / (C + 1.0) ** 2,
        1.0 - 1.0 / (C1 ** 2 * (C + 1.0) ** 2),
    )


@dataclass(frozen=True)
class UnboundedParams:
    """Localization radius and the derived tree scale for unbounded sets."""

    gamma: float
    R: float
    m: float
    d_m: float
    c: float
    candidates: dict
    gamma_bound: float | None = None
    gamma_ok: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


def R_candidates(n: int, sigma: float, epsilon: float, gamma: float, C: float) -> dict[str, float]:
    """The four lower bounds a localization radius must exceed."""
    if not 0 <= epsilon < 0.5:
        raise ValueError("need epsilon in [0, 1/2)")
    if not 0 < gamma < 1:
        raise ValueError("need gamma in (0, 1)")
    half = 0.5 - epsilon
    return {
        "norm_tail": math.sqrt(8.0 * n * sigma ** 2 * math.log(5.0) / (1.0 - gamma)),
        "g_term": math.sqrt(-32.0 * sigma ** 2 * g(epsilon) / (gamma * half)),
        "log2_term": math.sqrt(512.0 * sigma ** 2 * LOG2 / (gamma * half)),
        "scale": 2.0 * (C + 1.0),
    }


def select_R(
    n: int,
    sigma: float,
    epsilon: float,
    gamma: float,
    c: float = 8.0,
    gamma_bound: float | None = None,
    strict: bool = False,
) -> UnboundedParams:
    """``R = 1.01 * max`` of the radius lower bounds, with ``m = R/(c-1)`` and ``d_m = 2m + 2R``.

    ``gamma_bound`` is the variant's lower bound on gamma. Violating it raises
    in ``strict`` mode and otherwise warns, since the bound tends to force
    gamma so close to 1 that ``R`` becomes impractically large.
    """
    C = derived_C(c)
    ok = True
    if gamma_bound is not None and not gamma > gamma_bound:
        ok = False
        msg = f"gamma = {gamma} does not exceed its lower bound {gamma_bound:.6g}"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, GammaBoundWarning, stacklevel=2)
    cands = R_candidates(n, sigma, epsilon, gamma, C)
    R = MARGIN * max(cands.values())
    m = R / (c - 1.0)
    return UnboundedParams(float(gamma), R, m, 2.0 * m + 2.0 * R, float(c), cands, gamma_bound, ok)
