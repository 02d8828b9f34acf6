"""Lower bounds, rate envelopes and the tail inequalities used by the tests.

Lower-bound calculators drop unspecified absolute constants (set to 1), so
their outputs are meaningful up to absolute constants only.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtr

from .entropy import local_entropy, log_mloc_upper
from .geometry import StarSet

LOG2 = math.log(2.0)
VARIANTS = ("gaussian", "known_subgaussian", "unknown_subgaussian")


@dataclass(frozen=True)
class RateEnvelope:
    """Minimax rate terms for one configuration (up to absolute constants)."""

    variant: str
    eta_star_sq: float
    corruption_term: float
    d_sq: float | None
    rate: float

    def as_dict(self) -> dict:
        return asdict(self)


def corruption_term(variant: str, sigma: float, epsilon: float) -> float:
    """``sigma^2 eps^2``, or ``sigma^2 eps^2 log(1/eps)`` under unknown sub-Gaussian noise."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if epsilon <= 0:
        return 0.0
    base = sigma * sigma * epsilon * epsilon
    if variant == "unknown_subgaussian":
        return base * math.log(1.0 / epsilon)
    return base


def rate_envelope(variant: str, eta_star: float, sigma: float, epsilon: float, d: float | None = None) -> RateEnvelope:
    """``max(eta*^2, corruption term)``, capped at ``d^2`` for bounded sets (``d`` given)."""
    if not 0 <= epsilon < 0.5:
        raise ValueError("need epsilon in [0, 1/2)")
    term = corruption_term(variant, sigma, epsilon)
    rate = max(eta_star * eta_star, term)
    d_sq = None
    if d is not None:
        d_sq = float(d) ** 2
        rate = min(rate, d_sq)
    return RateEnvelope(variant, float(eta_star) ** 2, term, d_sq, rate)


def parametric_ratio(eta_star: float, sigma: float, N: int, d: float | None = None) -> float:
    """``(eta*^2 ^ d^2) / (sigma^2 / N ^ d^2)``, where ``^`` is the minimum.

    The fixed point never falls below the parametric rate by more than an
    absolute constant, so this ratio stays bounded away from zero. For a
    non-degenerate set with ``log M^loc >= log 2`` it is at least ``log 2``.
    """
    if not sigma > 0 or N < 1:
        raise ValueError("need sigma > 0 and N >= 1")
    top = eta_star * eta_star
    bottom = sigma * sigma / N
    if d is not None:
        top = min(top, float(d) ** 2)
        bottom = min(bottom, float(d) ** 2)
    return top / bottom


def fano_lower(
    K: StarSet,
    N: int,
    sigma: float,
    c: float,
    etas=None,
    region: tuple | None = None,
    pitch_ratio: float = 0.25,
) -> float:
    """Largest ``eta^2 / (8 c^2)`` over ``etas`` with ``log M^loc(eta, c) > 4 max(N eta^2 / (2 sigma^2), log 2)``.

    Returns 0 when no grid value qualifies. The default grid has 24 values
    geometrically spaced from the diameter (or region radius) down by 2^-10.
    """
    if K.bounded and K.diameter == 0:
        return 0.0
    if etas is None:
        top = K.diameter if K.bounded else float(region[1])
        etas = top * np.geomspace(1.0, 2.0 ** -10, 24)
    # The objective grows with eta, so the largest qualifying eta wins.
    for eta in np.sort(np.asarray(etas, float))[::-1]:
        need = 4.0 * max(N * eta * eta / (2.0 * sigma * sigma), LOG2)
        if need >= log_mloc_upper(K.dimension, c):
            continue
        if local_entropy(K, float(eta), c, pitch=pitch_ratio * eta / c, region=region) > need:
            return float(eta * eta / (8.0 * c * c))
    return 0.0


def corruption_lower(sigma: float, epsilon: float, d: float | None) -> float:
    """``eps^2 sigma^2`` capped at ``d^2`` (meaningful for ``eps >= 1/sqrt(N)``)."""
    if not 0 <= epsilon < 0.5:
        raise ValueError("need epsilon in [0, 1/2)")
    val = epsilon * epsilon * sigma * sigma
    return val if d is None else min(val, float(d) ** 2)


def subgaussian_lower(sigma: float, epsilon: float, d: float | None) -> float:
    """``eps^2 sigma^2 log(1/eps)`` capped at ``d^2``."""
    if not 0 <= epsilon < 0.5:
        raise ValueError("need epsilon in [0, 1/2)")
    if epsilon == 0:
        return 0.0
    val = epsilon * epsilon * sigma * sigma * math.log(1.0 / epsilon)
    return val if d is None else min(val, float(d) ** 2)


def _check_prob(p: float, name: str = "p") -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1]")


def kl_divergence(q: float, p: float) -> float:
    """Bernoulli relative entropy ``q log(q/p) + (1-q) log((1-q)/(1-p))``."""
    _check_prob(q, "q")
    _check_prob(p, "p")

    def term(a: float, b: float) -> float:
        if a == 0.0:
            return 0.0
        if b == 0.0:
            return math.inf
        return a * math.log(a / b)

    return term(q, p) + term(1.0 - q, 1.0 - p)


def hoeffding_tail(N: int, p: float, t: float) -> float:
    """``exp(-2 N t^2)``, bounding ``P(Bin(N, p) <= N(p - t))`` and the matching upper tail."""
    _check_prob(p)
    if N < 1:
        raise ValueError("N must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return min(1.0, math.exp(-2.0 * N * t * t))


def kl_chernoff_tail(N: int, p: float, q: float) -> float:
    """``exp(-N D(q || p))``, bounding ``P(Bin(N, p) <= N q)`` for ``q <= p`` (and the upper tail for ``q >= p``)."""
    if N < 1:
        raise ValueError("N must be positive")
    return math.exp(-N * kl_divergence(q, p))


def gaussian_tail(z: float) -> float:
    """``exp(-z^2/2) / 2``, which bounds ``1 - Phi(z)`` for ``z >= 0``."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    return 0.5 * math.exp(-0.5 * z * z)


def subgaussian_norm_tail(n: int, sigma: float, R: float) -> float:
    """``5^n exp(-R^2 / (8 sigma^2))`` (capped at 1), bounding ``P(|X - mu| > R)``."""
    if n < 1 or not sigma > 0 or R < 0:
        raise ValueError("need n >= 1, sigma > 0 and R >= 0")
    log_val = n * math.log(5.0) - R * R / (8.0 * sigma * sigma)
    return 1.0 if log_val >= 0 else math.exp(log_val)


def cdf_convexity_bound(z: float, L: float) -> float:
    """Chord bound ``1/2 - (z/L)(Phi(L) - 1/2)`` on ``1 - Phi(z)`` for ``0 <= z <= L``."""
    if not L > 0:
        raise ValueError("L must be positive")
    if not 0 <= z <= L:
        raise ValueError("need 0 <= z <= L")
    return 0.5 - (z / L) * (float(ndtr(L)) - 0.5)
