"""Robust pairwise tests and the domination relation they induce.

Three noise models are supported:

``gaussian``
    majority vote of the raw observations.
``known_subgaussian``
    majority vote of group means of smoothed observations ``X_i + R_i``.
``unknown_subgaussian``
    on ``2N`` smoothed observations, a trimmed mean of the projection
    statistic ``V`` at small scales and a majority vote at large scales.

Distances are compared through squared norms, which orders them exactly as
the norms do while avoiding rounding in the square root.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._kernels import PSI_MAJORITY, PSI_TRIMMED, point_sq_dists, trimmed_mean_kernel
from .constants import GroupedConstants
from .geometry import lex_less

NOISE_VARIANTS = ("gaussian", "known_subgaussian", "unknown_subgaussian")
UNKNOWN_EPS_LIMIT = 1.0 / 32.0


class InvalidRegimeError(ValueError):
    """Raised when the trimming level leaves ``(0, 1/2)``."""


class BreakdownWarning(UserWarning):
    """Emitted when the corruption level exceeds what the theory covers."""


@dataclass(frozen=True)
class NoiseModel:
    """Noise family, scale and the test configuration that goes with it.

    ``k`` and ``gamma`` configure the grouped test; ``epsilon``, ``C3`` and
    ``D2`` configure the trimmed-mean test.
    """

    variant: str = "gaussian"
    sigma: float = 1.0
    k: int = 4
    gamma: float = 0.1
    epsilon: float = 0.0
    C3: float = 0.1
    D2: float = 24.0

    def __post_init__(self):
        if self.variant not in NOISE_VARIANTS:
            raise ValueError(f"unknown noise variant {self.variant!r}; expected one of {NOISE_VARIANTS}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 <= self.epsilon < 0.5:
            raise ValueError("epsilon must lie in [0, 1/2)")
        if self.variant == "known_subgaussian":
            GroupedConstants(self.k, self.gamma)
            if self.epsilon > self.gamma / self.k:
                raise ValueError(f"grouped test needs epsilon <= gamma/k = {self.gamma / self.k}")
        if self.variant == "unknown_subgaussian" and not self.epsilon < UNKNOWN_EPS_LIMIT:
            warnings.warn(
                f"epsilon = {self.epsilon} is not below 1/32; the trimmed-mean guarantee does not apply",
                BreakdownWarning,
                stacklevel=3,
            )

    @property
    def D3(self) -> float:
        return 8.0 + 3.0 * (4.0 * math.sqrt(2.0 * (self.C3 + math.log(4.0)))) ** 2 / 8.0

    @property
    def smoothed(self) -> bool:
        return self.variant != "gaussian"


def _rows(data) -> np.ndarray:
    arr = getattr(data, "observed", data)
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def sq_dists(X: np.ndarray, points: np.ndarray) -> np.ndarray:
    """``D[r, j] = |X_r - p_j|^2`` computed as an explicit sum of squares."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, float)))
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, float)))
    return point_sq_dists(points, X).T


def majority_vote(X: np.ndarray, nu1, nu2, threshold: float) -> int:
    """1 iff at least ``threshold`` rows satisfy ``|x - nu1| >= |x - nu2|``."""
    D = sq_dists(X, np.stack([np.asarray(nu1, float), np.asarray(nu2, float)]))
    return int(np.count_nonzero(D[:, 0] >= D[:, 1]) >= threshold)


def psi_gaussian(nu1, nu2, data) -> int:
    """1 iff at least half of the observations are weakly closer to ``nu2``."""
    X = _rows(data)
    if X.shape[0] == 0:
        raise ValueError("no observations")
    return majority_vote(X, nu1, nu2, X.shape[0] / 2.0)


def group_means(Y: np.ndarray, k: int) -> tuple[np.ndarray, int]:
    """Means of consecutive groups of ``k`` rows; trailing rows are dropped.

    Returns the means and the number of dropped rows.
    """
    Y = _rows(Y)
    N = Y.shape[0]
    if k < 1 or k > N:
        raise ValueError(f"group size {k} must lie in [1, N = {N}]")
    G = N // k
    means = Y[: G * k].reshape(G, k, Y.shape[1]).mean(axis=1)
    return means, N - G * k


def psi_grouped(nu1, nu2, data, R_draws, k: int) -> int:
    """Majority vote over group means of ``X_i + R_i`` with threshold ``G/2`` for ``G`` groups."""
    Y = _rows(data) + _rows(R_draws)
    means, _ = group_means(Y, k)
    return majority_vote(means, nu1, nu2, means.shape[0] / 2.0)


def v_statistic(nu1, nu2, x) -> np.ndarray | float:
    """``(|x - nu1|^2 - |x - nu2|^2) / |nu1 - nu2|`` for one point or each row of ``x``."""
    nu1 = np.asarray(nu1, float)
    nu2 = np.asarray(nu2, float)
    gap = float(np.sqrt(((nu1 - nu2) ** 2).sum()))
    if gap == 0:
        raise ValueError("nu1 and nu2 must differ")
    x = np.asarray(x, float)
    single = x.ndim == 1 and nu1.ndim == 1 and x.shape == nu1.shape
    X = x[None, :] if single else _rows(x)
    v = (((X - nu1) ** 2).sum(axis=1) - ((X - nu2) ** 2).sum(axis=1)) / gap
    return float(v[0]) if single else v


def clamp(values, a: float, b: float) -> np.ndarray:
    """``phi_{a,b}``: clamp to ``[a, b]``."""
    if a > b:
        raise ValueError("need a <= b")
    return np.clip(np.asarray(values, float), a, b)


def eps_tilde(epsilon: float, delta0: float, N: int) -> float:
    """Trimming level ``8 eps + 12 log(4/delta0) / N`` for half-sample size ``N``."""
    if not 0 < delta0 < 1:
        raise ValueError("delta0 must lie in (0, 1)")
    return 8.0 * epsilon + 12.0 * math.log(4.0 / delta0) / N


def type1_quantiles(tail, level: float) -> tuple[float, float]:
    """Type-1 empirical quantiles at ``level`` and ``1 - level``: sorted entries ``ceil(level N)`` and ``ceil((1 - level) N)``."""
    t = np.sort(np.asarray(tail, float))
    n = t.shape[0]

    def pick(x: float) -> float:
        idx = min(max(int(math.ceil(round(x * n, 9))), 1), n)
        return float(t[idx - 1])

    return pick(level), pick(1.0 - level)


def trimmed_mean_at(values, level: float) -> float:
    """Trimmed mean with an explicit trimming level.

    The first half of ``values`` is clamped to the type-1 ``level`` and
    ``1 - level`` quantiles of the second half and averaged.
    """
    v = np.ascontiguousarray(values, dtype=float)
    if v.ndim != 1 or v.shape[0] < 2 or v.shape[0] % 2:
        raise ValueError("need an even number (at least 2) of values")
    if not 0 < level < 0.5:
        raise InvalidRegimeError(f"trimming level {level:.6g} is outside (0, 1/2)")
    return float(trimmed_mean_kernel(v, float(level)))


def trimmed_mean(values, epsilon: float, delta0: float) -> float:
    """Trimmed mean at level ``8 eps + 12 log(4/delta0)/N`` for ``2N`` values."""
    v = np.asarray(values, float)
    if v.ndim != 1 or v.shape[0] % 2:
        raise ValueError("need an even number of values")
    level = eps_tilde(epsilon, delta0, v.shape[0] // 2)
    if not 0 < level < 0.5:
        raise InvalidRegimeError(
            f"trimming level {level:.6g} is outside (0, 1/2); increase N or decrease epsilon"
        )
    return trimmed_mean_at(v, level)


def tm_deviation_bound(sigma_x: float, level: float, delta0: float, N: int, D2: float = 24.0) -> float:
    """``3 E(4 level, V) + 2 sigma_x sqrt(log(4/delta0) / N)`` with ``3E`` replaced by ``D2 sigma_x level sqrt(log(1/level))``."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return D2 * sigma_x * level * math.sqrt(math.log(1.0 / level)) + 2.0 * sigma_x * math.sqrt(math.log(4.0 / delta0) / N)


def tm_branch(delta: float, noise: NoiseModel) -> bool:
    """True when ``delta^2 / sigma^2 <= 1 / (4 D3)``, i.e. the trimmed-mean branch applies."""
    return delta * delta / (noise.sigma * noise.sigma) <= 1.0 / (4.0 * noise.D3)


def psi_unknown_subgaussian(nu1, nu2, data_2N, R_draws, delta: float, noise: NoiseModel) -> int:
    """Scale-dependent test on ``2N`` smoothed observations.

    Small scales: ``1(TM > 0)`` for the projection statistics ``V`` with
    ``delta0 = exp(-C3 N delta^2 / sigma^2)``. Large scales: at least ``N`` of
    the ``2N`` rows weakly closer to ``nu2``.
    """
    Y = _rows(data_2N) + _rows(R_draws)
    if Y.shape[0] % 2:
        raise ValueError("the trimmed-mean test needs an even number of observations")
    if not delta > 0:
        raise ValueError("delta must be positive")
    N = Y.shape[0] // 2
    if tm_branch(delta, noise):
        delta0 = math.exp(-noise.C3 * N * delta * delta / noise.sigma ** 2)
        tm = trimmed_mean(v_statistic(nu1, nu2, Y), noise.epsilon, delta0)
        return int(tm > 0)
    return majority_vote(Y, nu1, nu2, float(N))


@dataclass
class DominationContext:
    """Everything a pairwise test needs: data, noise model, smoothing draws and scale.

    ``smoothing`` is drawn once per estimation run and reused by every test.
    """

    data: object
    noise: NoiseModel
    smoothing: np.ndarray | None = None
    delta: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = _rows(self.data)
        if self.noise.smoothed:
            if self.smoothing is None:
                raise ValueError(f"{self.noise.variant} tests need smoothing draws")
            if _rows(self.smoothing).shape != X.shape:
                raise ValueError("smoothing draws must match the data shape")

    @property
    def X(self) -> np.ndarray:
        return _rows(self.data)

    def effective_rows(self) -> np.ndarray:
        """The rows the majority vote runs on (raw, group means, or smoothed)."""
        X = self.X
        if self.noise.variant == "gaussian":
            return X
        Y = X + _rows(self.smoothing)
        if self.noise.variant == "known_subgaussian":
            means, dropped = group_means(Y, self.noise.k)
            self.meta["dropped_rows"] = dropped
            return means
        return Y

    def mode(self, delta: float | None = None) -> tuple[int, float]:
        """Kernel mode and trimming level for the test at scale ``delta``."""
        delta = self.delta if delta is None else delta
        if self.noise.variant != "unknown_subgaussian":
            return PSI_MAJORITY, 0.0
        if delta is None:
            raise ValueError("the unknown sub-Gaussian test needs a scale delta")
        if not tm_branch(delta, self.noise):
            return PSI_MAJORITY, 0.0
        N = self.X.shape[0] // 2
        delta0 = math.exp(-self.noise.C3 * N * delta * delta / self.noise.sigma ** 2)
        level = eps_tilde(self.noise.epsilon, delta0, N)
        if not 0 < level < 0.5:
            raise InvalidRegimeError(
                f"trimming level {level:.6g} is outside (0, 1/2) at N = {N}, epsilon = {self.noise.epsilon}"
            )
        return PSI_TRIMMED, level

    def psi(self, nu1, nu2, delta: float | None = None) -> int:
        """Run the variant's test on ``(nu1, nu2)`` (``nu1`` lexicographically first)."""
        v = self.noise.variant
        if v == "gaussian":
            return psi_gaussian(nu1, nu2, self.X)
        if v == "known_subgaussian":
            return psi_grouped(nu1, nu2, self.X, self.smoothing, self.noise.k)
        delta = self.delta if delta is None else delta
        return psi_unknown_subgaussian(nu1, nu2, self.X, self.smoothing, delta, self.noise)


def dominates(a, b, ctx: DominationContext, delta: float | None = None) -> int:
    """1 iff ``a`` dominates ``b``.

    The pair is ordered lexicographically into ``(nu1, nu2)``; ``psi = 0``
    means ``nu1`` dominates and ``psi = 1`` means ``nu2`` does, so exactly one
    of ``dominates(a, b)`` and ``dominates(b, a)`` is 1.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if np.array_equal(a, b):
        raise ValueError("domination is only defined for distinct points")
    a_first = lex_less(a, b)
    nu1, nu2 = (a, b) if a_first else (b, a)
    psi = ctx.psi(nu1, nu2, delta)
    return int(psi == 0) if a_first else int(psi == 1)
