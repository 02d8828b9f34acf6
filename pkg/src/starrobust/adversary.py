"""Corruption schemes applied to clean samples, with hard budget enforcement.

Every scheme corrupts at most ``floor(epsilon * N)`` rows and leaves the
remaining rows bit-identical to the clean sample. Randomized schemes draw
from ``numpy.random.default_rng(seed)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .geometry import StarSet, as_point


class SeparationError(ValueError):
    """The two hypotheses of a lower-bound construction are not at the required distance."""


@dataclass
class Dataset:
    """Clean sample, observed sample and the mask of corrupted rows."""

    clean: np.ndarray
    observed: np.ndarray
    corrupted_mask: np.ndarray
    mu_true: np.ndarray
    epsilon_budget: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.clean.shape != self.observed.shape:
            raise ValueError("clean and observed samples differ in shape")
        if self.corrupted_mask.shape != (self.clean.shape[0],):
            raise ValueError("mask length must equal the number of rows")

    @property
    def N(self) -> int:
        return int(self.clean.shape[0])

    @property
    def budget(self) -> int:
        return budget(self.epsilon_budget, self.N)

    @property
    def n_corrupted(self) -> int:
        return int(np.count_nonzero(self.corrupted_mask))


def budget(epsilon: float, N: int) -> int:
    """``floor(epsilon * N)``, guarded against round-off just below an integer."""
    return int(math.floor(epsilon * N + 1e-9))


def _check_epsilon(epsilon: float) -> None:
    if not 0 <= epsilon < 0.5:
        raise ValueError("need epsilon in [0, 1/2)")


def _rows(clean) -> np.ndarray:
    X = np.asarray(clean, float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def clean_dataset(clean, mu, epsilon: float = 0.0) -> Dataset:
    """Wrap a clean sample without corruption."""
    X = _rows(clean)
    return Dataset(X.copy(), X.copy(), np.zeros(X.shape[0], bool), as_point(mu, X.shape[1]), float(epsilon))


def far_direction(K: StarSet, mu) -> np.ndarray:
    """Unit vector from ``mu`` toward the farthest coarse lattice member of ``K``.

    For unbounded sets the first coordinate axis is used (it lies in every
    catalog cone).
    """
    mu = as_point(mu, K.dimension)
    if K.bounded and K.diameter > 0:
        pts = K.candidates(K.center, K.diameter, K.diameter / 16.0)
        d2 = ((pts - mu) ** 2).sum(axis=1)
        j = int(np.argmax(d2))
        if d2[j] > 0:
            return (pts[j] - mu) / math.sqrt(d2[j])
    u = np.zeros(K.dimension)
    u[0] = 1.0
    return u


def corrupt_oracle_shift(
    clean,
    mu,
    K: StarSet,
    epsilon: float,
    magnitude: float,
    seed=None,
    direction=None,
) -> Dataset:
    """Move the ``floor(epsilon N)`` rows closest to ``mu`` to ``mu + magnitude * u``.

    ``u`` is ``direction`` (normalized) or :func:`far_direction`. Ties in
    distance are broken by row index. The scheme is deterministic; ``seed``
    is accepted for interface uniformity.
    """
    _check_epsilon(epsilon)
    X = _rows(clean)
    mu = as_point(mu, X.shape[1])
    N = X.shape[0]
    k = budget(epsilon, N)
    u = far_direction(K, mu) if direction is None else np.asarray(direction, float)
    norm = float(np.sqrt((u ** 2).sum()))
    if norm == 0:
        raise ValueError("direction must be nonzero")
    u = u / norm
    mask = np.zeros(N, bool)
    obs = X.copy()
    if k:
        d2 = ((X - mu) ** 2).sum(axis=1)
        rows = np.argsort(d2, kind="stable")[:k]
        mask[rows] = True
        obs[rows] = mu + magnitude * u
    return Dataset(X.copy(), obs, mask, mu, float(epsilon),
                   {"kind": "oracle_shift", "magnitude": float(magnitude), "direction": u.tolist()})


def gaussian_tv(theta1, theta2, sigma: float) -> float:
    """Total variation between ``N(theta1, sigma^2 I)`` and ``N(theta2, sigma^2 I)``: ``2 Phi(D/(2 sigma)) - 1``."""
    gap = float(np.sqrt(((np.asarray(theta1, float) - np.asarray(theta2, float)) ** 2).sum()))
    return float(2.0 * ndtr(gap / (2.0 * sigma)) - 1.0)


def q_axis_density(z, a: float) -> np.ndarray:
    """Density of the axis coordinate under ``Q``: ``(phi(z - a) - phi(z))^+ / TV`` in units of sigma."""
    z = np.asarray(z, float)
    tv = 2.0 * ndtr(a / 2.0) - 1.0
    phi = lambda t: np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)  # noqa: E731
    return np.where(z >= a / 2.0, phi(z - a) - phi(z), 0.0) / tv


def sample_q(theta_from, theta_to, sigma: float, size: int, rng: np.random.Generator, max_rounds: int = 10_000) -> np.ndarray:
    """Draws from the density ``(p_to - p_from)^+ / TV``.

    The density depends on ``x`` only through the coordinate along
    ``theta_to - theta_from``, so the axis coordinate is drawn by rejection
    from ``N(a, 1)`` (accepting with probability ``1 - phi(z)/phi(z - a)`` on
    ``z >= a/2``) and the orthogonal part is an independent Gaussian around
    ``theta_from``.
    """
    t1 = np.asarray(theta_from, float)
    t2 = np.asarray(theta_to, float)
    gap = float(np.sqrt(((t2 - t1) ** 2).sum()))
    if gap == 0:
        raise ValueError("Q is undefined for identical hypotheses")
    a = gap / sigma
    u = (t2 - t1) / gap
    z = np.empty(0)
    for _ in range(max_rounds):
        if z.shape[0] >= size:
            break
        prop = rng.normal(a, 1.0, size=max(64, 2 * (size - z.shape[0])))
        accept_p = np.where(prop >= a / 2.0, -np.expm1(-a * prop + 0.5 * a * a), 0.0)
        z = np.concatenate([z, prop[rng.random(prop.shape[0]) < accept_p]])
    else:
        raise RuntimeError("rejection sampler did not finish")
    z = z[:size]
    orth = rng.normal(0.0, 1.0, size=(size, t1.shape[0]))
    orth -= np.outer(orth @ u, u)
    return t1 + sigma * (z[:, None] * u[None, :] + orth)


def max_tv_separation(epsilon: float, N: int, sigma: float) -> tuple[float, float]:
    """``(eps', 2 sigma eps' / (1 - eps'))`` with ``eps' = epsilon - 1/sqrt(2N)`` (clipped at 0)."""
    eps_p = max(epsilon - 1.0 / math.sqrt(2.0 * N), 0.0)
    return eps_p, 2.0 * sigma * eps_p / (1.0 - eps_p)


def corrupt_tv_mixture(clean, theta1, theta2, epsilon: float, sigma: float, seed=None) -> Dataset:
    """Two-point total-variation adversary: replace a Binomial number of rows by draws from ``Q_1``.

    ``clean`` is a sample from ``N(theta1, sigma^2 I)``. With
    ``eps''`` solving ``TV = eps''/(1 - eps'')``, a count
    ``W ~ Binomial(N, eps'')`` is drawn; if ``W <= floor(epsilon N)`` that many
    randomly chosen rows are replaced by ``Q_1`` draws, otherwise the data
    stay clean. The hypotheses must satisfy
    ``|theta1 - theta2| <= 2 sigma eps' / (1 - eps')`` with
    ``eps' = epsilon - 1/sqrt(2N)``.
    """
    _check_epsilon(epsilon)
    X = _rows(clean)
    N, n = X.shape
    t1, t2 = as_point(theta1, n), as_point(theta2, n)
    gap = float(np.sqrt(((t1 - t2) ** 2).sum()))
    eps_p, limit = max_tv_separation(epsilon, N, sigma)
    if gap > limit * (1.0 + 1e-12):
        raise SeparationError(f"|theta1 - theta2| = {gap:.6g} exceeds the allowed {limit:.6g}")
    rng = np.random.default_rng(seed)
    mask = np.zeros(N, bool)
    obs = X.copy()
    meta = {"kind": "tv_mixture", "theta1": t1.tolist(), "theta2": t2.tolist(), "eps_prime": eps_p}
    if gap == 0:
        meta.update({"tv": 0.0, "eps_double_prime": 0.0, "W": 0, "applied": False})
        return Dataset(X.copy(), obs, mask, t1, float(epsilon), meta)
    tv = gaussian_tv(t1, t2, sigma)
    eps_pp = tv / (1.0 + tv)
    W = int(rng.binomial(N, eps_pp))
    applied = W <= budget(epsilon, N)
    if applied and W:
        rows = np.sort(rng.choice(N, size=W, replace=False))
        obs[rows] = sample_q(t1, t2, sigma, W, rng)
        mask[rows] = True
    meta.update({"tv": tv, "eps_double_prime": eps_pp, "W": W, "applied": bool(applied)})
    return Dataset(X.copy(), obs, mask, t1, float(epsilon), meta)


def pointmass_distance(sigma: float, epsilon: float, d: float | None = None) -> float:
    """Target ``|mu - nu| = sigma sqrt(log(1/epsilon))``, capped at ``d / epsilon`` when ``d`` is given."""
    if not 0 < epsilon < 0.5:
        raise ValueError("need epsilon in (0, 1/2)")
    val = sigma * math.sqrt(math.log(1.0 / epsilon))
    return val if d is None else min(val, d / epsilon)


def corrupt_pointmass_mixture(
    mu,
    nu,
    epsilon: float,
    sigma: float,
    N: int,
    seed=None,
    d: float | None = None,
    check: bool = True,
) -> Dataset:
    """Point-mass mixture adversary.

    Draws ``N`` rows from ``(1 - epsilon/2) N(mu, sigma^2 I) + (epsilon/2) delta_nu``.
    With ``W`` the number of point-mass rows, the adversary replaces those
    rows by fresh Gaussian draws when ``W <= floor(epsilon N)`` and does
    nothing otherwise. ``clean`` holds the mixture draws and ``mu_true`` the
    mixture mean. With ``check`` the separation ``|mu - nu|`` must be within a
    factor 2 of :func:`pointmass_distance`.
    """
    _check_epsilon(epsilon)
    mu = np.atleast_1d(np.asarray(mu, float))
    nu = as_point(nu, mu.shape[0])
    if check and epsilon > 0:
        target = pointmass_distance(sigma, epsilon, d)
        gap = float(np.sqrt(((mu - nu) ** 2).sum()))
        if not target / 2.0 <= gap <= 2.0 * target:
            raise SeparationError(f"|mu - nu| = {gap:.6g} is not within a factor 2 of {target:.6g}")
    rng = np.random.default_rng(seed)
    W_i = rng.random(N) < epsilon / 2.0
    X = mu + sigma * rng.normal(size=(N, mu.shape[0]))
    X[W_i] = nu
    W = int(np.count_nonzero(W_i))
    obs = X.copy()
    mask = np.zeros(N, bool)
    restored = W <= budget(epsilon, N)
    if restored and W:
        obs[W_i] = mu + sigma * rng.normal(size=(W, mu.shape[0]))
        mask = W_i.copy()
    mixture_mean = (1.0 - epsilon / 2.0) * mu + (epsilon / 2.0) * nu
    meta = {"kind": "pointmass_mixture", "W": W, "scenario": "gaussian_restored" if restored else "mixture_retained",
            "nu": nu.tolist(), "gaussian_mean": mu.tolist()}
    return Dataset(X, obs, mask, mixture_mean, float(epsilon), meta)


ADVERSARIES = ("none", "oracle_shift", "tv_mixture", "pointmass_mixture")


def apply_adversary(spec: dict | None, clean, mu, K: StarSet, epsilon: float, sigma: float, seed=None) -> Dataset:
    """Apply the adversary named by ``spec["kind"]`` to a clean sample.

    ``oracle_shift`` takes ``magnitude`` in units of ``sigma`` (``magnitude_sigma``)
    or absolute (``magnitude``) and an optional ``direction``. ``tv_mixture``
    takes ``theta2``; the clean sample must come from ``mu``.
    """
    kind = (spec or {}).get("kind", "none")
    if kind == "none" or epsilon == 0:
        return clean_dataset(clean, mu, epsilon)
    if kind == "oracle_shift":
        if "magnitude" in spec:
            mag = float(spec["magnitude"])
        else:
            mag = float(spec.get("magnitude_sigma", 100.0)) * sigma
        return corrupt_oracle_shift(clean, mu, K, epsilon, mag, seed, spec.get("direction"))
    if kind == "tv_mixture":
        return corrupt_tv_mixture(clean, mu, spec["theta2"], epsilon, sigma, seed)
    raise ValueError(f"unknown adversary kind {kind!r}; expected one of {ADVERSARIES[:3]}")
