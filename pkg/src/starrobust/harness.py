"""Monte Carlo experiment engine: configuration, seeded trials, reports and sweeps.

Trial ``i`` of an experiment with master seed ``s`` draws everything from
``numpy.random.default_rng(SeedSequence([s, i]))``, so reports do not depend
on the order in which trials run.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import numpy as np

from . import __version__
from .adversary import apply_adversary, budget
from .bounds import corruption_lower, fano_lower, parametric_ratio, rate_envelope, subgaussian_lower
from .constants import (
    GroupedConstants,
    derived_C,
    solve_gaussian_constants,
    solve_unknown_subgaussian_constants,
    subgaussian_feasibility,
)
from .entropy import eta_star
from .geometry import StarSet, make_set
from .hypotests import NoiseModel
from .tournament import EstimatorConfig, run_estimator
from .unbounded import UNBOUNDED_DEFAULT_GAMMA, run_unbounded_estimator

NOISE_KINDS = ("gaussian", "skewed")
SWEEP_AXES = ("epsilon", "N", "sigma", "s")
# Two-point component of the skewed noise: P(B = 1) = SKEW_P.
SKEW_P = 0.1
SKEW_WEIGHTS = (0.6, 0.8)


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


@dataclass
class RobustConfig:
    """One Monte Carlo experiment.

    ``set`` is a set specification accepted by :func:`make_set`; ``mu`` is a
    fixed mean (default: the set's center) or ``"uniform"`` to draw it per
    trial from a coarse lattice of the set. ``adversary`` is a spec such as
    ``{"kind": "oracle_shift", "magnitude_sigma": 100}``.
    """

    set: dict
    variant: str = "gaussian"
    sigma: float = 1.0
    epsilon: float = 0.0
    N: int = 100
    trials: int = 100
    seed: int = 0
    adversary: dict | None = None
    noise: str = "gaussian"
    mu: Any = None
    c: float = 8.0
    kappa: float = 0.25
    depth: int = 5
    pitch: float | None = None
    iterations: Any = "jstar"
    fine_entropy: bool = False
    smoothing_reps: int = 1
    k: int = 4
    group_gamma: float = 0.1
    C3: float = 0.1
    D2: float = 24.0
    gamma: float = UNBOUNDED_DEFAULT_GAMMA
    method: str = "fast"
    out_csv: str | None = None
    out_json: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RobustConfig":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
        if "set" not in doc:
            raise ConfigError("configuration needs a 'set' entry")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RobustConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)

    def make_set(self) -> StarSet:
        return make_set(self.set)

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.variant, self.sigma, k=self.k, gamma=self.group_gamma, epsilon=self.epsilon,
                          C3=self.C3, D2=self.D2)

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(noise=self.noise_model(), c=self.c, kappa=self.kappa, depth=self.depth,
                               pitch=self.pitch, iterations=self.iterations, fine_entropy=self.fine_entropy,
                               n_smoothing_reps=self.smoothing_reps, method=self.method)

    def validate(self) -> None:
        """Check every module-level precondition that can be checked before running."""
        if self.N < 1 or self.trials < 1:
            raise ConfigError("N and trials must be positive")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not 0 <= self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in [0, 1/2)")
        if not self.c > 6:
            raise ConfigError("c must exceed 6")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}")
        try:
            K = self.make_set()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self.noise_model()
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if isinstance(self.mu, str) and self.mu != "uniform":
            raise ConfigError("mu must be a point, null or 'uniform'")
        if self.mu is not None and not isinstance(self.mu, str):
            mu = np.asarray(self.mu, float)
            if mu.shape != (K.dimension,) or not K.contains(mu):
                raise ConfigError("mu must be a member of the set")


@dataclass
class RiskReport:
    """Per-trial squared errors with their summary, the rate envelope and lower bounds."""

    errors: np.ndarray
    risk: float
    stderr: float
    median: float
    envelope: dict
    lower_bounds: dict
    J_star: list[int]
    n_corrupted: list[int]
    config: dict
    constants: dict
    eta_star: float
    version: str = __version__
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def metadata(self, include_timing: bool = False) -> dict:
        out = {
            "risk": self.risk, "stderr": self.stderr, "median": self.median, "trials": int(self.errors.shape[0]),
            "eta_star": self.eta_star, "envelope": self.envelope, "lower_bounds": self.lower_bounds,
            "lower_bounds_note": "up to absolute constants", "constants": self.constants,
            "config": self.config, "version": self.version, "meta": self.meta,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.metadata(include_timing), indent=2, sort_keys=True, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "sq_error", "J_star", "n_corrupted"])
        for i, (e, j, k) in enumerate(zip(self.errors, self.J_star, self.n_corrupted)):
            w.writerow([i, repr(float(e)), j, k])
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for trial ``index`` derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def draw_noise(kind: str, sigma: float, size: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Noise with per-coordinate variance ``sigma^2``.

    ``"skewed"`` mixes a standardized centered two-point variable (mass
    ``SKEW_P`` at the far atom) with a Gaussian, giving a bounded-plus-Gaussian
    and hence sub-Gaussian but asymmetric law.
    """
    if kind == "gaussian":
        return sigma * rng.normal(size=size)
    if kind == "skewed":
        p = SKEW_P
        two_point = ((rng.random(size) < p).astype(float) - p) / math.sqrt(p * (1.0 - p))
        a, b = SKEW_WEIGHTS
        return sigma * (a * rng.normal(size=size) + b * two_point)
    raise ValueError(f"unknown noise kind {kind!r}")


def resolved_constants(config: RobustConfig) -> dict:
    """Every constant the estimator uses for this configuration."""
    C = derived_C(config.c)
    out: dict[str, Any] = {"c": config.c, "C": C}
    if config.variant == "gaussian":
        out["gaussian"] = solve_gaussian_constants(C, config.kappa).as_dict()
    elif config.variant == "known_subgaussian":
        out["grouped"] = GroupedConstants(config.k, config.group_gamma).as_dict()
    else:
        out["unknown_subgaussian"] = solve_unknown_subgaussian_constants(config.C3, config.D2).as_dict()
        out["theory_violations"] = subgaussian_feasibility(C, config.C3, config.D2)
    return out


def _region(K: StarSet, mu: np.ndarray, config: RobustConfig) -> tuple | None:
    if K.bounded:
        return None
    from .unbounded import unbounded_params

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = unbounded_params(K, config.estimator_config(), config.gamma)
    return (mu, params.d_m)


def _mu_candidates(K: StarSet) -> np.ndarray:
    if not K.bounded:
        raise ConfigError("mu = 'uniform' needs a bounded set")
    if K.diameter == 0:
        return K.center[None, :]
    return K.candidates(K.center, K.diameter, K.diameter / 16.0)


def envelope_and_lower(config: RobustConfig, K: StarSet, mu: np.ndarray) -> tuple[float, dict, dict]:
    """``eta*``, the rate envelope and the lower bounds for one configuration."""
    region = _region(K, mu, config)
    es = eta_star(K, config.N, config.sigma, config.c, region=region)
    d = K.diameter if K.bounded else None
    env = rate_envelope(config.variant, es, config.sigma, config.epsilon, d).as_dict()
    lower = {"fano": fano_lower(K, config.N, config.sigma, config.c, region=region),
             "corruption": corruption_lower(config.sigma, config.epsilon, d)}
    if config.variant == "unknown_subgaussian":
        lower["subgaussian"] = subgaussian_lower(config.sigma, config.epsilon, d)
    return es, env, lower


def run_trial(config: RobustConfig, K: StarSet, index: int, mu_grid: np.ndarray | None = None) -> tuple[float, int, int]:
    """One trial: returns ``(squared error, J*, corrupted rows)``."""
    rng = trial_rng(config.seed, index)
    if mu_grid is not None:
        mu = mu_grid[int(rng.integers(mu_grid.shape[0]))]
    elif config.mu is not None:
        mu = np.asarray(config.mu, float)
    else:
        mu = K.center
    clean = mu + draw_noise(config.noise, config.sigma, (config.N, K.dimension), rng)
    adv_seed = int(rng.integers(2 ** 63 - 1))
    ds = apply_adversary(config.adversary, clean, mu, K, config.epsilon, config.sigma, adv_seed)
    if ds.n_corrupted > budget(config.epsilon, config.N):
        raise RuntimeError("adversary exceeded its budget")
    est_cfg = config.estimator_config()
    if K.bounded:
        out, state = run_estimator(ds.observed, K, est_cfg, rng=rng)
    else:
        out, state, _ = run_unbounded_estimator(ds.observed, K, est_cfg, rng=rng, gamma=config.gamma)
    err = float(((out - mu) ** 2).sum())
    return err, int(state.J_star), ds.n_corrupted


def run_trials(config: RobustConfig, write: bool = True) -> RiskReport:
    """Run every trial of ``config`` and summarize.

    Writes ``out_csv`` (one row per trial) and ``out_json`` (metadata) when
    they are set and ``write`` is true. Any module error aborts the run with
    the failing trial index attached.
    """
    config.validate()
    K = config.make_set()
    mu_grid = _mu_candidates(K) if config.mu == "uniform" else None
    mu0 = K.center if config.mu is None or mu_grid is not None else np.asarray(config.mu, float)
    start = time.perf_counter()
    errs, js, nc = [], [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(config.trials):
            try:
                e, j, k = run_trial(config, K, i, mu_grid)
            except Exception as exc:
                raise RuntimeError(f"trial {i} failed: {exc}") from exc
            errs.append(e)
            js.append(j)
            nc.append(k)
        es, env, lower = envelope_and_lower(config, K, mu0)
    errors = np.asarray(errs)
    T = errors.shape[0]
    # Summation in trial order keeps the aggregate deterministic.
    risk = float(math.fsum(errors) / T)
    stderr = float(errors.std(ddof=1) / math.sqrt(T)) if T > 1 else 0.0
    d = K.diameter if K.bounded else None
    meta = {} if d == 0 else {"parametric_ratio": parametric_ratio(es, config.sigma, config.N, d)}
    report = RiskReport(errors, risk, stderr, float(np.median(errors)), env, lower, js, nc, config.to_dict(),
                        resolved_constants(config), es, wall_time=time.perf_counter() - start, meta=meta)
    if write:
        if config.out_csv:
            with open(config.out_csv, "w", newline="") as fh:
                fh.write(report.to_csv())
        if config.out_json:
            with open(config.out_json, "w") as fh:
                fh.write(report.to_json())
    return report


def _with_axis(config: RobustConfig, axis: str, value) -> RobustConfig:
    if axis == "s":
        spec = dict(config.set)
        if spec.get("kind") != "sparse":
            raise ConfigError("the s axis needs a sparse set")
        spec["s"] = int(value)
        return replace(config, set=spec, out_csv=None, out_json=None)
    if axis == "N":
        value = int(value)
    return replace(config, **{axis: value, "out_csv": None, "out_json": None})


SWEEP_COLUMNS = ("value", "risk", "stderr", "median", "eta_star_sq", "corruption_term", "envelope",
                 "fano_lower", "corruption_lower", "J_star_median")


def sweep(config: RobustConfig, axis: str, values, out_csv: str | None = None) -> list[RiskReport]:
    """One report per value of ``axis``; optionally writes a combined CSV with envelope columns."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}")
    reports = [run_trials(_with_axis(config, axis, v), write=False) for v in values]
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            fh.write(sweep_csv(values, reports))
    return reports


def sweep_csv(values, reports: list[RiskReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for v, r in zip(values, reports):
        w.writerow([v, repr(r.risk), repr(r.stderr), repr(r.median), repr(r.envelope["eta_star_sq"]),
                    repr(r.envelope["corruption_term"]), repr(r.envelope["rate"]), repr(r.lower_bounds["fano"]),
                    repr(r.lower_bounds["corruption"]), int(np.median(r.J_star))])
    return buf.getvalue()
