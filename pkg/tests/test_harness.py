import csv
import io
import json
import math

import numpy as np
import pytest
from scipy import stats

from starrobust.bounds import rate_envelope
from starrobust.harness import (
    ConfigError,
    RobustConfig,
    draw_noise,
    run_trials,
    sweep,
    sweep_csv,
    trial_rng,
)

INTERVAL = {"kind": "box", "lower": [0.0], "upper": [1.0]}


def _cfg(**kw):
    base = dict(set=INTERVAL, sigma=0.1, N=40, trials=6, seed=3, depth=4, iterations="full")
    base.update(kw)
    return RobustConfig.from_dict(base)


def test_report_is_byte_identical_across_runs(tmp_path):
    a = _cfg(out_csv=str(tmp_path / "a.csv"), out_json=str(tmp_path / "a.json"))
    b = _cfg(out_csv=str(tmp_path / "b.csv"), out_json=str(tmp_path / "b.json"))
    run_trials(a)
    run_trials(b)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    ja = json.loads((tmp_path / "a.json").read_text())
    jb = json.loads((tmp_path / "b.json").read_text())
    ja["config"].pop("out_csv"), ja["config"].pop("out_json")
    jb["config"].pop("out_csv"), jb["config"].pop("out_json")
    assert ja == jb
    assert "wall_time" not in ja


def test_trials_do_not_depend_on_count():
    short = run_trials(_cfg(trials=3))
    long = run_trials(_cfg(trials=6))
    assert np.array_equal(short.errors, long.errors[:3])
    other = run_trials(_cfg(trials=3, seed=4))
    assert not np.array_equal(short.errors, other.errors)


def test_summary_statistics():
    rep = run_trials(_cfg())
    e = rep.errors
    assert rep.risk == pytest.approx(e.mean())
    assert rep.stderr == pytest.approx(e.std(ddof=1) / math.sqrt(e.shape[0]))
    assert rep.median == pytest.approx(np.median(e))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["trial", "sq_error", "J_star", "n_corrupted"]
    assert [float(r[1]) for r in rows[1:]] == e.tolist()
    env = rate_envelope("gaussian", rep.eta_star, 0.1, 0.0, 1.0)
    assert rep.envelope["rate"] == pytest.approx(env.rate)
    assert set(rep.lower_bounds) == {"fano", "corruption"}


def test_adversary_budget_recorded():
    rep = run_trials(_cfg(epsilon=0.1, adversary={"kind": "oracle_shift", "magnitude_sigma": 100}))
    assert rep.n_corrupted == [4] * 6


def test_sweep_envelope_columns():
    cfg = _cfg(trials=2)
    values = [0.0, 0.1, 0.2]
    reports = sweep(cfg, "epsilon", values)
    rows = list(csv.DictReader(io.StringIO(sweep_csv(values, reports))))
    assert [float(r["value"]) for r in rows] == values
    for r, rep in zip(rows, reports):
        env = rate_envelope("gaussian", float(r["eta_star_sq"]) ** 0.5, 0.1, float(r["value"]), 1.0)
        assert float(r["envelope"]) == pytest.approx(env.rate)
        assert float(r["corruption_term"]) == pytest.approx(0.01 * float(r["value"]) ** 2)
        assert float(r["risk"]) == rep.risk
    with pytest.raises(ConfigError):
        sweep(cfg, "kappa", [0.1])
    with pytest.raises(ConfigError):
        sweep(cfg, "s", [1])


@pytest.mark.parametrize("doc", [
    {"set": INTERVAL, "N": 0},
    {"set": INTERVAL, "sigma": -1.0},
    {"set": INTERVAL, "epsilon": 0.5},
    {"set": INTERVAL, "c": 6.0},
    {"set": INTERVAL, "noise": "cauchy"},
    {"set": INTERVAL, "mu": [2.0]},
    {"set": INTERVAL, "mu": "random"},
    {"set": {"kind": "blob"}},
    {"set": INTERVAL, "colour": "red"},
    {"N": 10},
])
def test_config_validation(doc):
    with pytest.raises(ConfigError):
        RobustConfig.from_dict(doc)


def test_config_json_round_trip():
    cfg = _cfg(mu=[0.25])
    again = RobustConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg


def test_skewed_noise_moments():
    x = draw_noise("skewed", 2.0, (200000, 1), trial_rng(0, 0)).ravel()
    assert abs(x.mean()) < 4 * 2.0 / math.sqrt(x.size)
    assert x.var() == pytest.approx(4.0, rel=0.02)
    # The two-point component makes the law visibly right-skewed.
    assert stats.skew(x) > 0.5
    with pytest.raises(ValueError):
        draw_noise("laplace", 1.0, (2, 1), trial_rng(0, 0))


def test_trial_rng_streams_differ():
    a = trial_rng(7, 0).random(4)
    assert np.array_equal(a, trial_rng(7, 0).random(4))
    assert not np.array_equal(a, trial_rng(7, 1).random(4))
