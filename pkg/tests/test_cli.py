import csv
import io
import json

import numpy as np
import pytest

from starrobust.cli import main, read_data_csv

INTERVAL = {"kind": "box", "lower": [0.0], "upper": [1.0]}
CONFIG = {"set": INTERVAL, "sigma": 0.1, "N": 30, "trials": 3, "seed": 1, "depth": 4, "iterations": "full"}


def _write_data(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(len(rows[0]))])
        w.writerows(rows)


def test_estimate(tmp_path, capsys):
    data = tmp_path / "data.csv"
    x = 0.3 + 0.05 * np.random.default_rng(0).normal(size=(50, 1))
    _write_data(data, x.tolist())
    assert main(["estimate", "--config", json.dumps(CONFIG), "--data", str(data)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["estimate"][0] - 0.3) < 0.1
    assert doc["trace"]["steps"] == 3


@pytest.mark.filterwarnings("ignore::starrobust.constants.GammaBoundWarning")
def test_estimate_unbounded(tmp_path, capsys):
    data = tmp_path / "data.csv"
    x = np.array([[0.0, 2.0]]) + 0.2 * np.random.default_rng(1).normal(size=(40, 2))
    _write_data(data, x.tolist())
    cfg = dict(CONFIG, set={"kind": "sparse", "n": 2, "s": 1}, sigma=0.2)
    out = tmp_path / "out.json"
    assert main(["estimate", "--config", json.dumps(cfg), "--data", str(data), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["localization"]["S_nonempty"]


def test_read_data_csv_header_check(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_data_csv(str(bad))


def test_simulate_writes_files(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(CONFIG))
    assert main(["simulate", "--config", str(cfg_path), "--csv", str(tmp_path / "t.csv"),
                 "--json", str(tmp_path / "t.json")]) == 0
    summary = json.loads(capsys.readouterr().out)
    meta = json.loads((tmp_path / "t.json").read_text())
    assert summary["risk"] == meta["risk"]
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 4


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", json.dumps(CONFIG), "--axis", "N", "--values", "20,40",
                 "--csv", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["value"] for r in rows] == ["20", "40"]


def test_entropy(capsys):
    assert main(["entropy", "--set", json.dumps(INTERVAL), "--etas", "0.5,0.25", "--N", "10"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "eta,log_Mloc,rate_lhs"
    assert len(lines) == 3
    assert float(lines[1].split(",")[2]) == pytest.approx(2.5)


def test_entropy_unbounded_needs_region():
    with pytest.raises(SystemExit):
        main(["entropy", "--set", json.dumps({"kind": "sparse", "n": 2, "s": 1}), "--etas", "0.5"])


def test_tree_verify(tmp_path, capsys):
    dump = tmp_path / "tree.json"
    assert main(["tree-verify", "--set", json.dumps(INTERVAL), "--depth", "3", "--dump", str(dump)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"]
    assert json.loads(dump.read_text())["level_sizes"] == doc["level_sizes"]


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_bounds(fmt, capsys):
    assert main(["bounds", "--config", json.dumps(CONFIG), "--format", fmt, "--constants"]) == 0
    out = capsys.readouterr().out
    if fmt == "json":
        doc = json.loads(out)
        assert doc["lower_bounds"]["corruption"] == 0.0
        assert "gaussian" in doc["constants"]
    else:
        header, row = out.strip().splitlines()
        assert header.split(",")[2] == "envelope"
        assert len(row.split(",")) == 5


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
