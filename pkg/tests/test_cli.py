import csv
import json

import jsonschema
import numpy as np
import pytest

from cfaudit.cli import REPORT_SCHEMA_PATH, main
from cfaudit.dataset import write_external, write_internal
from cfaudit.simlab import (ScenarioConfig, generate_population, sim_schema,
                            to_audit_dataset, to_external_dataset,
                            train_risk_model)


def make_audit_files(tmp_path, n_internal=150, n_external=400, seed=5):
    cfg = ScenarioConfig(n_internal=n_internal, n_external=n_external,
                         n_train=400, n_validation=1000, replications=1, seed=seed)
    ch = np.random.SeedSequence(seed).spawn(4)
    train = generate_population(cfg, "train", ch[0])
    model = train_risk_model(train.x, train.y, n_trees=20, seed=ch[1])
    schema = sim_schema(cfg)
    internal = to_audit_dataset(
        generate_population(cfg, "internal", ch[2], risk_model=model), schema)
    external = to_external_dataset(generate_population(cfg, "external", ch[3]), schema)

    write_internal(internal, tmp_path / "internal.csv")
    write_external(external, tmp_path / "external.csv")
    with open(tmp_path / "schema.json", "w") as f:
        json.dump(schema.to_dict(), f)
    return schema


def audit_config(tmp_path, with_external=True, bootstrap_b=0, **extra):
    cfg = {
        "mode": "audit",
        "seed": 11,
        "out": "out",
        "internal": "internal.csv",
        "schema": "schema.json",
        "reference_group": ["0", "0"],
        "models": {
            "pi": {"kind": "logistic-IRLS", "l2": 0.05},
            "mu": {"kind": "logistic-IRLS", "l2": 0.05},
            "h_internal": {"kind": "softmax-linear", "epochs": 40, "lr": 0.5},
            "h_external": {"kind": "softmax-linear", "epochs": 40, "lr": 0.5},
            "crossfit_k": 1,
        },
        "borrowing": {"enabled": True, "metric": "brier", "grid_step": 0.05},
        "bootstrap": {"B": bootstrap_b, "level": 0.95},
    }
    if with_external:
        cfg["external"] = "external.csv"
    cfg.update(extra)
    path = tmp_path / "run.json"
    with open(path, "w") as f:
        json.dump(cfg, f)
    return path


def read_report(tmp_path):
    with open(tmp_path / "out" / "report.json") as f:
        return json.load(f)


def test_audit_internal_only_skips_borrowing(tmp_path):
    make_audit_files(tmp_path)
    code = main(["--config", str(audit_config(tmp_path, with_external=False))])
    assert code == 0
    report = read_report(tmp_path)
    assert report["alpha"] is None
    assert all(e["method"] != "proposed-borrowing" for e in report["estimates"])
    assert (tmp_path / "out" / "report.csv").exists()
    assert (tmp_path / "out" / "manifest.json").exists()


def test_audit_full_run_reports_alpha_and_deltas(tmp_path):
    make_audit_files(tmp_path)
    code = main(["--config", str(audit_config(tmp_path))])
    assert code == 0
    report = read_report(tmp_path)
    assert report["alpha"] is not None
    assert 0.0 <= report["alpha"] <= 1.0
    methods = {e["method"] for e in report["estimates"]}
    assert "proposed-borrowing" in methods
    # deltas against the majority reference for every other defined group
    assert report["reference_group"] == "0|0"
    assert all(d["reference"] == "0|0" for d in report["deltas"])
    proposed_deltas = [d for d in report["deltas"]
                       if d["method"] == "proposed-internal"]
    assert len(proposed_deltas) == 6  # 3 non-reference groups x 2 metrics
    # subgroup counts included and consistent
    total = sum(sum(cells.values()) for cells in report["subgroup_counts"].values())
    assert total == report["n_internal"]


def test_report_json_validates_against_shipped_schema(tmp_path):
    make_audit_files(tmp_path)
    assert main(["--config", str(audit_config(tmp_path, bootstrap_b=6))]) == 0
    with open(REPORT_SCHEMA_PATH) as f:
        schema = json.load(f)
    jsonschema.validate(read_report(tmp_path), schema)


def test_audit_bootstrap_fields_present(tmp_path):
    make_audit_files(tmp_path)
    assert main(["--config", str(audit_config(tmp_path, bootstrap_b=6))]) == 0
    report = read_report(tmp_path)
    with_se = [e for e in report["estimates"] if e.get("se") is not None]
    assert with_se
    for e in with_se:
        assert 0.0 <= e["lower"] <= e["upper"] <= 1.0


def test_exit_code_config_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    with open(path, "w") as f:
        json.dump({"mode": "audit", "internal": "x.csv", "schema": "s.json",
                   "out": "out"}, f)  # no seed
    assert main(["--config", str(path)]) == 2


def test_exit_code_data_error(tmp_path):
    make_audit_files(tmp_path)
    # corrupt the internal file: drop the prediction column
    rows = list(csv.reader(open(tmp_path / "internal.csv")))
    rows[0] = [c if c != "s" else "zz" for c in rows[0]]
    with open(tmp_path / "internal.csv", "w", newline="") as f:
        csv.writer(f).writerows(rows)
    assert main(["--config", str(audit_config(tmp_path))]) == 1


def test_exit_code_missing_config():
    assert main(["--config", "/nonexistent/run.json"]) == 2


def scenario_dict(**kw):
    base = {
        "n_internal": 60, "n_external": 150, "n_train": 300,
        "n_validation": 1000, "replications": 2, "seed": 3,
        "pipeline": {
            "pi": {"l2": 0.1}, "mu": {"l2": 0.1},
            "h_internal": {"kind": "softmax-linear", "epochs": 25},
            "h_external": {"kind": "softmax-linear", "epochs": 25},
            "crossfit_k": 1, "alpha_grid_step": 0.05,
        },
    }
    base.update(kw)
    return base


def simulate_config(tmp_path, scenario, seed=9):
    path = tmp_path / "sim.json"
    with open(path, "w") as f:
        json.dump({"mode": "simulate", "seed": seed, "out": "simout",
                   "scenario": scenario}, f)
    return path


def test_simulate_smoke_outputs_wellformed(tmp_path):
    code = main(["--config", str(simulate_config(tmp_path, scenario_dict()))])
    assert code == 0
    out = tmp_path / "simout"
    reps = list(csv.reader(open(out / "replications.csv")))
    assert reps[0] == ["replication", "group", "metric", "method", "value",
                       "defined", "alpha"]
    # 2 replications x 5 group rows x 2 metrics x 3 methods
    assert len(reps) == 1 + 2 * 5 * 2 * 3
    agg = list(csv.reader(open(out / "aggregate.csv")))
    assert len(agg) == 1 + 5 * 2 * 3
    manifest = json.load(open(out / "manifest.json"))
    assert manifest["mode"] == "simulate"
    assert "config_sha256" in manifest


def test_simulate_sweep_aggregate_cardinality(tmp_path):
    scenario = scenario_dict()
    scenario["sweep"] = {"n_internal": [50, 80]}
    code = main(["--config", str(simulate_config(tmp_path, scenario))])
    assert code == 0
    agg = list(csv.reader(open(tmp_path / "simout" / "aggregate.csv")))
    assert agg[0][0] == "n_internal"
    assert len(agg) == 1 + 2 * 5 * 2 * 3  # one row per (N_int, group, metric, method)


def test_simulate_rerun_from_manifest_byte_identical(tmp_path):
    cfgpath = simulate_config(tmp_path, scenario_dict())
    assert main(["--config", str(cfgpath)]) == 0
    out = tmp_path / "simout"
    first = {name: (out / name).read_bytes()
             for name in ("replications.csv", "aggregate.csv")}
    # re-run pointing at the manifest, into a fresh directory
    assert main(["--config", str(out / "manifest.json"),
                 "--out", str(tmp_path / "again")]) == 0
    for name, blob in first.items():
        assert (tmp_path / "again" / name).read_bytes() == blob


def test_simulate_threads_do_not_change_bytes(tmp_path):
    cfgpath = simulate_config(tmp_path, scenario_dict())
    assert main(["--config", str(cfgpath), "--out", str(tmp_path / "t1"),
                 "--threads", "1"]) == 0
    assert main(["--config", str(cfgpath), "--out", str(tmp_path / "t2"),
                 "--threads", "2"]) == 0
    for name in ("replications.csv", "aggregate.csv"):
        assert (tmp_path / "t1" / name).read_bytes() == \
            (tmp_path / "t2" / name).read_bytes()
