import json
import math

import numpy as np
import pytest

import pgdro


def test_synthetic_sizes():
    d = pgdro.generate_synthetic(n=4000, p=0.95, seed=1)
    assert d["x"].shape == (4000, 2)
    groups = [2 * y + e for y, e in zip(d["y"], d["env"])]
    assert [groups.count(g) for g in range(4)] == [1900, 100, 100, 1900]


def test_group_probs_and_risks():
    q = pgdro.env_to_group_probs(np.array([[0.3, 0.7]]), [1], num_classes=2)
    assert q.tolist() == [[0.0, 0.0, 0.3, 0.7]]

    groups = [0, 1, 1, 3]
    one_hot = np.eye(4)[groups]
    losses = [0.5, 1.0, 2.0, 0.25]
    soft = pgdro.pg_dro_risk(losses, one_hot, c=1.0)
    hard = pgdro.gdro_risk(losses, groups, num_groups=4, c=1.0)
    assert soft == hard
    assert pgdro.effective_group_sizes(one_hot) == [1.0, 2.0, 0.0, 1.0]


def test_zero_shot_closed_form():
    p = pgdro.zero_shot_env_probs(np.array([[3.0, 0.0]]), np.eye(2), temperature=1.0)
    assert p[0, 0] == pytest.approx(1.0 / (1.0 + math.exp(-1.0)), abs=1e-12)


def test_errors_surface_as_exceptions():
    with pytest.raises(pgdro.Error):
        pgdro.env_to_group_probs(np.array([[0.5, 0.6]]), [0], num_classes=2)
    with pytest.raises(pgdro.Error):
        pgdro.run_command("train", {"train": {"objective": "NOPE"}})


def test_run_command_chain(tmp_path):
    cfg = pgdro.default_config()
    cfg["out_dir"] = str(tmp_path)
    cfg["data"]["n"] = 400
    cfg["labeling"]["env_classifier"]["epochs"] = 20
    cfg["train"]["epochs"] = 3
    for name in ["gen-data", "pseudo-label", "train", "eval"]:
        result = pgdro.run_command(name, cfg)
        assert result["written"]
    report = json.loads((tmp_path / "eval_report.json").read_text())
    assert 0.0 <= report["metrics"]["worst_group_acc"] <= report["metrics"]["avg_acc"] <= 1.0


def test_pipeline_report_shape():
    report = pgdro.run_pipeline(seed=2, epochs=2, n=400)
    assert [r["objective"] for r in report["runs"]] == ["ERM", "GDRO", "PGDRO"]
    assert len(report["labeler"]["groups"]) == 4
