"""End-to-end CLI tests, run in-process through dispatch()."""
from __future__ import annotations

import csv
import json
import sys

import pytest

import htlab
from conftest import FIXTURE_DIR
from htlab.cli import dispatch

TROJ = str(FIXTURE_DIR / "troj_mini.v")
COMB = str(FIXTURE_DIR / "comb_tree.v")


def read_manifest(out_dir) -> dict:
    with open(out_dir / "run_manifest.json") as fh:
        return json.load(fh)


# -- parse ----------------------------------------------------------------------


def test_parse_prints_stats(tmp_path, capsys):
    assert dispatch(["parse", TROJ, "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "troj_mini" in out and "gates=5" in out and "trojan_nets=3" in out
    manifest = read_manifest(tmp_path)
    assert manifest["command"] == "parse"
    assert manifest["package_version"] == htlab.__version__
    assert manifest["inputs"] == [TROJ]


def test_parse_emit_and_graph(tmp_path):
    emit = tmp_path / "round.v"
    graph = tmp_path / "graph.json"
    rc = dispatch([
        "parse", TROJ, "--emit", str(emit), "--dump-graph", str(graph),
        "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    reparsed = htlab.parse_verilog(emit.read_text(), name="troj_mini")
    assert reparsed.stats()["gates"] == 5
    blob = json.loads(graph.read_text())
    assert sum(n["trojan"] for n in blob["nets"]) == 3  # sidecar autodiscovered
    assert sorted(read_manifest(tmp_path)["outputs"]) == sorted([str(emit), str(graph)])


def test_parse_label_regex_overrides_sidecar(tmp_path):
    graph = tmp_path / "g.json"
    rc = dispatch([
        "parse", TROJ, "--dump-graph", str(graph), "--label-regex", "^u2$",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    blob = json.loads(graph.read_text())
    assert sum(g["trojan"] for g in blob["gates"]) == 1


def test_parse_error_is_diagnosed(tmp_path, capsys):
    bad = tmp_path / "bad.v"
    bad.write_text("module m (a, y);\n  input a;\n  output y;\n  FROB u (y, a);\nendmodule\n")
    rc = dispatch(["parse", str(bad), "--out-dir", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and "line 4" in err


def test_missing_file_is_error(tmp_path, capsys):
    rc = dispatch(["parse", str(tmp_path / "nope.v"), "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        dispatch(["rewrite", TROJ])  # missing required --pattern/--instance
    assert exc.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        dispatch(["--version"])
    assert exc.value.code == 0
    assert htlab.__version__ in capsys.readouterr().out


def test_bench_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HTLAB_BENCH_DIR", str(FIXTURE_DIR))
    assert dispatch(["parse", "troj_mini.v", "--out-dir", str(tmp_path)]) == 0
    assert read_manifest(tmp_path)["global"]["bench_dir"] == str(FIXTURE_DIR)


# -- featurize --------------------------------------------------------------------


def test_featurize_writes_csv(tmp_path):
    out = tmp_path / "f.csv"
    rc = dispatch(["featurize", TROJ, "--out", str(out), "--out-dir", str(tmp_path)])
    assert rc == 0
    fm = htlab.read_feature_csv(str(out), circuit_name="troj_mini")
    assert fm.matrix.shape == (9, 51)
    assert int(fm.labels.sum()) == 3


# -- train / attack / rewrite / advtrain --------------------------------------------


@pytest.fixture(scope="module")
def trained_model(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("model")
    model = out_dir / "model.json"
    rc = dispatch([
        "train", TROJ, "--epochs", "30", "--batch-size", "4",
        "--out", str(model), "--out-dir", str(out_dir), "--seed", "0",
    ])
    assert rc == 0
    return model


def test_train_manifest_settings(tmp_path, capsys):
    model = tmp_path / "m.json"
    rc = dispatch([
        "train", TROJ, "--epochs", "2", "--batch-size", "4",
        "--out", str(model), "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    assert "trained on 9 nets (3 Trojan)" in capsys.readouterr().out
    m = read_manifest(tmp_path)
    assert m["settings"]["epochs"] == 2
    assert m["settings"]["class_weight"] == 1.0
    loaded = htlab.load_model(str(model))
    assert loaded.config.layer_sizes == (51, 200, 100, 50, 1)


def test_config_file_and_profile_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 3}))
    # profile alone: trit-tc presets epochs=15 and the ratio class weight
    dispatch(["train", TROJ, "--profile", "trit-tc", "--batch-size", "4",
              "--out", str(tmp_path / "a.json"), "--out-dir", str(tmp_path)])
    m = read_manifest(tmp_path)
    assert m["settings"]["epochs"] == 15
    assert m["settings"]["class_weight"] == pytest.approx(2.0)
    # config file beats profile
    dispatch(["train", TROJ, "--profile", "trit-tc", "--config", str(cfg),
              "--batch-size", "4", "--out", str(tmp_path / "b.json"),
              "--out-dir", str(tmp_path)])
    assert read_manifest(tmp_path)["settings"]["epochs"] == 3
    # flag beats both
    dispatch(["train", TROJ, "--profile", "trit-tc", "--config", str(cfg),
              "--epochs", "2", "--batch-size", "4",
              "--out", str(tmp_path / "c.json"), "--out-dir", str(tmp_path)])
    assert read_manifest(tmp_path)["settings"]["epochs"] == 2


@pytest.mark.skipif(sys.version_info >= (3, 11), reason="TOML loads natively on 3.11+")
def test_toml_config_rejected_before_311(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("epochs = 3\n")
    rc = dispatch(["parse", TROJ, "--config", str(cfg), "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "TOML config files need Python 3.11+" in capsys.readouterr().err


def test_attack_flow(tmp_path, trained_model, capsys):
    trace = tmp_path / "trace.json"
    sweep = tmp_path / "sweep.csv"
    emit = tmp_path / "attacked.v"
    rc = dispatch([
        "attack", TROJ, "--model", str(trained_model), "--alpha", "1",
        "--budget", "3", "--trace", str(trace), "--sweep-csv", str(sweep),
        "--emit", str(emit), "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    assert "accepted steps" in capsys.readouterr().out
    blob = json.loads(trace.read_text())
    assert blob["alpha"] == 1 and blob["k_max"] == 3
    assert blob["final_metric"] <= blob["initial_metric"]
    assert len(blob["metrics"]) == len(blob["accepted_steps"]) + 1
    with open(sweep, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["k"] for r in rows] == ["0", "1", "2", "3"]
    metrics = [float(r["metric"]) for r in rows]
    assert metrics == sorted(metrics, reverse=True)  # non-increasing over budget
    attacked = htlab.parse_verilog(emit.read_text(), name="attacked")
    assert attacked.stats()["gates"] >= 5


def test_attack_sweep_alphas(tmp_path, trained_model):
    sweep = tmp_path / "sweep.csv"
    rc = dispatch([
        "attack", TROJ, "--model", str(trained_model), "--alpha", "1",
        "--sweep-alphas", "2", "inf", "--budget", "2",
        "--sweep-csv", str(sweep), "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    with open(sweep, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["alpha"] for r in rows} == {"1", "2", "inf"}
    assert len(rows) == 3 * 3  # three alphas x budgets 0..2


def test_attack_ttcd_mode(tmp_path, trained_model):
    trace = tmp_path / "trace.json"
    rc = dispatch([
        "attack", TROJ, "--model", str(trained_model), "--ttcd", "py",
        "--budget", "2", "--trace", str(trace), "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    blob = json.loads(trace.read_text())
    assert blob["target_net_id"] is not None


def test_attack_unknown_ttcd_net(tmp_path, trained_model, capsys):
    rc = dispatch([
        "attack", TROJ, "--model", str(trained_model), "--ttcd", "ghost",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 1
    assert "unknown net name 'ghost'" in capsys.readouterr().err


def test_rewrite_with_check(tmp_path, capsys):
    emit = tmp_path / "rew.v"
    diff = tmp_path / "diff.json"
    rc = dispatch([
        "rewrite", TROJ, "--pattern", "m1", "--instance", "troj_and",
        "--check", "--emit", str(emit), "--diff", str(diff),
        "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    assert "equivalent=True" in capsys.readouterr().out
    blob = json.loads(diff.read_text())
    assert blob["equivalent"] is True and blob["check_mode"] == "exhaustive"
    assert blob["new_gates"]
    htlab.parse_verilog(emit.read_text())


def test_rewrite_unknown_instance(tmp_path, capsys):
    rc = dispatch([
        "rewrite", TROJ, "--pattern", "m1", "--instance", "ghost",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 1
    assert "unknown instance 'ghost'" in capsys.readouterr().err


def test_rewrite_inapplicable_pattern(tmp_path, capsys):
    rc = dispatch([
        "rewrite", TROJ, "--pattern", "m3", "--instance", "troj_and",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 1
    assert "does not apply" in capsys.readouterr().err


def test_advtrain_flow(tmp_path, capsys):
    model = tmp_path / "robust.json"
    rc = dispatch([
        "advtrain", TROJ, "--epochs", "1", "--init-epochs", "1",
        "--batch-size", "4", "--attack-budget", "1", "--out", str(model),
        "--out-dir", str(tmp_path), "--seed", "1",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "adversarial examples" in out
    assert model.exists()
    m = read_manifest(tmp_path)
    assert m["settings"]["attack_budget"] == 1
    assert m["settings"]["batch_size"] == 4


# -- evaluate ------------------------------------------------------------------------


def test_evaluate_synthetic_plan(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({
        "corpus": {"synthetic": {"count": 3, "seed": 7}},
        "models": ["normal"],
        "alphas": [1],
        "k_values": [1],
        "epochs": 2,
        "seed": 0,
    }))
    out_dir = tmp_path / "rep"
    rc = dispatch(["evaluate", "--plan", str(plan), "--out", str(out_dir)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "normal: TPR" in out and "attacked[alpha=1,k=1]" in out
    for name in ("summary.csv", "plot_data.csv", "report.json", "run_manifest.json"):
        assert (out_dir / name).exists()
    blob = json.loads((out_dir / "report.json").read_text())
    assert len(blob["folds"]) == 3


def test_evaluate_benchmark_plan(tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({
        "corpus": {"benchmarks": [
            {"path": TROJ},
            {"path": TROJ, "label_regex": "^troj_", "name": "troj_again"},
        ]},
        "models": ["normal"],
        "alphas": [1],
        "k_values": [1],
        "epochs": 2,
        "batch_size": 4,
    }))
    out_dir = tmp_path / "rep"
    rc = dispatch(["evaluate", "--plan", str(plan), "--out", str(out_dir)])
    assert rc == 0
    blob = json.loads((out_dir / "report.json").read_text())
    assert [f["benchmark"] for f in blob["folds"]] == ["troj_mini", "troj_again"]


def test_evaluate_bad_plan(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"corpus": {}}))
    rc = dispatch(["evaluate", "--plan", str(plan), "--out", str(tmp_path)])
    assert rc == 1
    assert "corpus" in capsys.readouterr().err
