"""Leave-one-out evaluation harness: metrics, determinism, report artifacts."""
from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from htlab import (
    AdvTrainConfig,
    LoocvOptions,
    Metrics,
    compute_metrics,
    emit_reports,
    run_loocv,
    synth_corpus,
)


# -- metrics ------------------------------------------------------------------


def test_compute_metrics_counts():
    labels = np.array([1, 1, 0, 0, 1, 0])
    probs = np.array([0.9, 0.2, 0.1, 0.7, 0.5, 0.4])
    m = compute_metrics(labels, probs)
    assert (m.tp, m.fn, m.tn, m.fp) == (2, 1, 2, 1)
    assert np.isclose(m.tpr, 2 / 3)
    assert np.isclose(m.tnr, 2 / 3)
    assert m.to_dict()["tp"] == 2


def test_metrics_rates_none_on_empty_class():
    no_pos = compute_metrics(np.zeros(4), np.full(4, 0.1))
    assert no_pos.tpr is None and no_pos.tnr == 1.0
    no_neg = compute_metrics(np.ones(4), np.full(4, 0.9))
    assert no_neg.tnr is None and no_neg.tpr == 1.0


def test_threshold_is_inclusive():
    m = compute_metrics(np.array([1]), np.array([0.5]))
    assert m.tp == 1


# -- harness validation -----------------------------------------------------------


def test_run_loocv_needs_two_circuits():
    corpus = synth_corpus(2, seed=5)
    with pytest.raises(ValueError):
        run_loocv(corpus[:1])


def test_run_loocv_rejects_unknown_model():
    corpus = synth_corpus(2, seed=5)
    with pytest.raises(ValueError):
        run_loocv(corpus, LoocvOptions(models=("bogus",), epochs=1))


def test_run_loocv_rejects_unlabeled_circuit():
    corpus = synth_corpus(2, seed=5)
    from htlab import synth_circuit

    clean = synth_circuit(9, seed=5, with_trojan=False)
    with pytest.raises(ValueError):
        run_loocv([*corpus, clean])


# -- small end-to-end runs ----------------------------------------------------------


QUICK = LoocvOptions(
    models=("normal",),
    alphas=(1.0,),
    k_values=(0, 1),
    epochs=2,
    batch_size=16,
    oversample=True,
    seed=0,
)


@pytest.fixture(scope="module")
def small_corpus():
    return synth_corpus(4, seed=31)


@pytest.fixture(scope="module")
def quick_report(small_corpus):
    return run_loocv(small_corpus, QUICK)


def test_fold_structure(quick_report, small_corpus):
    assert len(quick_report.folds) == len(small_corpus)
    names = [f.benchmark for f in quick_report.folds]
    assert names == [c.name for c in small_corpus]
    for fold in quick_report.folds:
        assert fold.model == "normal"
        assert set(fold.attacked) == {(1.0, 0), (1.0, 1)}
        assert fold.attack_summaries  # one greedy trace per alpha


def test_k_zero_equals_original(quick_report):
    for fold in quick_report.folds:
        at0 = fold.attacked[(1.0, 0)]
        assert at0.tp == fold.original.tp
        assert at0.fn == fold.original.fn
        # normal nets are not re-scored differently at k=0 either
        assert at0.tn == fold.original.tn and at0.fp == fold.original.fp


def test_loocv_is_deterministic(small_corpus, quick_report):
    again = run_loocv(small_corpus, QUICK)
    assert again.to_dict() == quick_report.to_dict()


def test_threads_do_not_change_results(small_corpus, quick_report):
    import dataclasses

    threaded = run_loocv(small_corpus, dataclasses.replace(QUICK, threads=2))
    a, b = threaded.to_dict(), quick_report.to_dict()
    a["options"].pop("threads"), b["options"].pop("threads")
    assert a == b


def test_average_macro_skips_absent(quick_report):
    avg = quick_report.average("normal")
    assert 0.0 <= avg["original_tnr"] <= 1.0
    assert "alpha=1,k=1" in avg["attacked_tpr"]
    dist = quick_report.tpr_distribution("normal", (1.0, 1))
    assert dist is not None and dist["min"] <= dist["median"] <= dist["max"]


def test_both_model_variants_run(small_corpus):
    opts = LoocvOptions(
        models=("normal", "r-htd"),
        alphas=(1.0,),
        k_values=(1,),
        epochs=1,
        adv=AdvTrainConfig(epochs=1, init_epochs=1, attack_budget=1),
        seed=0,
    )
    rep = run_loocv(small_corpus[:2], opts)
    assert {f.model for f in rep.folds} == {"normal", "r-htd"}
    assert len(rep.folds) == 4  # 2 folds x 2 variants
    # the adversarially trained variant is a genuinely different model
    pairs = {(f.benchmark, f.model): f for f in rep.folds}
    for name in (small_corpus[0].name, small_corpus[1].name):
        normal = pairs[(name, "normal")]
        robust = pairs[(name, "r-htd")]
        # the adaptive attacker runs against each variant's own oracle,
        # so the greedy traces cannot coincide between distinct models
        assert normal.attack_summaries != robust.attack_summaries


# -- artifacts -----------------------------------------------------------------------


def test_emit_reports_files(tmp_path, quick_report):
    paths = emit_reports(quick_report, str(tmp_path))
    assert sorted(paths) == ["json", "plot_data", "summary"]

    with open(paths["summary"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {"benchmark", "model"} <= set(rows[0])
    assert any(r["benchmark"] == "average" for r in rows)

    with open(paths["plot_data"], newline="") as fh:
        plot_rows = list(csv.DictReader(fh))
    assert {"model", "alpha", "k", "median", "mean"} <= set(plot_rows[0])

    with open(paths["json"]) as fh:
        blob = json.load(fh)
    assert set(blob) >= {"options", "folds", "averages"}
    assert blob["averages"]["normal"]["original_tpr"] is not None
    echoed = blob["options"]
    assert echoed["alphas"] == [1.0] and echoed["k_values"] == [0, 1]


def test_emit_reports_round_trip_determinism(tmp_path, quick_report):
    a = emit_reports(quick_report, str(tmp_path / "a"))
    b = emit_reports(quick_report, str(tmp_path / "b"))
    for key in a:
        with open(a[key]) as f1, open(b[key]) as f2:
            assert f1.read() == f2.read()


def test_metrics_frozen():
    m = Metrics(1, 2, 3, 4)
    with pytest.raises(Exception):
        m.tp = 9


def test_alpha_inf_grid_key_serializes(small_corpus):
    opts = LoocvOptions(models=("normal",), alphas=(math.inf,), k_values=(1,), epochs=1, seed=1)
    rep = run_loocv(small_corpus[:2], opts)
    blob = rep.to_dict()
    key = next(iter(blob["averages"]["normal"]["attacked_tpr"]))
    assert key == "alpha=inf,k=1"
    json.dumps(blob)  # must be JSON-serializable end to end
