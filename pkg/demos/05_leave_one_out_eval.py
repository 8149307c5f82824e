"""Walkthrough: the leave-one-out evaluation harness.

Every circuit takes a turn as the held-out benchmark while the detector is
trained on the rest; each fold's model is then attacked adaptively at the
requested (alpha, budget) grid points.  Artifacts land in
``demo_eval_out/`` as CSV + JSON.

A fast four-circuit run for demonstration; scale ``count``, ``epochs`` and
the grid up for real experiments.

Run with:  python3 demos/05_leave_one_out_eval.py
"""
from __future__ import annotations

import math

from htlab import LoocvOptions, emit_reports, run_loocv, synth_corpus


def main() -> None:
    corpus = synth_corpus(4, seed=31)
    options = LoocvOptions(
        models=("normal",),
        alphas=(1.0, math.inf),
        k_values=(0, 5),
        epochs=4,
        batch_size=16,
        oversample=True,
        seed=0,
    )
    report = run_loocv(corpus, options)

    print(f"{'benchmark':>10s} {'TPR':>6s} {'TNR':>6s} "
          f"{'TPR@a=1,k=5':>12s} {'TPR@a=inf,k=5':>14s}")
    for fold in report.folds:
        print(f"{fold.benchmark:>10s} "
              f"{fold.original.tpr:6.2f} {fold.original.tnr:6.2f} "
              f"{fold.attacked[(1.0, 5)].tpr:12.2f} "
              f"{fold.attacked[(math.inf, 5)].tpr:14.2f}")

    avg = report.average("normal")
    print(f"{'average':>10s} {avg['original_tpr']:6.2f} {avg['original_tnr']:6.2f} "
          f"{avg['attacked_tpr']['alpha=1,k=5']:12.2f} "
          f"{avg['attacked_tpr']['alpha=inf,k=5']:14.2f}")

    paths = emit_reports(report, "demo_eval_out")
    print()
    print("artifacts:")
    for kind, path in paths.items():
        print(f"  {kind:>9s}: {path}")


if __name__ == "__main__":
    main()
