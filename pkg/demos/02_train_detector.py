"""Walkthrough: training the MLP detector on a synthetic corpus.

Builds a dozen synthetic Trojan-infected netlists, holds one out, trains
the 51-200-100-50-1 sigmoid network on the rest (with minority-class
oversampling) and scores the held-out circuit net by net.

Run with:  python3 demos/02_train_detector.py
"""
from __future__ import annotations

import numpy as np

from htlab import MLPConfig, MLPDetector, extract_all, synth_corpus


def main() -> None:
    corpus = synth_corpus(12, seed=2024)
    held_out, training = corpus[0], corpus[1:]
    print(f"corpus: {len(corpus)} synthetic circuits; holding out {held_out.name!r}")

    mats = [extract_all(c) for c in training]
    x = np.vstack([fm.matrix for fm in mats])
    y = np.concatenate([fm.labels for fm in mats]).astype(np.float64)
    print(f"training set: {x.shape[0]} nets, {int(y.sum())} Trojan "
          f"({100 * y.mean():.1f}% positive before oversampling)")

    model = MLPDetector(MLPConfig(init_seed=0))
    report = model.fit(x, y, epochs=10, batch_size=16, oversample=True, shuffle_seed=0)
    print(f"trained {report.epochs} epochs: "
          f"loss {report.epoch_losses[0]:.4f} -> {report.epoch_losses[-1]:.4f} "
          f"(minority class oversampled: {report.oversampled})")
    print()

    fm = extract_all(held_out)
    probs = model.predict_proba(fm.matrix)
    flagged = probs >= 0.5
    is_troj = fm.labels.astype(bool)
    tpr = flagged[is_troj].mean()
    tnr = (~flagged[~is_troj]).mean()
    print(f"held-out {held_out.name!r}: {is_troj.sum()} Trojan / "
          f"{(~is_troj).sum()} normal nets")
    print(f"  TPR {tpr:.3f}   TNR {tnr:.3f}")
    print()

    print("most suspicious nets:")
    order = np.argsort(-probs)
    for i in order[:6]:
        mark = "TROJAN" if is_troj[i] else "normal"
        print(f"  {fm.net_names[i]:>14s}  p={probs[i]:.3f}  ({mark})")


if __name__ == "__main__":
    main()
