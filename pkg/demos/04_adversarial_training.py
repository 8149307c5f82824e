"""Walkthrough: adversarial training that survives the concealment attack.

Trains two detectors on the same corpus: a plain one, and a robust one
whose training loop attacks its own Trojan samples mid-epoch and mixes the
concealed feature rows back into each batch (still labeled Trojan).  Both
are then attacked adaptively -- each attacker gets its victim's own oracle.

Run with:  python3 demos/04_adversarial_training.py   (takes ~a minute)
"""
from __future__ import annotations

import numpy as np

from htlab import (
    AdvTrainConfig,
    AttackConfig,
    MLPConfig,
    MLPDetector,
    extract_all,
    run_attack,
    samples_from_circuits,
    synth_corpus,
    train_robust,
)


def rates(model: MLPDetector, circuit) -> tuple[float, float]:
    fm = extract_all(circuit)
    probs = model.predict_proba(fm.matrix)
    troj = fm.labels.astype(bool)
    return float((probs[troj] >= 0.5).mean()), float((probs[~troj] < 0.5).mean())


def attacked_tpr(model: MLPDetector, circuit) -> float:
    res = run_attack(circuit, model.as_oracle(), AttackConfig(alpha=1.0, k_max=5))
    return rates(model, res.circuits[-1])[0]


def main() -> None:
    corpus = synth_corpus(12, seed=2024)
    victim, training = corpus[0], corpus[1:]

    mats = [extract_all(c) for c in training]
    x = np.vstack([fm.matrix for fm in mats])
    y = np.concatenate([fm.labels for fm in mats]).astype(np.float64)

    print("training the plain detector ...")
    plain = MLPDetector(MLPConfig(init_seed=0))
    plain.fit(x, y, epochs=10, batch_size=16, oversample=True, shuffle_seed=0)

    print("training the robust detector (attacks itself while learning) ...")
    samples = samples_from_circuits(training)
    config = AdvTrainConfig(epochs=10, oversample=False, class_weight=24.0, seed=0)
    robust, report = train_robust(samples, config)
    print(f"  {report.adversarial_generated} adversarial feature rows folded in "
          f"across {report.triggered_batches} triggered batches")
    print()

    for name, model in (("plain", plain), ("robust", robust)):
        tpr, tnr = rates(model, victim)
        post = attacked_tpr(model, victim)
        print(f"{name:>6s} detector on {victim.name!r}: "
              f"TPR {tpr:.2f} / TNR {tnr:.2f} before the attack, "
              f"TPR {post:.2f} after (alpha=1, budget 5)")


if __name__ == "__main__":
    main()
