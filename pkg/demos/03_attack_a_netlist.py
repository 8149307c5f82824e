"""Walkthrough: hiding a Trojan from a trained detector.

The attacker never sees the model's weights -- only a gray-box oracle
mapping feature rows to probabilities.  Each step greedily rewrites one
original Trojan gate with a logic-equivalent pattern (inverter chains,
De Morgan forms, mux unfoldings, ...) so the function never changes while
the structural features drift away from what the detector learned.

Run with:  python3 demos/03_attack_a_netlist.py
"""
from __future__ import annotations

import numpy as np

from htlab import (
    AttackConfig,
    MLPConfig,
    MLPDetector,
    check_equivalence,
    extract_all,
    run_attack,
    synth_circuit,
    synth_corpus,
)


def tpr_of(model: MLPDetector, circuit) -> float:
    fm = extract_all(circuit)
    probs = model.predict_proba(fm.matrix)
    troj = fm.labels.astype(bool)
    return float((probs[troj] >= 0.5).mean())


def main() -> None:
    victim = synth_circuit(0, seed=2024)
    training = synth_corpus(12, seed=2024)[1:]

    mats = [extract_all(c) for c in training]
    x = np.vstack([fm.matrix for fm in mats])
    y = np.concatenate([fm.labels for fm in mats]).astype(np.float64)
    model = MLPDetector(MLPConfig(init_seed=0))
    model.fit(x, y, epochs=10, batch_size=16, oversample=True, shuffle_seed=0)

    print(f"victim {victim.name!r}: detector flags "
          f"{100 * tpr_of(model, victim):.0f}% of its Trojan nets")
    print()

    config = AttackConfig(alpha=2.0, k_max=5)
    result = run_attack(victim, model.as_oracle(), config)

    print(f"greedy attack, alpha={config.alpha}, budget {config.k_max}:")
    print(f"  initial alpha-TCD {result.metrics[0]:+.4f}")
    for step in result.steps:
        print(f"  step {step.index}: rewrote {step.gate_name!r} with "
              f"{step.pattern_id:>3s}  metric -> {step.metric:+.4f}  "
              f"({step.candidates_evaluated} candidates scored)")
    if result.terminated_early:
        print("  stopped early: no candidate strictly improved the metric")
    print()

    attacked = result.circuits[-1]
    print(f"after the attack the detector flags "
          f"{100 * tpr_of(model, attacked):.0f}% of the Trojan nets")

    # The rewrites are logic-preserving by construction; verify anyway.
    report = check_equivalence(victim, attacked, seed=0)
    print(f"functional equivalence ({report.mode}, {report.vectors} vectors): "
          f"{'OK' if report.equivalent else 'BROKEN'}")
    print(f"oracle interactions: {result.oracle_calls} batched queries")


if __name__ == "__main__":
    main()
