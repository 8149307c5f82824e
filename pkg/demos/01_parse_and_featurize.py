"""Walkthrough: from structural Verilog to a labeled feature matrix.

A gate-level netlist is parsed into an immutable circuit graph, Trojan
labels are attached by instance-name convention, and every net is turned
into the 51-dimensional structural feature vector the detector consumes.

Run with:  python3 demos/01_parse_and_featurize.py
"""
from __future__ import annotations

import numpy as np

from htlab import FEATURE_NAMES, LabelSpec, NormStats, extract_all, parse_verilog

# A toy payload: the three "troj_*" instances gate an XOR onto the output
# path, the classic corrupt-on-trigger shape.  Everything else is benign.
NETLIST = """
module demo_top (a, b, c, y, py);
  input a, b, c;
  output y, py;
  wire n1, n2, t1, t2;

  AND2X1 u1 (n1, a, b);
  NAND2X1 u2 (n2, n1, c);
  INVX1 u3 (y, n2);

  AND2X1 troj_and (t1, a, c);
  INVX1 troj_inv (t2, t1);
  XOR2X1 troj_xor (py, t2, n2);
endmodule
"""


def main() -> None:
    circuit = parse_verilog(NETLIST, LabelSpec.name_regex(r"^troj_"), name="demo_top")

    print(f"parsed {circuit.name!r}: {len(circuit.gates)} gates, "
          f"{len(circuit.nets)} nets, "
          f"{len(circuit.primary_inputs)} inputs, "
          f"{len(circuit.primary_outputs)} outputs")
    print(f"Trojan nets ({len(circuit.trojan_net_ids)}): "
          + ", ".join(sorted(circuit.nets[n].name for n in circuit.trojan_net_ids)))
    print()

    # One row per net, in deterministic net order, plus 0/1 labels.
    fm = extract_all(circuit)
    print(f"feature matrix: {fm.matrix.shape[0]} nets x {fm.matrix.shape[1]} features")
    print()

    # The first 45 features are bounded-depth neighborhood counts; the last
    # six are (sentinel-capped) distances to ports, flip-flops and muxes.
    print("a few features for each net:")
    picks = ["fanin_lvl1", "ff_out_le1", "dist_pi", "dist_po", "dist_ff_out"]
    cols = [FEATURE_NAMES.index(p) for p in picks]
    header = f"{'net':10s} {'label':5s} " + " ".join(f"{p:>11s}" for p in picks)
    print(header)
    for i, name in enumerate(fm.net_names):
        row = " ".join(f"{fm.matrix[i, c]:11.0f}" for c in cols)
        print(f"{name:10s} {int(fm.labels[i]):5d} {row}")
    print()

    # Training normalizes each column to [0, 1] with min/max statistics;
    # degenerate (constant) columns map to zero.
    norm = NormStats.fit(fm.matrix)
    x01 = norm.apply(fm.matrix)
    print(f"normalized range: [{x01.min():.3f}, {x01.max():.3f}]  "
          f"({int(np.sum(norm.degenerate))} degenerate columns pinned to 0)")


if __name__ == "__main__":
    main()
