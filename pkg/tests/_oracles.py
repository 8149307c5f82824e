"""Brute-force reference feature extractor, independent of htlab.features.

Everything here is recomputed from the raw gate/net tables with naive
breadth-first and depth-first walks: no DistanceIndex, no neighborhood views,
no shared adjacency caches.  Slow and simple on purpose -- these values are
the ground truth the fast extractor is checked against.

Conventions restated from the feature definitions:

* Levels are minimal gate crossings; the gate adjacent to the start net is
  level 1.  Flip-flops are crossed through the D pin only; the MUX2 select
  pin is an ordinary data input.
* Features 1-5: total data-input pins of combinational gates at exact
  input-side level n (flip-flops and constants excluded).
* Features 6-45: distinct DFF / MUX2 / loop / constant counts within n
  levels per side (cumulative).  Loops are simple directed cycles through
  the net, deduplicated on their net-id set, counted by minimal crossing
  length; the input-side and output-side walks must find the same cycles.
* Features 46-51: minimal crossings to a primary input / primary output /
  DFF / MUX2 per side, saturated at the sentinel (100).
"""

from __future__ import annotations

import numpy as np

COMBINATIONAL = ("AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUF", "MUX2")


def _data_inputs(gate) -> list[int]:
    if gate.kind.family == "DFF":
        return [gate.inputs[0]]
    return list(gate.inputs)


def _driver_map(circuit) -> dict[int, object]:
    out = {}
    for g in circuit.gates.values():
        out[g.outputs[0]] = g
    return out


def _reader_map(circuit) -> dict[int, list[object]]:
    out: dict[int, list[object]] = {}
    for g in circuit.gates.values():
        for nid in _data_inputs(g):
            out.setdefault(nid, []).append(g)
    return out


def _gate_levels(circuit, net_id: int, direction: str, max_level: int) -> dict[int, int]:
    """Minimal level of every gate reachable within ``max_level`` crossings."""
    drivers = _driver_map(circuit)
    readers = _reader_map(circuit)
    levels: dict[int, int] = {}
    seen_nets = {net_id}
    frontier = [net_id]
    for level in range(1, max_level + 1):
        nxt = []
        for nid in frontier:
            if direction == "input":
                gates = [drivers[nid]] if nid in drivers else []
            else:
                gates = readers.get(nid, [])
            for g in gates:
                if g.id in levels:
                    continue
                levels[g.id] = level
                nets = _data_inputs(g) if direction == "input" else list(g.outputs)
                for v in nets:
                    if v not in seen_nets:
                        seen_nets.add(v)
                        nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return levels


def _net_levels(circuit, net_id: int, direction: str, max_level: int) -> dict[int, int]:
    """Minimal level of every net reachable within ``max_level`` crossings."""
    drivers = _driver_map(circuit)
    readers = _reader_map(circuit)
    levels = {net_id: 0}
    frontier = [net_id]
    level = 0
    while frontier and level < max_level:
        level += 1
        nxt = []
        for nid in frontier:
            if direction == "input":
                gates = [drivers[nid]] if nid in drivers else []
            else:
                gates = readers.get(nid, [])
            for g in gates:
                nets = _data_inputs(g) if direction == "input" else list(g.outputs)
                for v in nets:
                    if v not in levels:
                        levels[v] = level
                        nxt.append(v)
        frontier = nxt
    return levels


def _cycles(circuit, net_id: int, direction: str, max_gates: int) -> list[int]:
    """Minimal lengths of distinct simple cycles through ``net_id``."""
    drivers = _driver_map(circuit)
    readers = _reader_map(circuit)
    found: dict[frozenset[int], int] = {}

    def neighbors(nid: int) -> list[int]:
        if direction == "input":
            g = drivers.get(nid)
            return _data_inputs(g) if g is not None else []
        out = []
        for g in readers.get(nid, []):
            out.extend(g.outputs)
        return out

    def walk(nid: int, crossed: int, path: frozenset[int]) -> None:
        if crossed == max_gates:
            return
        for nxt in neighbors(nid):
            if nxt == net_id:
                key = path
                if key not in found or crossed + 1 < found[key]:
                    found[key] = crossed + 1
            elif nxt not in path:
                walk(nxt, crossed + 1, path | {nxt})

    walk(net_id, 0, frozenset({net_id}))
    return sorted(found.values())


def oracle_features(circuit, net_id: int, depth: int = 5, sentinel: int = 100) -> np.ndarray:
    """All 51 features of one net, recomputed the slow way."""
    gates = circuit.gates
    in_levels = _gate_levels(circuit, net_id, "input", depth)
    out_levels = _gate_levels(circuit, net_id, "output", depth)

    vec = np.zeros(51, dtype=np.float64)
    for gid, level in in_levels.items():
        kind = gates[gid].kind
        if kind.family in COMBINATIONAL:
            vec[level - 1] += len(_data_inputs(gates[gid]))

    def fill_counts(base: int, levels: dict[int, int], families: tuple[str, ...]) -> None:
        for n in range(1, depth + 1):
            vec[base + n - 1] = sum(
                1 for gid, lv in levels.items()
                if lv <= n and gates[gid].kind.family in families
            )

    fill_counts(5, in_levels, ("DFF",))
    fill_counts(10, out_levels, ("DFF",))
    fill_counts(15, in_levels, ("MUX2",))
    fill_counts(20, out_levels, ("MUX2",))

    loops_in = _cycles(circuit, net_id, "input", depth)
    loops_out = _cycles(circuit, net_id, "output", depth)
    for n in range(1, depth + 1):
        vec[25 + n - 1] = sum(1 for c in loops_in if c <= n)
        vec[30 + n - 1] = sum(1 for c in loops_out if c <= n)

    fill_counts(35, in_levels, ("CONST0", "CONST1"))
    fill_counts(40, out_levels, ("CONST0", "CONST1"))

    in_gates_far = _gate_levels(circuit, net_id, "input", sentinel)
    out_gates_far = _gate_levels(circuit, net_id, "output", sentinel)
    in_nets_far = _net_levels(circuit, net_id, "input", sentinel)
    out_nets_far = _net_levels(circuit, net_id, "output", sentinel)

    def gate_dist(levels: dict[int, int], family: str) -> int:
        best = [lv for gid, lv in levels.items() if gates[gid].kind.family == family]
        return min(min(best), sentinel) if best else sentinel

    def net_dist(levels: dict[int, int], targets: set[int]) -> int:
        best = [lv for nid, lv in levels.items() if nid in targets]
        return min(min(best), sentinel) if best else sentinel

    vec[45] = net_dist(in_nets_far, set(circuit.primary_inputs))
    vec[46] = net_dist(out_nets_far, set(circuit.primary_outputs))
    vec[47] = gate_dist(in_gates_far, "DFF")
    vec[48] = gate_dist(out_gates_far, "DFF")
    vec[49] = gate_dist(in_gates_far, "MUX2")
    vec[50] = gate_dist(out_gates_far, "MUX2")
    return vec


# ---------------------------------------------------------------------------
# Gray-box oracle doubles for attack purity tests
# ---------------------------------------------------------------------------


class RecordingOracle:
    """Wraps a probability oracle and memorizes every row it ever answered.

    Rows are evaluated one at a time on fixed-shape contiguous copies so that
    identical row bytes always map to bit-identical probabilities (batched
    BLAS calls can differ in the last ulp depending on the batch layout),
    making the table a pure function of the row.
    """

    def __init__(self, fn):
        self.fn = fn
        self.table: dict[bytes, float] = {}
        self.calls = 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.calls += 1
        x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.empty(x2.shape[0], dtype=np.float64)
        for i, row in enumerate(x2):
            key = row.tobytes()
            if key not in self.table:
                single = np.ascontiguousarray(row, dtype=np.float64)[None, :]
                self.table[key] = float(np.asarray(self.fn(single)).ravel()[0])
            out[i] = self.table[key]
        return out


class LookupOracle:
    """Answers only from a recorded table; any novel query is an error."""

    def __init__(self, table: dict[bytes, float]):
        self.table = table
        self.calls = 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.calls += 1
        x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.array([self.table[row.tobytes()] for row in x2])
