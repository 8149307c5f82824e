"""Structural 51-dimensional feature vectors for netlist Trojan detection.

Feature layout (1-indexed to match the usual table; array index = feature - 1):

* 1-5    ``fanin_lvl{n}``   total data-input pins of *combinational* gates
                            whose minimal input-side level is exactly ``n``
                            (DFF and constant cells are excluded; a MUX2
                            contributes 3 pins including its select).
* 6-10   ``ff_in_le{n}``    distinct flip-flops within ``n`` levels, input side.
* 11-15  ``ff_out_le{n}``   same, output side.
* 16-20  ``mux_in_le{n}``   distinct MUX2 cells, input side.
* 21-25  ``mux_out_le{n}``  same, output side.
* 26-30  ``loop_in_le{n}``  directed cycles through the net with at most ``n``
                            gate crossings, discovered walking the input side;
                            cycles are deduplicated on their net-id set.
* 31-35  ``loop_out_le{n}`` same, walking the output side.  A directed cycle
                            through a net is reachable from both directions, so
                            these always equal 26-30; both are kept to preserve
                            the 51-column layout.
* 36-40  ``const_in_le{n}`` distinct constant cells within ``n`` levels, input
                            side.
* 41-45  ``const_out_le{n}`` constant cells on the output side.  Constants
                            have no input pins, so a strictly directional
                            forward walk can never reach one: these columns are
                            structurally zero and are retained for layout
                            compatibility.
* 46     ``dist_pi``        minimal gate crossings to any primary input.
* 47     ``dist_po``        minimal gate crossings to any primary output.
* 48     ``dist_ff_in``     minimal level of a flip-flop on the input side.
* 49     ``dist_ff_out``    minimal level of a flip-flop on the output side.
* 50     ``dist_mux_in``    minimal level of a MUX2 on the input side.
* 51     ``dist_mux_out``   minimal level of a MUX2 on the output side.

Distances use gate-crossing counts (the gate adjacent to the net is level 1; a
net that *is* a primary input has ``dist_pi`` 0) and saturate at the
unreachable sentinel (default 100).  Flip-flops are traversed through their D
pin only; clock/reset pins are never walked.  MUX2 select pins are ordinary
data inputs.

Normalization is per-column min/max learned on a training matrix.  Applied
values are clipped into [0, 1], so unseen larger values (including the
unreachable sentinel when absent from the fit data) map to 1.0; degenerate
columns (min == max) map to 0.0.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .netlist import CircuitGraph

__all__ = [
    "NUM_FEATURES",
    "FEATURE_NAMES",
    "FeatureConfig",
    "FeatureMatrix",
    "NormStats",
    "extract_features",
    "extract_all",
    "extract_for_nets",
    "write_feature_csv",
    "read_feature_csv",
    "DistanceIndex",
]

NUM_FEATURES = 51
_LEVELS = (1, 2, 3, 4, 5)


def _build_names() -> tuple[str, ...]:
    names = [f"fanin_lvl{n}" for n in _LEVELS]
    for stem in ("ff_in", "ff_out", "mux_in", "mux_out", "loop_in", "loop_out",
                 "const_in", "const_out"):
        names += [f"{stem}_le{n}" for n in _LEVELS]
    names += ["dist_pi", "dist_po", "dist_ff_in", "dist_ff_out",
              "dist_mux_in", "dist_mux_out"]
    return tuple(names)


FEATURE_NAMES: tuple[str, ...] = _build_names()
assert len(FEATURE_NAMES) == NUM_FEATURES


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction parameters: neighborhood depth and unreachable sentinel."""

    depth: int = 5
    distance_sentinel: int = 100

    def __post_init__(self) -> None:
        if self.depth != 5:
            raise ValueError("the 51-feature layout is defined for depth 5")
        if self.distance_sentinel <= self.depth:
            raise ValueError("sentinel must exceed the neighborhood depth")


DEFAULT_CONFIG = FeatureConfig()


# ---------------------------------------------------------------------------
# Global distance index (exact, shared across nets of one circuit)
# ---------------------------------------------------------------------------


def _bfs(seeds: Iterable[int], adj: Mapping[int, tuple[int, ...]]) -> dict[int, int]:
    """Unit-cost BFS over the net graph; returns minimal distance per net."""
    dist: dict[int, int] = {}
    queue: deque[int] = deque()
    for s in seeds:
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass(frozen=True)
class DistanceIndex:
    """Exact minimal gate-crossing distances for every net of one circuit.

    Built in O(V + E) with six multi-source BFS passes over the net graph
    (edges cross one gate from a data input to the output).
    """

    to_pi: Mapping[int, int]
    to_po: Mapping[int, int]
    ff_in: Mapping[int, int]
    ff_out: Mapping[int, int]
    mux_in: Mapping[int, int]
    mux_out: Mapping[int, int]

    @classmethod
    def build(cls, circuit: CircuitGraph) -> "DistanceIndex":
        fwd: dict[int, list[int]] = {}
        bwd: dict[int, list[int]] = {}
        ff_out_nets: list[int] = []
        ff_d_nets: list[int] = []
        mux_out_nets: list[int] = []
        mux_in_nets: list[int] = []
        for g in circuit.gates.values():
            out = g.output
            for nid in g.data_inputs:
                fwd.setdefault(nid, []).append(out)
                bwd.setdefault(out, []).append(nid)
            if g.kind.family == "DFF":
                ff_out_nets.append(out)
                ff_d_nets.extend(g.data_inputs)
            elif g.kind.family == "MUX2":
                mux_out_nets.append(out)
                mux_in_nets.extend(g.data_inputs)
        f = {k: tuple(v) for k, v in fwd.items()}
        b = {k: tuple(v) for k, v in bwd.items()}
        level_up = lambda d: {k: v + 1 for k, v in d.items()}
        return cls(
            to_pi=_bfs(circuit.primary_inputs, f),
            to_po=_bfs(circuit.primary_outputs, b),
            ff_in=level_up(_bfs(ff_out_nets, f)),
            ff_out=level_up(_bfs(ff_d_nets, b)),
            mux_in=level_up(_bfs(mux_out_nets, f)),
            mux_out=level_up(_bfs(mux_in_nets, b)),
        )

    def lookup(self, net_id: int, sentinel: int) -> tuple[int, ...]:
        vals = []
        for table in (self.to_pi, self.to_po, self.ff_in, self.ff_out,
                      self.mux_in, self.mux_out):
            d = table.get(net_id)
            vals.append(sentinel if d is None else min(d, sentinel))
        return tuple(vals)


def _directional_distances(
    circuit: CircuitGraph, net_id: int, direction: str, sentinel: int
) -> tuple[int, int, int]:
    """(dist to PI/PO, dist to DFF, dist to MUX2) for one side of one net.

    Single-source levelized BFS that stops as soon as all three targets are
    resolved (or the sentinel level is reached), so scoring a handful of nets
    avoids the whole-circuit ``DistanceIndex``.  Values equal the index
    exactly: both count minimal gate crossings saturated at the sentinel.
    """
    is_input = direction == "input"
    ports = circuit.primary_inputs if is_input else circuit.primary_outputs
    port_set = frozenset(ports)
    d_port = 0 if net_id in port_set else None
    d_ff: int | None = None
    d_mux: int | None = None
    seen_nets = {net_id}
    seen_gates: set[int] = set()
    frontier = [net_id]
    level = 0
    while frontier and level < sentinel:
        if d_port is not None and d_ff is not None and d_mux is not None:
            break
        level += 1
        nxt: list[int] = []
        for nid in frontier:
            if is_input:
                drv = circuit.driver(nid)
                gates = () if drv is None else (drv,)
            else:
                gates = tuple(
                    circuit.gates[gid]
                    for gid, pin in circuit.consumers(nid)
                    if pin in circuit.gates[gid].kind.data_input_indices
                )
            for g in gates:
                if g.id in seen_gates:
                    continue
                seen_gates.add(g.id)
                fam = g.kind.family
                if fam == "DFF":
                    if d_ff is None:
                        d_ff = level
                elif fam == "MUX2" and d_mux is None:
                    d_mux = level
                for v in (g.data_inputs if is_input else g.outputs):
                    if v not in seen_nets:
                        seen_nets.add(v)
                        if d_port is None and v in port_set:
                            d_port = level
                        nxt.append(v)
        frontier = nxt
    fix = lambda d: sentinel if d is None else min(d, sentinel)
    return fix(d_port), fix(d_ff), fix(d_mux)


# ---------------------------------------------------------------------------
# Per-net bounded neighborhood features
# ---------------------------------------------------------------------------


def _cycles_through(circuit: CircuitGraph, net_id: int, max_gates: int) -> list[int]:
    """Gate-crossing lengths of distinct directed cycles through ``net_id``.

    Walks drivers backward along data pins, bounded by ``max_gates``
    crossings; simple cycles only; deduplicated on the set of nets visited.
    """
    seen: dict[frozenset[int], int] = {}

    def dfs(net: int, crossed: int, path: tuple[int, ...]) -> None:
        driver = circuit.driver(net)
        if driver is None or crossed == max_gates:
            return
        for prev in driver.data_inputs:
            if prev == net_id:
                key = frozenset(path)
                length = crossed + 1
                if key not in seen or length < seen[key]:
                    seen[key] = length
                continue
            if prev in path:
                continue
            dfs(prev, crossed + 1, path + (prev,))

    dfs(net_id, 0, (net_id,))
    return sorted(seen.values())


def _count_block(
    circuit: CircuitGraph, net_id: int, direction: str, depth: int
) -> tuple[list[float], dict[str, list[float]]]:
    """Bounded BFS counts for one side: fanin sums and cumulative cell counts."""
    view = circuit.neighborhood(net_id, direction, depth)
    fanin_at = [0.0] * depth
    cumulative = {"DFF": [0.0] * depth, "MUX2": [0.0] * depth, "CONST": [0.0] * depth}
    for gid, level in view.gate_levels.items():
        kind = circuit.gates[gid].kind
        if kind.is_combinational:
            fanin_at[level - 1] += kind.fanin
        fam = "CONST" if kind.is_constant else kind.family
        if fam in cumulative:
            for n in range(level, depth + 1):
                cumulative[fam][n - 1] += 1.0
    return fanin_at, cumulative


def extract_features(
    circuit: CircuitGraph,
    net_id: int,
    config: FeatureConfig = DEFAULT_CONFIG,
    _dist: DistanceIndex | None = None,
) -> np.ndarray:
    """The 51-value feature vector of one net, as float64."""
    if net_id not in circuit.nets:
        raise KeyError(net_id)
    depth = config.depth
    fanin_at, cum_in = _count_block(circuit, net_id, "input", depth)
    _, cum_out = _count_block(circuit, net_id, "output", depth)
    cycle_lengths = _cycles_through(circuit, net_id, depth)
    loops = [float(sum(1 for c in cycle_lengths if c <= n)) for n in _LEVELS]
    sentinel = config.distance_sentinel
    if _dist is not None:
        distances = _dist.lookup(net_id, sentinel)
    else:
        pi, ff_in, mux_in = _directional_distances(circuit, net_id, "input", sentinel)
        po, ff_out, mux_out = _directional_distances(circuit, net_id, "output", sentinel)
        distances = (pi, po, ff_in, ff_out, mux_in, mux_out)

    vec = np.empty(NUM_FEATURES, dtype=np.float64)
    vec[0:5] = fanin_at
    vec[5:10] = cum_in["DFF"]
    vec[10:15] = cum_out["DFF"]
    vec[15:20] = cum_in["MUX2"]
    vec[20:25] = cum_out["MUX2"]
    vec[25:30] = loops
    vec[30:35] = loops
    vec[35:40] = cum_in["CONST"]
    vec[40:45] = cum_out["CONST"]
    vec[45:51] = distances
    return vec


@dataclass
class FeatureMatrix:
    """Feature rows for a set of nets of one circuit."""

    circuit_name: str
    net_ids: tuple[int, ...]
    net_names: tuple[str, ...]
    labels: np.ndarray  # (n,) int, 1 = Trojan net
    matrix: np.ndarray  # (n, 51) float64
    _index: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._index = {nid: i for i, nid in enumerate(self.net_ids)}

    def row_for(self, net_id: int) -> np.ndarray:
        return self.matrix[self._index[net_id]]

    def with_rows_replaced(
        self, rows: Mapping[int, np.ndarray]
    ) -> "FeatureMatrix":
        matrix = self.matrix.copy()
        for nid, vec in rows.items():
            matrix[self._index[nid]] = vec
        return FeatureMatrix(
            self.circuit_name, self.net_ids, self.net_names, self.labels, matrix
        )


# Above this many nets, one shared six-pass DistanceIndex beats per-net
# early-stopping BFS.  Both paths compute identical distances.
_INDEX_CUTOFF = 16


def extract_for_nets(
    circuit: CircuitGraph,
    net_ids: Sequence[int],
    config: FeatureConfig = DEFAULT_CONFIG,
) -> FeatureMatrix:
    idx = DistanceIndex.build(circuit) if len(net_ids) > _INDEX_CUTOFF else None
    rows = np.stack(
        [extract_features(circuit, nid, config, _dist=idx) for nid in net_ids]
    ) if net_ids else np.empty((0, NUM_FEATURES))
    labels = np.array(
        [1 if circuit.is_trojan_net(nid) else 0 for nid in net_ids], dtype=np.int64
    )
    names = tuple(circuit.nets[nid].name for nid in net_ids)
    return FeatureMatrix(circuit.name, tuple(net_ids), names, labels, rows)


def extract_all(
    circuit: CircuitGraph, config: FeatureConfig = DEFAULT_CONFIG
) -> FeatureMatrix:
    """Feature rows for every net, in sorted net-id order."""
    return extract_for_nets(circuit, circuit.sorted_net_ids(), config)


# ---------------------------------------------------------------------------
# Min-max normalization
# ---------------------------------------------------------------------------


@dataclass
class NormStats:
    """Per-column min/max learned from a training matrix."""

    col_min: np.ndarray
    col_max: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "NormStats":
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise ValueError("need a non-empty 2-D matrix to fit normalization")
        return cls(matrix.min(axis=0).astype(np.float64),
                   matrix.max(axis=0).astype(np.float64))

    @property
    def degenerate(self) -> np.ndarray:
        return self.col_max == self.col_min

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """Scale into [0, 1] with clipping; degenerate columns map to 0.0."""
        m = np.asarray(matrix, dtype=np.float64)
        span = np.where(self.degenerate, 1.0, self.col_max - self.col_min)
        out = (m - self.col_min) / span
        out = np.where(self.degenerate, 0.0, out)
        return np.clip(out, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"col_min": self.col_min.tolist(), "col_max": self.col_max.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "NormStats":
        return cls(np.asarray(data["col_min"], dtype=np.float64),
                   np.asarray(data["col_max"], dtype=np.float64))


# ---------------------------------------------------------------------------
# CSV round-trip
# ---------------------------------------------------------------------------

_CSV_HEADER = ["net", "label"] + [f"f{i}" for i in range(1, NUM_FEATURES + 1)]


def write_feature_csv(path: str, fm: FeatureMatrix) -> None:
    """Raw (unnormalized) feature rows: header ``net,label,f1..f51``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_HEADER)
        for name, label, row in zip(fm.net_names, fm.labels, fm.matrix):
            w.writerow([name, int(label)] + [_fmt(v) for v in row])


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def read_feature_csv(path: str, circuit_name: str = "") -> FeatureMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != _CSV_HEADER:
            raise ValueError(f"unexpected feature CSV header in {path!r}")
        names: list[str] = []
        labels: list[int] = []
        rows: list[list[float]] = []
        for rec in r:
            names.append(rec[0])
            labels.append(int(rec[1]))
            rows.append([float(x) for x in rec[2:]])
    n = len(names)
    return FeatureMatrix(
        circuit_name or path,
        tuple(range(n)),
        tuple(names),
        np.asarray(labels, dtype=np.int64),
        np.asarray(rows, dtype=np.float64).reshape(n, NUM_FEATURES),
    )
