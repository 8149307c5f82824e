"""Command-line front end: parse, featurize, train, rewrite, attack, advtrain,
evaluate.

Configuration precedence is flags > config file (``--config``, JSON always,
TOML on Python 3.11+) > profile defaults (``--profile trust-hub|trit-tc``) >
built-in defaults.  Every run writes ``run_manifest.json`` into its output
directory with the fully merged configuration, input paths, and output paths,
so any result can be replayed from its manifest alone.

Netlist arguments that do not resolve as given are also tried relative to the
benchmark directory (``--bench-dir`` or ``$HTLAB_BENCH_DIR``).  Trojan labels
come from ``--label-regex``, an explicit ``--labels`` sidecar, or -- when
neither is given -- a ``<stem>.labels`` file next to the netlist if one exists.

Exit codes: 0 success, 1 operational failure (bad input file, malformed plan,
missing net, ...), 2 usage errors (argparse).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import __version__
from .advtrain import PROFILES, AdvTrainConfig, samples_from_circuits, train_robust
from .attack import AttackConfig, attack_sweep, run_attack
from .evaluation import LoocvOptions, emit_reports, run_loocv
from .features import extract_all, write_feature_csv
from .model import MLPConfig, MLPDetector, load_model, save_model
from .netlist import (
    CircuitGraph,
    LabelSpec,
    NetlistError,
    emit_verilog,
    parse_verilog_file,
)
from .rewrite import PATTERN_IDS, apply_pattern, check_equivalence
from .synth import synth_corpus

__all__ = ["main", "dispatch", "GlobalConfig"]

log = logging.getLogger(__name__)

BENCH_DIR_ENV = "HTLAB_BENCH_DIR"
_PROFILE_NAMES = ("trust-hub", "trit-tc", "custom")


@dataclass
class GlobalConfig:
    """Run-wide settings shared by every subcommand."""

    seed: int = 0
    log_level: str = "warning"
    threads: int = 1
    bench_dir: str = ""
    model_dir: str = ""
    out_dir: str = "."
    profile: str = "custom"


# ---------------------------------------------------------------------------
# Config merging: flags > config file > profile defaults > built-ins
# ---------------------------------------------------------------------------


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError as exc:  # Python < 3.11
            raise ValueError(
                "TOML config files need Python 3.11+; use JSON instead"
            ) from exc
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _merged_value(key: str, flag_value, file_cfg: dict, profile_cfg: dict, default):
    """One setting resolved by precedence; ``None`` flag means 'not given'."""
    if flag_value is not None:
        return flag_value
    if key in file_cfg:
        return file_cfg[key]
    if key in profile_cfg:
        return profile_cfg[key]
    return default


def _resolve_global(args: argparse.Namespace, file_cfg: dict) -> GlobalConfig:
    base = GlobalConfig()
    env_bench = os.environ.get(BENCH_DIR_ENV, "")
    return GlobalConfig(
        seed=int(_merged_value("seed", args.seed, file_cfg, {}, base.seed)),
        log_level=str(
            _merged_value("log_level", args.log_level, file_cfg, {}, base.log_level)
        ),
        threads=int(_merged_value("threads", args.threads, file_cfg, {}, base.threads)),
        bench_dir=str(
            _merged_value("bench_dir", args.bench_dir, file_cfg, {}, env_bench)
        ),
        model_dir=str(
            _merged_value("model_dir", args.model_dir, file_cfg, {}, base.model_dir)
        ),
        out_dir=str(_merged_value("out_dir", args.out_dir, file_cfg, {}, base.out_dir)),
        profile=str(
            _merged_value("profile", getattr(args, "profile", None), file_cfg, {}, base.profile)
        ),
    )


def _resolve_adv_config(
    args: argparse.Namespace, file_cfg: dict, gcfg: GlobalConfig
) -> AdvTrainConfig:
    profile_cfg = dict(PROFILES.get(gcfg.profile, {}))
    base = AdvTrainConfig()
    fields = (
        "epochs", "batch_size", "min_trojan_per_batch", "trojan_modify_ratio",
        "init_epochs", "attack_budget", "oversample", "class_weight",
        "allow_relaxed",
    )
    values = {
        f: _merged_value(f, getattr(args, f, None), file_cfg, profile_cfg,
                         getattr(base, f))
        for f in fields
    }
    return AdvTrainConfig(seed=gcfg.seed, **values)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _resolve_path(path: str, gcfg: GlobalConfig) -> str:
    if os.path.exists(path) or not gcfg.bench_dir:
        return path
    candidate = os.path.join(gcfg.bench_dir, path)
    return candidate if os.path.exists(candidate) else path


def _label_spec(args: argparse.Namespace, netlist_path: str) -> LabelSpec:
    if getattr(args, "label_regex", None):
        return LabelSpec.name_regex(args.label_regex)
    if getattr(args, "labels", None):
        return LabelSpec.from_sidecar_file(args.labels)
    sidecar = os.path.splitext(netlist_path)[0] + ".labels"
    if os.path.exists(sidecar):
        log.info("using label sidecar %s", sidecar)
        return LabelSpec.from_sidecar_file(sidecar)
    return LabelSpec.none()


def _load_circuit(path: str, args: argparse.Namespace, gcfg: GlobalConfig) -> CircuitGraph:
    resolved = _resolve_path(path, gcfg)
    return parse_verilog_file(resolved, _label_spec(args, resolved))


def _model_path(path: str, gcfg: GlobalConfig) -> str:
    if os.path.exists(path) or not gcfg.model_dir:
        return path
    candidate = os.path.join(gcfg.model_dir, path)
    return candidate if os.path.exists(candidate) else path


def _write_manifest(
    gcfg: GlobalConfig,
    command: str,
    settings: dict,
    inputs: Sequence[str],
    outputs: Sequence[str],
) -> str:
    os.makedirs(gcfg.out_dir or ".", exist_ok=True)
    path = os.path.join(gcfg.out_dir or ".", "run_manifest.json")
    manifest = {
        "package_version": __version__,
        "command": command,
        "global": {
            "seed": gcfg.seed,
            "log_level": gcfg.log_level,
            "threads": gcfg.threads,
            "bench_dir": gcfg.bench_dir,
            "model_dir": gcfg.model_dir,
            "out_dir": gcfg.out_dir,
            "profile": gcfg.profile,
        },
        "settings": settings,
        "inputs": list(inputs),
        "outputs": list(outputs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _out(gcfg: GlobalConfig, name: str) -> str:
    os.makedirs(gcfg.out_dir or ".", exist_ok=True)
    return os.path.join(gcfg.out_dir or ".", name)


def _parse_alpha(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_parse(args: argparse.Namespace, gcfg: GlobalConfig, file_cfg: dict) -> int:
    circuit = _load_circuit(args.netlist, args, gcfg)
    outputs = []
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(emit_verilog(circuit))
        outputs.append(args.emit)
    if args.dump_graph:
        with open(args.dump_graph, "w", encoding="utf-8") as fh:
            json.dump(circuit.to_json_dict(), fh, indent=2, sort_keys=True)
        outputs.append(args.dump_graph)
    stats = circuit.stats()
    print(f"{circuit.name}: " + ", ".join(f"{k}={v}" for k, v in sorted(stats.items())))
    _write_manifest(gcfg, "parse", {"netlist": args.netlist}, [args.netlist], outputs)
    return 0


def _cmd_featurize(args: argparse.Namespace, gcfg: GlobalConfig, file_cfg: dict) -> int:
    circuit = _load_circuit(args.netlist, args, gcfg)
    fm = extract_all(circuit)
    out_csv = args.out or _out(gcfg, f"{circuit.name}_features.csv")
    write_feature_csv(out_csv, fm)
    print(f"{circuit.name}: wrote {fm.matrix.shape[0]} rows x "
          f"{fm.matrix.shape[1]} features to {out_csv}")
    _write_manifest(
        gcfg, "featurize", {"netlist": args.netlist, "out": out_csv},
        [args.netlist], [out_csv],
    )
    return 0


def _cmd_train(args: argparse.Namespace, gcfg: GlobalConfig, file_cfg: dict) -> int:
    profile_cfg = dict(PROFILES.get(gcfg.profile, {}))
    epochs = int(_merged_value("epochs", args.epochs, file_cfg, profile_cfg, 10))
    batch_size = int(_merged_value("batch_size", args.batch_size, file_cfg, profile_cfg, 16))
    oversample = bool(_merged_value("oversample", args.oversample, file_cfg, profile_cfg, True))
    class_weight = _merged_value("class_weight", args.class_weight, file_cfg, profile_cfg, None)

    circuits = [_load_circuit(p, args, gcfg) for p in args.netlists]
    mats = [extract_all(c) for c in circuits]
    x = np.vstack([fm.matrix for fm in mats])
    y = np.concatenate([fm.labels for fm in mats])
    if class_weight is None:
        # The TRIT-TC recipe weights the positive class by the class ratio.
        if gcfg.profile == "trit-tc":
            n_pos = int(y.sum())
            class_weight = float((y.size - n_pos) / n_pos) if n_pos else 1.0
        else:
            class_weight = 1.0
    model = MLPDetector(MLPConfig(init_seed=gcfg.seed))
    report = model.fit(
        x, y,
        epochs=epochs,
        batch_size=batch_size,
        class_weight=float(class_weight),
        oversample=oversample,
        shuffle_seed=gcfg.seed + 1,
    )
    out_model = args.out or _out(gcfg, "model.json")
    save_model(model, out_model)
    print(f"trained on {y.size} nets ({int(y.sum())} Trojan) from "
          f"{len(circuits)} netlists; final loss {report.epoch_losses[-1]:.6f}; "
          f"model -> {out_model}")
    _write_manifest(
        gcfg, "train",
        {
            "netlists": list(args.netlists),
            "epochs": epochs,
            "batch_size": batch_size,
            "oversample": oversample,
            "class_weight": float(class_weight),
            "out": out_model,
        },
        list(args.netlists), [out_model],
    )
    return 0


def _cmd_rewrite(args: argparse.Namespace, gcfg: GlobalConfig, file_cfg: dict) -> int:
    circuit = _load_circuit(args.netlist, args, gcfg)
    try:
        gate = circuit.gate_by_name(args.instance)
    except KeyError:
        raise ValueError(f"unknown instance {args.instance!r} in {circuit.name}") from None
    result = apply_pattern(circuit, gate.id, args.pattern, allow_relaxed=args.allow_relaxed)
    rewritten = result.circuit
    outputs = []
    out_v = args.emit or _out(gcfg, f"{circuit.name}_{args.pattern}.v")
    with open(out_v, "w", encoding="utf-8") as fh:
        fh.write(emit_verilog(rewritten))
    outputs.append(out_v)
    diff = {
        "pattern": result.pattern_id,
        "instance": args.instance,
        "removed_gate_ids": list(result.removed_gate_ids),
        "new_gate_ids": list(result.new_gate_ids),
        "new_gates": [rewritten.gates[g].name for g in result.new_gate_ids],
        "new_net_ids": list(result.new_net_ids),
        "new_nets": [rewritten.nets[n].name for n in result.new_net_ids],
    }
    if args.check:
        eq = check_equivalence(circuit, rewritten, seed=gcfg.seed)
        diff["equivalent"] = eq.equivalent
        diff["check_mode"] = eq.mode
    out_diff = args.diff or _out(gcfg, f"{circuit.name}_{args.pattern}_diff.json")
    with open(out_diff, "w", encoding="utf-8") as fh:
        json.dump(diff, fh, indent=2, sort_keys=True)
    outputs.append(out_diff)
    print(f"applied {args.pattern} at {args.instance}: "
          f"+{len(result.new_gate_ids)} gates, +{len(result.new_net_ids)} nets"
          + (f", equivalent={diff['equivalent']}" if args.check else ""))
    _write_manifest(
        gcfg, "rewrite",
        {"netlist": args.netlist, "pattern": args.pattern, "instance": args.instance,
         "allow_relaxed": args.allow_relaxed, "check": args.check},
        [args.netlist], outputs,
    )
    return 0


def _cmd_attack(args: argparse.Namespace, gcfg: GlobalConfig, file_cfg: dict) -> int:
    circuit = _load_circuit(args.netlist, args, gcfg)
    model = load_model(_model_path(args.model, gcfg))
    oracle = model.as_oracle()
    target_net_id = None
    if args.ttcd:
        try:
            target_net_id = circuit.net_by_name(args.ttcd).id
        except KeyError:
            raise ValueError(f"unknown net name {args.ttcd!r} in {circuit.name}") from None
        alpha = 1.0
    else:
        alpha = _parse_alpha(args.alpha or "1")
    cfg = AttackConfig(
        alpha=alpha,
        k_max=args.budget,
        allow_relaxed=args.allow_relaxed,
        full_reextract=args.full_reextract,
    )
    result = run_attack(circuit, oracle, cfg, target_net_id=target_net_id)
    attacked = result.circuit_after(args.budget)

    out_v = args.emit or _out(gcfg, f"{circuit.name}_attacked.v")
    with open(out_v, "w", encoding="utf-8") as fh:
        fh.write(emit_verilog(attacked))
    trace = result.summary()
    trace["metrics"] = result.metrics
    out_trace = args.trace or _out(gcfg, f"{circuit.name}_attack_trace.json")
    with open(out_trace, "w", encoding="utf-8") as fh:
        json.dump(trace, fh, indent=2, sort_keys=True)

    # Sweep CSV: the metric trajectory over budgets 0..K (k=0 is unattacked),
    # optionally across extra alphas.
    out_sweep = args.sweep_csv or _out(gcfg, f"{circuit.name}_attack_sweep.csv")
    sweep_alphas = [alpha] if target_net_id is not None else sorted(
        {alpha, *map(_parse_alpha, args.sweep_alphas or [])},
        key=lambda a: (math.isinf(a), a),
    )
    k_values = list(range(args.budget + 1))
    if target_net_id is None and len(sweep_alphas) > 1:
        grid = attack_sweep(circuit, oracle, sweep_alphas, k_values, cfg)
    else:
        grid = {(alpha, k): result for k in k_values}
    with open(out_sweep, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "k", "metric", "accepted_steps"])
        for (a, k), res in sorted(grid.items(), key=lambda t: (math.isinf(t[0][0]), t[0])):
            n_acc = min(k, len(res.steps))
            metric = res.metrics[n_acc]
            w.writerow(["inf" if math.isinf(a) else _fmt_num(a), k,
                        repr(metric), n_acc])

    print(f"attack on {circuit.name}: {len(result.steps)} accepted steps "
          f"(budget {args.budget}), metric {result.initial_metric:.6f} -> "
          f"{result.metrics[-1]:.6f}, oracle calls {result.oracle_calls}")
    _write_manifest(
        gcfg, "attack",
        {
            "netlist": args.netlist, "model": args.model,
            "alpha": "inf" if math.isinf(alpha) else alpha,
            "ttcd": args.ttcd, "budget": args.budget,
            "allow_relaxed": args.allow_relaxed,
            "full_reextract": args.full_reextract,
        },
        [args.netlist, args.model], [out_v, out_trace, out_sweep],
    )
    return 0


def _cmd_advtrain(args: argparse.Namespace, gcfg: GlobalConfig, file_cfg: dict) -> int:
    adv = _resolve_adv_config(args, file_cfg, gcfg)
    circuits = [_load_circuit(p, args, gcfg) for p in args.netlists]
    if gcfg.profile == "trit-tc" and args.class_weight is None and "class_weight" not in file_cfg:
        labels = np.concatenate([extract_all(c).labels for c in circuits])
        n_pos = int(labels.sum())
        ratio = float((labels.size - n_pos) / n_pos) if n_pos else 1.0
        adv = AdvTrainConfig(**{**adv.__dict__, "class_weight": ratio})
    samples = samples_from_circuits(circuits)
    model, report = train_robust(samples, adv)
    out_model = args.out or _out(gcfg, "model_robust.json")
    save_model(model, out_model)
    print(f"adversarially trained on {len(samples)} nets from {len(circuits)} "
          f"netlists; {report.adversarial_generated} adversarial examples "
          f"({report.degenerate_examples} degenerate) over "
          f"{report.triggered_batches} batches; model -> {out_model}")
    _write_manifest(
        gcfg, "advtrain",
        {
            "netlists": list(args.netlists),
            **{k: v for k, v in adv.__dict__.items() if k != "feature_config"},
            "out": out_model,
        },
        list(args.netlists), [out_model],
    )
    return 0


def _plan_circuits(plan: dict, gcfg: GlobalConfig) -> list[CircuitGraph]:
    corpus = plan.get("corpus", {})
    if "synthetic" in corpus:
        spec = corpus["synthetic"]
        return synth_corpus(int(spec.get("count", 12)), seed=int(spec.get("seed", 2024)))
    benches = corpus.get("benchmarks")
    if not benches:
        raise ValueError("plan needs corpus.synthetic or corpus.benchmarks")
    circuits = []
    for entry in benches:
        path = _resolve_path(entry["path"], gcfg)
        if "label_regex" in entry:
            spec = LabelSpec.name_regex(entry["label_regex"])
        elif "labels" in entry:
            spec = LabelSpec.from_sidecar_file(_resolve_path(entry["labels"], gcfg))
        else:
            sidecar = os.path.splitext(path)[0] + ".labels"
            spec = (LabelSpec.from_sidecar_file(sidecar)
                    if os.path.exists(sidecar) else LabelSpec.none())
        circuits.append(parse_verilog_file(path, spec, name=entry.get("name")))
    return circuits


def _cmd_evaluate(args: argparse.Namespace, gcfg: GlobalConfig, file_cfg: dict) -> int:
    plan = _load_config_file(args.plan)
    circuits = _plan_circuits(plan, gcfg)
    adv_fields = plan.get("adv", {})
    adv = AdvTrainConfig(**{**AdvTrainConfig().__dict__, **adv_fields})
    options = LoocvOptions(
        models=tuple(plan.get("models", ["normal"])),
        alphas=tuple(_parse_alpha(str(a)) for a in plan.get("alphas", [1, 2, "inf"])),
        k_values=tuple(int(k) for k in plan.get("k_values", [5])),
        epochs=int(plan.get("epochs", 10)),
        batch_size=int(plan.get("batch_size", 16)),
        oversample=bool(plan.get("oversample", True)),
        class_weight=float(plan.get("class_weight", 1.0)),
        adv=adv,
        allow_relaxed=bool(plan.get("allow_relaxed", False)),
        full_reextract=bool(plan.get("full_reextract", False)),
        seed=int(plan.get("seed", gcfg.seed)),
        threads=int(plan.get("threads", gcfg.threads)),
    )
    report = run_loocv(circuits, options)
    out_dir = args.out or gcfg.out_dir or "."
    paths = emit_reports(report, out_dir)
    for model in sorted({f.model for f in report.folds}):
        avg = report.average(model)
        parts = [f"{model}: TPR {_fmt_rate(avg['original_tpr'])}",
                 f"TNR {_fmt_rate(avg['original_tnr'])}"]
        parts += [f"attacked[{key}] TPR {_fmt_rate(v)}"
                  for key, v in sorted(avg["attacked_tpr"].items())]
        print("; ".join(parts))
    gcfg_for_manifest = GlobalConfig(**{**gcfg.__dict__, "out_dir": out_dir})
    _write_manifest(
        gcfg_for_manifest, "evaluate",
        {"plan_file": args.plan, "plan": plan},
        [args.plan], sorted(paths.values()),
    )
    return 0


def _fmt_rate(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.3f}"


def _fmt_num(a: float) -> str:
    return str(int(a)) if float(a).is_integer() else str(a)


# ---------------------------------------------------------------------------
# Parser construction and dispatch
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, labels: bool = False) -> None:
    p.add_argument("--config", help="JSON (or TOML on 3.11+) config file")
    p.add_argument("--seed", type=int, default=None, help="global RNG seed")
    p.add_argument("--log-level", default=None,
                   choices=("debug", "info", "warning", "error"))
    p.add_argument("--threads", type=int, default=None, help="worker pool size")
    p.add_argument("--bench-dir", default=None,
                   help=f"benchmark directory (default ${BENCH_DIR_ENV})")
    p.add_argument("--model-dir", default=None, help="directory for model files")
    p.add_argument("--out-dir", default=None, help="output directory")
    p.add_argument("--profile", default=None, choices=_PROFILE_NAMES,
                   help="hyperparameter preset")
    if labels:
        p.add_argument("--labels", default=None,
                       help="Trojan-net sidecar file (one net name per line)")
        p.add_argument("--label-regex", default=None,
                       help="instance-name regex marking Trojan gates")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="htlab",
        description="Hardware-Trojan detection, gate-modification attacks, "
                    "and adversarial training on gate-level netlists.",
    )
    parser.add_argument("--version", action="version", version=f"htlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a netlist; optionally re-emit it")
    p.add_argument("netlist")
    p.add_argument("--emit", help="write the round-tripped Verilog here")
    p.add_argument("--dump-graph", help="write the graph JSON here")
    _add_common(p, labels=True)

    p = sub.add_parser("featurize", help="emit the per-net feature CSV")
    p.add_argument("netlist")
    p.add_argument("--out", help="CSV path (default <name>_features.csv)")
    _add_common(p, labels=True)

    p = sub.add_parser("train", help="train the plain detector")
    p.add_argument("netlists", nargs="+")
    p.add_argument("--out", help="model JSON path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--class-weight", type=float, default=None)
    p.add_argument("--oversample", action=argparse.BooleanOptionalAction, default=None)
    _add_common(p, labels=True)

    p = sub.add_parser("rewrite", help="apply one modification pattern")
    p.add_argument("netlist")
    p.add_argument("--pattern", required=True, choices=PATTERN_IDS)
    p.add_argument("--instance", required=True, help="gate instance name")
    p.add_argument("--allow-relaxed", action="store_true",
                   help="permit the relaxed-equivalence DFF patterns")
    p.add_argument("--check", action="store_true",
                   help="run the equivalence check and record the verdict")
    p.add_argument("--emit", help="modified Verilog path")
    p.add_argument("--diff", help="JSON diff path")
    _add_common(p, labels=True)

    p = sub.add_parser("attack", help="greedy gate-modification attack")
    p.add_argument("netlist")
    p.add_argument("--model", required=True, help="detector model JSON")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--alpha", default=None, help="alpha-TCD: 1, 2, or inf")
    group.add_argument("--ttcd", default=None, metavar="NET",
                       help="target a single net by name (TTCD)")
    p.add_argument("--budget", type=int, default=5, help="max modifications K")
    p.add_argument("--allow-relaxed", action="store_true")
    p.add_argument("--full-reextract", action="store_true",
                   help="re-extract all features per candidate (slow)")
    p.add_argument("--sweep-alphas", nargs="*", default=None,
                   help="extra alphas for the sweep CSV")
    p.add_argument("--emit", help="attacked Verilog path")
    p.add_argument("--trace", help="attack trace JSON path")
    p.add_argument("--sweep-csv", help="metric-vs-budget CSV path")
    _add_common(p, labels=True)

    p = sub.add_parser("advtrain", help="adversarial (robust) training")
    p.add_argument("netlists", nargs="+")
    p.add_argument("--out", help="model JSON path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--min-trojan-per-batch", type=int, default=None)
    p.add_argument("--trojan-modify-ratio", type=float, default=None)
    p.add_argument("--init-epochs", type=int, default=None)
    p.add_argument("--attack-budget", type=int, default=None)
    p.add_argument("--class-weight", type=float, default=None)
    p.add_argument("--oversample", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--allow-relaxed", action=argparse.BooleanOptionalAction, default=None)
    _add_common(p, labels=True)

    p = sub.add_parser("evaluate", help="leave-one-out evaluation from a plan file")
    p.add_argument("--plan", required=True, help="JSON (or TOML on 3.11+) plan")
    p.add_argument("--out", help="report directory (default --out-dir)")
    _add_common(p)

    return parser


_COMMANDS = {
    "parse": _cmd_parse,
    "featurize": _cmd_featurize,
    "train": _cmd_train,
    "rewrite": _cmd_rewrite,
    "attack": _cmd_attack,
    "advtrain": _cmd_advtrain,
    "evaluate": _cmd_evaluate,
}


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
        gcfg = _resolve_global(args, file_cfg)
        logging.basicConfig(level=getattr(logging, gcfg.log_level.upper(), logging.WARNING))
        return _COMMANDS[args.command](args, gcfg, file_cfg)
    except (NetlistError, ValueError, KeyError, OSError) as exc:
        detail = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {detail}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
