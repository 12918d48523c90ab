"""Command line driver: ``qip {prop1,train,cluster,sweep-lambda,export-features}``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime fault.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import qsim
from .config import Config, load_config
from .data import save_features
from .errors import ConfigurationError, FileFormatError, QipError, TrainingFault
from .experiment import (
    SPACES,
    build_dataset,
    evaluate_state,
    prop1_suite,
    space_features,
    train_model,
)
from .gap import gap_pair
from .io import atomic_write_csv, atomic_write_json
from .observe import ObservableSpec
from .train import load_checkpoint, save_checkpoint

HISTORY_HEADER = ["step", "lr", "L", "K", "L_QIP"]


def _lam_tag(lam: float) -> str:
    return f"lam{lam:g}"


def _history_rows(history):
    return [[h["step"], repr(h["lr"]), repr(h["L"]), repr(h["K"]), repr(h["L_QIP"])] for h in history]


def _lambdas_for_train(cfg: Config) -> list[float]:
    return [0.0] if cfg.train.lam == 0 else [0.0, cfg.train.lam]


def cmd_prop1(cfg: Config, out: Path) -> dict:
    r = cfg.run
    seed = r.seeds[0]
    suite = prop1_suite(r.prop1_qubits, r.prop1_observables, r.prop1_pairs, r.prop1_states, seed)
    identical = {}
    for n in r.prop1_qubits:
        zero = qsim.zero_state(n)
        identical[f"n{n}"] = gap_pair(zero, zero, ObservableSpec.parse("Z")).to_json()
    report = {
        "states": r.prop1_states,
        "seed": seed,
        "suite": suite,
        "min_gap_fraction": min(v["gap_fraction"] for v in suite.values()),
        "max_witness_residual": max(v["max_witness_residual"] for v in suite.values()),
        "identical_zero_state_pairs": identical,
    }
    atomic_write_json(out / "metrics.json", report)
    return report


def cmd_train(cfg: Config, out: Path) -> dict:
    summary = {}
    for seed in cfg.run.seeds:
        data = build_dataset(cfg, seed)
        for lam in _lambdas_for_train(cfg):
            state, history = train_model(cfg, data, seed, lam)
            run_dir = out / f"seed{seed}" / _lam_tag(lam)
            save_checkpoint(run_dir / "checkpoint.qip", state)
            atomic_write_csv(run_dir / "history.csv", HISTORY_HEADER, _history_rows(history))
            last = history[-1] if history else {"L": None, "K": None, "L_QIP": None}
            summary.setdefault(f"seed{seed}", {})[_lam_tag(lam)] = {
                "steps": state.step,
                "final_L": last["L"],
                "final_K": last["K"],
                "final_L_QIP": last["L_QIP"],
            }
    atomic_write_json(out / "metrics.json", summary)
    return summary


def _check_state_matches(cfg: Config, state) -> None:
    dims = [cfg.data.input_dim, *cfg.model.hidden, cfg.model.feature_dim]
    problems = []
    if list(state.mlp.layer_dims) != dims:
        problems.append(f"layer dims {list(state.mlp.layer_dims)} vs config {dims}")
    if state.enc.kind != cfg.quantum.encoder:
        problems.append(f"encoder {state.enc.kind} vs config {cfg.quantum.encoder}")
    if str(state.obs) != str(ObservableSpec.parse(cfg.quantum.observable)):
        problems.append(f"observable {state.obs} vs config {cfg.quantum.observable}")
    if problems:
        raise ConfigurationError("checkpoint does not match config: " + "; ".join(problems))


def _mean_metrics(per_seed: list[dict]) -> dict:
    out = {}
    for space in per_seed[0]:
        keys = [k for k, v in per_seed[0][space].items() if isinstance(v, float)]
        out[space] = {k: float(np.mean([m[space][k] for m in per_seed])) for k in keys}
    return out


def cmd_cluster(cfg: Config, out: Path, checkpoint: str | None = None) -> dict:
    report = {"observable": cfg.quantum.observable, "encoder": cfg.quantum.encoder, "runs": {}}
    if checkpoint:
        state = load_checkpoint(checkpoint)
        _check_state_matches(cfg, state)
        seed = int(state.seed)
        data = build_dataset(cfg, seed)
        report["runs"][f"seed{seed}"] = {_lam_tag(state.lam): evaluate_state(cfg, state, data, seed)}
    else:
        by_lam: dict[str, list] = {}
        for seed in cfg.run.seeds:
            data = build_dataset(cfg, seed)
            for lam in _lambdas_for_train(cfg):
                state, _ = train_model(cfg, data, seed, lam)
                metrics = evaluate_state(cfg, state, data, seed)
                report["runs"].setdefault(f"seed{seed}", {})[_lam_tag(lam)] = metrics
                by_lam.setdefault(_lam_tag(lam), []).append(metrics)
        report["mean"] = {tag: _mean_metrics(ms) for tag, ms in by_lam.items()}
    atomic_write_json(out / "metrics.json", report)
    return report


SWEEP_HEADER = ["lambda", "seed", *(f"{s}_{m}" for s in SPACES for m in ("F_P", "F_B"))]


def cmd_sweep_lambda(cfg: Config, out: Path) -> list[list]:
    rows = []
    for lam in cfg.sweep.lambdas:
        per_seed = []
        for seed in cfg.run.seeds:
            data = build_dataset(cfg, seed)
            state, _ = train_model(cfg, data, seed, lam)
            m = evaluate_state(cfg, state, data, seed)
            values = [m[s][k] for s in SPACES for k in ("F_P", "F_B")]
            per_seed.append(values)
            rows.append([repr(float(lam)), str(seed), *map(repr, values)])
        rows.append([repr(float(lam)), "mean", *map(repr, np.mean(per_seed, axis=0).tolist())])
    atomic_write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    return rows


def cmd_export_features(cfg: Config, out: Path, checkpoint: str | None = None) -> Path:
    if checkpoint:
        state = load_checkpoint(checkpoint)
        _check_state_matches(cfg, state)
        seed = int(state.seed)
        data = build_dataset(cfg, seed)
    else:
        seed = cfg.run.seeds[0]
        data = build_dataset(cfg, seed)
        state, _ = train_model(cfg, data, seed)
    feats = space_features(state, data.X)
    V, Q = feats["classical"], feats["quantum"]
    split = np.empty(len(data.y), dtype=object)
    split[data.train_idx] = "train"
    split[data.test_idx] = "test"
    header = ["index", "split", "label", *(f"v{i}" for i in range(V.shape[1])), *(f"q{i}" for i in range(Q.shape[1]))]
    rows = [[i, split[i], int(data.y[i]), *map(repr, V[i].tolist()), *map(repr, Q[i].tolist())] for i in range(len(V))]
    atomic_write_csv(out / "features.csv", header, rows)
    save_features(out / "classical.qfv", V, data.y)
    save_features(out / "quantum.qfv", Q, data.y)
    return out / "features.csv"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qip", description="Quantum information gap experiments at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("prop1", "train", "cluster", "sweep-lambda", "export-features"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat 'section.key = value' config file")
        p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        if name in ("cluster", "export-features"):
            p.add_argument("--checkpoint", help="use a trained checkpoint instead of training")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else Config().validate()
        if args.seed is not None:
            cfg = replace(cfg, run=replace(cfg.run, seeds=[args.seed]))
        out = Path(args.out)
        if args.command == "prop1":
            cmd_prop1(cfg, out)
        elif args.command == "train":
            cmd_train(cfg, out)
        elif args.command == "cluster":
            cmd_cluster(cfg, out, args.checkpoint)
        elif args.command == "sweep-lambda":
            cmd_sweep_lambda(cfg, out)
        else:
            cmd_export_features(cfg, out, args.checkpoint)
    except (ConfigurationError, FileFormatError) as exc:
        print(f"qip: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qip: error: {exc}", file=sys.stderr)
        return 2
    except TrainingFault as exc:
        print(f"qip: training fault: {exc}", file=sys.stderr)
        return 3
    except (QipError, ArithmeticError, ValueError) as exc:
        print(f"qip: runtime fault: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
