"""Command line interface: ``sympae <command> [options]``.

Commands
--------
generate-data   integrate the wave FOM over the training grid
train           fit the PSD baseline and the autoencoder at every 2n
evaluate        e_proj and e_red for both methods at every evaluation mu
torus-demo      POD versus PSD on two uncoupled oscillators
report          merge error CSVs into a summary and a long-format table

Failures exit with status 2 and print ``error: <category>: <message>`` to
stderr, where the category is machine readable (``config``, ``container``,
``solver``, ...).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .autoencoder import SymplecticAutoencoder
from .config import OUTPUT_ENV_VAR, ExperimentConfig, load_config
from .containers import (
    atomic_write_text,
    load_model,
    load_psd_basis,
    load_snapshots,
    save_model,
    save_psd_basis,
    save_snapshots,
    write_manifest,
)
from .exceptions import ContainerError, SympaeError
from .experiments import (
    TrainedModels,
    evaluate,
    generate_wave_data,
    merge_reports,
    torus_demo,
    train_models,
)
from .linear import PSD

logger = logging.getLogger("sympae")

SNAPSHOTS = "snapshots.bin"
REPORT = "errors.csv"


def _resolve_out(args, cfg: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUTPUT_ENV_VAR)
    return Path(env) if env else Path(cfg.output_dir)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config, args.profile)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.validate()
    return cfg


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _psd_path(out: Path, d: int) -> Path:
    return out / f"psd_2n{d}.bin"


def _sae_path(out: Path, d: int) -> Path:
    return out / f"sae_2n{d}.bin"


# ---------------------------------------------------------------------------


def cmd_generate_data(args) -> int:
    cfg = _load(args)
    out = _resolve_out(args, cfg)
    snaps = generate_wave_data(cfg, args.threads)
    save_snapshots(out / SNAPSHOTS, snaps, {"config": cfg.to_dict()})
    write_manifest(out / (SNAPSHOTS + ".manifest"), {
        "kind": "snapshots",
        "rows": snaps.data.shape[0],
        "columns": snaps.data.shape[1],
        "n_tilde": cfg.fom.n_tilde,
        "mu": snaps.parameters,
        "step_size": cfg.time.step_size,
        "n_steps": cfg.time.n_steps,
        "t_final": float(snaps.times[-1]),
        "seed": cfg.seed,
    })
    atomic_write_text(out / "config.yaml", cfg.to_yaml())
    print(f"wrote {snaps.parameters.size} trajectories, snapshot matrix {snaps.data.shape[0]}x{snaps.data.shape[1]} -> {out / SNAPSHOTS}")
    return 0


def _trained_from_disk(out: Path, cfg: ExperimentConfig) -> TrainedModels:
    models = TrainedModels()
    for d in cfg.evaluation.reduced_dims:
        basis, _ = load_psd_basis(_psd_path(out, d))
        psd = PSD(d // 2)
        psd.basis_, psd.n_features_in_ = basis, 2 * basis.Phi.shape[0]
        psd.components_, psd.Phi_ = basis.A, basis.Phi
        models.psd[d] = psd
        network, states, meta = load_model(_sae_path(out, d))
        sae = SymplecticAutoencoder(reduced_dim=d)
        sae.network_, sae.n_features_in_ = network, network.full_dim
        sae.optimizer_states_ = states
        sae.loss_history_ = list(meta.get("loss_history", []))
        models.sae[d] = sae
    return models


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _resolve_out(args, cfg)
    snaps, _ = load_snapshots(out / SNAPSHOTS)
    models = train_models(cfg, snaps, args.threads)
    for d in cfg.evaluation.reduced_dims:
        psd, sae = models.psd[d], models.sae[d]
        save_psd_basis(_psd_path(out, d), psd.basis_, {"reduced_dim": d})
        save_model(_sae_path(out, d), sae.network_, sae.optimizer_states_, {
            "reduced_dim": d, "loss_history": sae.loss_history_, "seed": cfg.seed, "epochs": cfg.training.epochs,
        })
        write_manifest(_sae_path(out, d).with_suffix(".manifest"), {
            "kind": "sae-model",
            "reduced_dim": d,
            "full_dim": sae.network_.full_dim,
            "hidden_dims": cfg.architecture.hidden_dims or "none",
            "n_gradient_pairs": cfg.architecture.n_gradient_pairs,
            "width_factor": cfg.architecture.width_factor,
            "activation": cfg.architecture.activation,
            "epochs": cfg.training.epochs,
            "seed": cfg.seed,
            "final_loss": sae.loss_history_[-1] if sae.loss_history_ else "none",
        })
        _write_csv(out / f"loss_2n{d}.csv", ["epoch", "loss"], [[i, repr(v)] for i, v in enumerate(sae.loss_history_)])
        print(f"2n={d}: PSD basis and autoencoder saved ({len(sae.loss_history_)} epochs)")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    out = _resolve_out(args, cfg)
    snaps, _ = load_snapshots(out / SNAPSHOTS)
    models = _trained_from_disk(out, cfg)
    t0 = time.perf_counter()
    report = evaluate(cfg, models, snaps, args.threads)
    atomic_write_text(out / REPORT, report.to_csv(include_timing=args.timing))
    if not args.timing:
        _write_csv(out / "timings.csv", ["method", "mu", "reduced_dim", "wall_s"],
                   [[r.method, repr(r.mu), r.reduced_dim, f"{r.wall_s:.3f}"] for r in report.records])
    print(f"{len(report.records)} error rows -> {out / REPORT} ({time.perf_counter() - t0:.1f}s)")
    return 0


def cmd_torus_demo(args) -> int:
    cfg_seed = args.seed if args.seed is not None else 0
    out = Path(args.out or os.environ.get(OUTPUT_ENV_VAR) or "runs")
    res = torus_demo(rng=cfg_seed)
    verdict = {
        "pod_zero_field": bool(res["pod_zero_field"]),
        "pod_field_max": res["pod_field_max"],
        "psd_oscillator": bool(res["psd_oscillator"]),
        "psd_field_error": res["psd_field_error"],
        "pod_alignment_e1_e4": [float(x) for x in res["pod_alignment"]],
        "psd_alignment_e1": res["psd_alignment"],
    }
    print(json.dumps(verdict, indent=2))
    for name in ("cloud_pod", "cloud_psd"):
        pts = res[name]
        _write_csv(out / f"torus_{name}.csv", ["x", "y", "z"], [[repr(float(v)) for v in row] for row in pts])
    print(f"point clouds -> {out}/torus_cloud_pod.csv, {out}/torus_cloud_psd.csv")
    return 0 if verdict["pod_zero_field"] and verdict["psd_oscillator"] else 1


def cmd_report(args) -> int:
    inputs = args.inputs
    if not inputs:
        cfg = _load(args)
        inputs = [str(_resolve_out(args, cfg) / REPORT)]
    try:
        texts = [Path(p).read_text(encoding="utf-8") for p in inputs]
    except OSError as exc:
        raise ContainerError(f"cannot read report: {exc}") from exc
    summary, long = merge_reports(texts)
    out = Path(args.out) if args.out else Path(inputs[0]).parent
    atomic_write_text(out / "summary.csv", summary)
    atomic_write_text(out / "errors_long.csv", long)
    print(summary, end="")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="YAML experiment configuration")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed (unsigned 64-bit)")
    common.add_argument("--out", type=str, default=None, help=f"output directory (else ${OUTPUT_ENV_VAR}, else the config value)")
    common.add_argument("--profile", choices=("paper", "desk"), default=None, help="default scale before the config file is applied")
    common.add_argument("--threads", type=int, default=1, help="worker threads across mu / 2n cells (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sympae", description="Symplectic autoencoders for Hamiltonian model reduction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", parents=[common], help="integrate the FOM over the training parameters")
    p.set_defaults(func=cmd_generate_data)
    p = sub.add_parser("train", parents=[common], help="fit PSD baselines and autoencoders")
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("evaluate", parents=[common], help="compute e_proj / e_red and write the error report")
    p.add_argument("--timing", action="store_true", help="fill the wall_s column (makes the report run dependent)")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("torus-demo", parents=[common], help="POD versus PSD torus diagnostic")
    p.set_defaults(func=cmd_torus_demo)
    p = sub.add_parser("report", parents=[common], help="merge error CSVs into summary tables")
    p.add_argument("inputs", nargs="*", help="error CSVs (default: the run's errors.csv)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: config: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        with threadpool_limits(1):
            return args.func(args)
    except SympaeError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: value: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
