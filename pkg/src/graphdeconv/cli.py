"""Command-line interface.

Subcommands: generate, train, eval, baseline, sizegen, ablate, gradcheck.
Each takes ``--config`` (a JSON file mirroring ExperimentConfig), ``--seed``
(overrides the config seed), and ``--out`` (output directory).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, gdn, io, training
from .experiments import ExperimentConfig


def _load_config(path: str | None, seed: int | None) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
    else:
        cfg = ExperimentConfig.from_dict(json.loads(Path(path).read_text()))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _out_dir(args)
    from .datasets import build_dataset

    ds = build_dataset(cfg.dataset_config(), seed=experiments.derive_seed(cfg.seed, 101, 0))
    path = out / "dataset.gdp"
    io.write_dataset(ds, path)
    io.write_json(out / "dataset_meta.json", ds.meta)
    print(f"wrote {ds.sample_count} samples (n={ds.n}) to {path}")
    return 0


def _load_or_build_dataset(cfg: ExperimentConfig, dataset_path: str | None):
    if dataset_path:
        return io.read_dataset(dataset_path)
    from .datasets import build_dataset

    return build_dataset(cfg.dataset_config(), seed=experiments.derive_seed(cfg.seed, 101, 0))


def cmd_train(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _out_dir(args)
    ds = _load_or_build_dataset(cfg, args.dataset)
    variant = args.variant
    arch = cfg.arch(variant)
    tconf = cfg.train_config(experiments.derive_seed(cfg.seed, 202, 0,
                                                     experiments._METHOD_IDS[variant]))
    result = training.train(ds, arch, tconf)
    io.write_checkpoint(out / "model.ckpt", arch, result.params,
                        threshold=result.threshold,
                        normalization={"label_scale": ds.meta.get("label_scale", 1.0)})
    training.write_history_csv(result.history, out / "history.csv")
    print(f"trained {variant}: best validation metric {result.best_val:.6f}, "
          f"threshold {result.threshold:.6f}")
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args)
    ckpt = io.read_checkpoint(args.checkpoint)
    ds = io.read_dataset(args.dataset)
    obs, labels = ds.subset(args.split)
    scores = training._predict_batch(ckpt.params, obs)
    report = training.make_report("gdn", args.task, scores, labels, ckpt.threshold)
    io.write_json(out / "eval.json", report.to_dict())
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_baseline(args) -> int:
    cfg = _load_config(args.config, args.seed)
    methods = tuple(args.method.split(",")) if args.method != "all" else \
        experiments.BASELINE_METHODS
    cfg = replace(cfg, methods=methods)
    out = _out_dir(args)
    table = experiments.run_benchmark(cfg)
    io.write_json(out / "baselines.json", table.to_dict())
    table.write_csv(out / "baselines.csv")
    for row in table.rows:
        print(f"{row.method:10s} error={row.error:.4f} mse={row.mse:.6f}")
    return 0


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _out_dir(args)
    table = experiments.run_benchmark(cfg)
    io.write_json(out / "benchmark.json", table.to_dict())
    table.write_csv(out / "benchmark.csv")
    for row in table.rows:
        print(f"{row.method:10s} error={row.error:.4f} +- {row.error_se:.4f} "
              f"mse={row.mse:.6f}")
    return 0


def cmd_sizegen(args) -> int:
    cfg = _load_config(args.config, args.seed)
    if args.sizes:
        cfg = replace(cfg, test_sizes=tuple(int(s) for s in args.sizes.split(",")))
    out = _out_dir(args)
    result = experiments.run_size_generalization(cfg, variant=args.variant)
    io.write_json(out / "sizegen.json", result.to_dict())
    result.write_csv(out / "sizegen.csv")
    for size in sorted(result.reports):
        print(f"n={size:5d} error={result.reports[size]['error']:.4f}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config, args.seed)
    out = _out_dir(args)
    if args.kind == "prior":
        reports = experiments.run_prior_ablation(cfg)
        io.write_json(out / "prior_ablation.json", reports)
        for mode, rep in reports.items():
            print(f"prior={mode:8s} error={rep['error']:.4f}")
    else:
        cfg = replace(cfg, methods=("gdn", "gdn_k0"))
        table = experiments.run_benchmark(cfg)
        io.write_json(out / "k0_ablation.json", table.to_dict())
        for row in table.rows:
            print(f"{row.method:8s} error={row.error:.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    arch = gdn.GdnArch(depth=3, channels=2, prior_mode="learned")
    n = 8
    worst = None
    for _ in range(20):
        params = gdn.init_params(arch, rng, n=n)
        a_o = rng.random((n, n))
        a_o = 0.5 * (a_o + a_o.T)
        np.fill_diagonal(a_o, 0.0)
        d_pred = rng.standard_normal((n, n))
        d_pred = 0.5 * (d_pred + d_pred.T)
        pred, _ = gdn.forward(a_o, params)
        if not np.any(pred):
            continue  # dead draw: zero gradients agree vacuously
        worst = gdn.gradient_check(params, a_o, d_pred)
        break
    if worst is None:
        print("no live parameter draw found")
        return 1
    print(f"max relative gradient error: {worst:.3e}")
    return 0 if worst < 1e-5 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="graphdeconv",
        description="Latent-graph recovery from convolutional mixtures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("generate", help="synthesize and store a dataset")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model and store a checkpoint")
    common(p)
    p.add_argument("--dataset", help="existing dataset file (else synthesized)")
    p.add_argument("--variant", default="gdn", choices=experiments.GDN_VARIANTS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--task", default="link")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="run classical baselines")
    common(p)
    p.add_argument("--method", default="all",
                   help="comma-separated subset of threshold,nd,glasso,lsopt")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("benchmark", help="full model-vs-baseline table")
    common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sizegen", help="size-generalization curve")
    common(p)
    p.add_argument("--sizes", help="comma-separated test sizes")
    p.add_argument("--variant", default="gdn_s", choices=experiments.GDN_VARIANTS)
    p.set_defaults(func=cmd_sizegen)

    p = sub.add_parser("ablate", help="prior or truncation ablation")
    common(p)
    p.add_argument("--kind", default="prior", choices=("prior", "k0"))
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
