"""Command-line entry points.

Subcommands mirror the library workflow: generate a graph and SCM data,
train/evaluate/adapt a single model, or run the full seeded sweeps. A config
file (JSON or YAML) can override any ExperimentConfig field; flags override
the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import adaptation, metrics, nn, scm
from .experiment import (ExperimentConfig, MODELS, cell_rng, config_from_dict,
                         run_adaptation_sweep, run_generalization_sweep, run_grid,
                         train_model)
from .graph import (PRESET_KINDS, generate_er, generate_preset,
                    load_edge_list, save_edge_list, shd)


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml

        return yaml.safe_load(text) or {}
    return json.loads(text)


def _build_experiment_config(args) -> ExperimentConfig:
    data = _load_config_file(args.config) if args.config else {}
    cfg = config_from_dict(data)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_gen_graph(args) -> int:
    if args.kind == "er":
        dag = generate_er(args.n, args.density, np.random.default_rng(args.seed))
    else:
        dag = generate_preset(args.kind, args.n)
    save_edge_list(dag, args.out)
    print(f"wrote {args.out}: {dag.n} nodes, {dag.num_edges} edges")
    return 0


def _cmd_gen_data(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    if args.scm:
        model = scm.load_scm(args.scm)
    else:
        dag = load_edge_list(args.graph)
        model = scm.init_scm(dag, args.k, rng)
    scm.save_scm(model, out_dir / "scm.npz")
    d_obs, d_int = scm.make_training_data(model, args.n_obs, args.n_int, rng)
    scm.datasets_to_csv([d_obs] + d_int, out_dir / "train.csv")
    print(f"wrote {out_dir}/scm.npz and {out_dir}/train.csv "
          f"({d_obs.size} obs, {sum(d.size for d in d_int)} interventional)")
    return 0


def _split_loaded(datasets):
    obs = [d for d in datasets if d.observational]
    ints = [d for d in datasets if not d.observational]
    if obs:
        merged = scm.Dataset(np.concatenate([d.samples for d in obs]))
    else:
        merged = scm.Dataset(np.zeros((0, datasets[0].n), dtype=np.int64))
    return merged, ints


def _cmd_train(args) -> int:
    model = scm.load_scm(args.scm)
    d_obs, d_int = _split_loaded(scm.datasets_from_csv(args.data))
    cfg = ExperimentConfig(n=model.n, k=model.k, models=(args.model,), seeds=(0,),
                           master_seed=args.seed, output_dir="")
    if args.config:
        file_cfg = config_from_dict(_load_config_file(args.config))
        cfg = replace(cfg, train=file_cfg.train, graph_fit=file_cfg.graph_fit)
    stack, extra = train_model(args.model, cfg, model.dag, d_obs, d_int,
                               cell_rng(args.seed, "init", args.model),
                               cell_rng(args.seed, "train", args.model))
    nn.save_stack(stack, args.out, optimizer_kind="adam")
    if extra is not None:
        print(f"learned structure SHD to truth: {shd(extra.dag, model.dag)}")
    print(f"wrote {args.out}")
    return 0


def _build_tests(model, count, samples, mode, rng):
    tests = []
    for _ in range(count):
        target = int(rng.integers(model.n))
        value = int(rng.integers(model.k)) if mode == "fixed" else None
        tests.append(scm.sample_interventional(
            model, scm.Intervention(target, value), samples, rng))
    return tests


def _cmd_eval(args) -> int:
    model = scm.load_scm(args.scm)
    stack, _ = nn.load_stack(args.model)
    rng = cell_rng(args.seed, "test", 0)
    tests = _build_tests(model, args.test_interventions, args.test_samples,
                         args.value_mode, rng)
    rec = metrics.evaluate(stack, model.dag, tests)
    zero_rec, adapt_rec = metrics.evaluate_bounds(model, tests)
    cfg = ExperimentConfig(n=model.n, k=model.k, models=MODELS, seeds=(0,),
                           master_seed=args.seed, output_dir="")
    from .experiment import _record_to_rows, write_rows_csv  # shared row assembly

    rows = (_record_to_rows(rec, cfg, 0, "model", "")
            + _record_to_rows(zero_rec, cfg, 0, "bound_zero_shot", "")
            + _record_to_rows(adapt_rec, cfg, 0, "bound_adaptation", ""))
    write_rows_csv(rows, args.out)
    print(f"nll_mean={rec.nll_mean:.4f} (bound zero-shot {zero_rec.nll_mean:.4f})")
    return 0


def _cmd_adapt(args) -> int:
    model = scm.load_scm(args.scm)
    stack, _ = nn.load_stack(args.model)
    rng = cell_rng(args.seed, "adapt", 0)
    value = None if args.uniform_value else (
        args.value if args.value is not None else int(rng.integers(model.k)))
    iv = scm.Intervention(args.target, value)
    d_adapt = scm.sample_interventional(model, iv, args.adapt_size, rng)
    d_test = scm.sample_interventional(model, iv, args.test_samples, rng)
    acfg = adaptation.AdaptConfig(method=args.method, steps=args.steps, lr=args.lr,
                                  temperature=args.temperature)
    _, trace = adaptation.adapt(
        stack, d_adapt, acfg, known_target=args.target,
        eval_fn=lambda work: metrics.evaluate(work, model.dag, [d_test]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "module", "grad_norm", "nll_adapt", "nll_test_mean"])
    for record in trace:
        for i in range(stack.n):
            writer.writerow([record.step, i, repr(float(record.grad_norms[i])),
                             repr(float(record.nll_adapt[i])),
                             repr(record.test_metrics.nll_mean)])
    Path(args.out).write_text(buf.getvalue())
    print(f"wrote {args.out}; test nll_mean "
          f"{trace[0].test_metrics.nll_mean:.4f} -> {trace[-1].test_metrics.nll_mean:.4f}")
    return 0


def _cmd_sweep_generalization(args) -> int:
    cfg = _build_experiment_config(args)
    csv_path, manifest = run_generalization_sweep(cfg, jobs=args.jobs)
    print(f"wrote {csv_path} and {manifest}")
    return 0


def _cmd_sweep_adaptation(args) -> int:
    cfg = _build_experiment_config(args)
    csv_path, manifest = run_adaptation_sweep(cfg, jobs=args.jobs)
    print(f"wrote {csv_path} and {manifest}")
    return 0


def _cmd_grid(args) -> int:
    cfg = _build_experiment_config(args)
    csv_path, best_path = run_grid(cfg, jobs=args.jobs)
    print(f"wrote {csv_path} and {best_path}")
    print(Path(best_path).read_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalstack",
        description="Benchmark monolithic vs. structured neural causal models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="generate a DAG and save its edge list")
    p.add_argument("--kind", choices=("er",) + PRESET_KINDS, default="er")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_graph)

    p = sub.add_parser("gen-data", help="initialize an SCM and sample training data")
    p.add_argument("--graph", help="edge-list file (ignored when --scm is given)")
    p.add_argument("--scm", help="reuse an existing SCM checkpoint")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n-obs", type=int, default=1000)
    p.add_argument("--n-int", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("train", help="train one model on generated data")
    p.add_argument("--scm", required=True)
    p.add_argument("--data", required=True, help="train.csv from gen-data")
    p.add_argument("--model", choices=[m for m in MODELS if not m.startswith("bound")],
                   required=True)
    p.add_argument("--config", help="JSON/YAML config for hyperparameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model checkpoint path (.npz)")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on fresh test interventions")
    p.add_argument("--scm", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--test-interventions", type=int, default=20)
    p.add_argument("--test-samples", type=int, default=500)
    p.add_argument("--value-mode", choices=("fixed", "uniform"), default="fixed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("adapt", help="finetune a checkpoint on one unseen intervention")
    p.add_argument("--scm", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--value", type=int)
    p.add_argument("--uniform-value", action="store_true",
                   help="draw a fresh uniform value per sample")
    p.add_argument("--adapt-size", type=int, default=10)
    p.add_argument("--test-samples", type=int, default=500)
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--method", choices=adaptation.ADAPT_METHODS, default="unconstrained")
    p.add_argument("--temperature", type=float, default=float("inf"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trace CSV path")
    p.set_defaults(fn=_cmd_adapt)

    for name, fn in (("sweep-generalization", _cmd_sweep_generalization),
                     ("sweep-adaptation", _cmd_sweep_adaptation),
                     ("grid", _cmd_grid)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON/YAML ExperimentConfig overrides")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--jobs", type=int, default=1)
        p.set_defaults(fn=fn)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # fatal errors surface as nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
