"""Seeded end-to-end orchestration: worlds, sweeps, persistence.

A sweep cell is fully determined by (master seed, cell key): every random
stream is derived by hashing the key parts into a ``numpy.random.SeedSequence``
together with the master seed, so repeated single-threaded runs produce
byte-identical result CSVs and parallel runs produce the same rows in the
same order (cells are emitted in enumeration order, not completion order).

Results are long-format CSV rows with one metric per row under the header
``graph_type,n,k,seed,model,train_samples,adapt_samples,adapt_method,step,metric,value``
plus a JSON manifest holding the resolved configuration, package version,
master seed and the true adjacency matrix per seed.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, adaptation, metrics, nn, scm, training
from .graph import Dag, generate_er, generate_preset, shd
from .training import GraphFitConfig, TrainConfig

MODELS = ("pseudo_ll", "maml", "exp_causal", "exp_anticausal", "exp_skeleton",
          "l_causal", "bound_zero_shot", "bound_adaptation")
BOUND_MODELS = ("bound_zero_shot", "bound_adaptation")
METRICS = ("nll_mean", "nll_intervention", "nll_root", "nll_parents",
           "nll_remainder", "shd", "grad_norm_intervened", "grad_norm_others",
           "error")
CSV_HEADER = ("graph_type", "n", "k", "seed", "model", "train_samples",
              "adapt_samples", "adapt_method", "step", "metric", "value")
GRAPH_KINDS = ("er", "chain", "full", "collider", "tree", "bidiag", "jungle")


@dataclass
class ExperimentConfig:
    graph: str = "er"
    density: float = 1.0  # ER graphs only
    n: int = 10
    k: int = 10
    train_sizes: tuple[int, ...] = (2000,)
    adapt_sizes: tuple[int, ...] = (10,)
    adapt_steps: int = 3
    adapt_methods: tuple[str, ...] = ("unconstrained",)
    models: tuple[str, ...] = ("pseudo_ll", "exp_causal", "bound_zero_shot")
    seeds: tuple[int, ...] = tuple(range(10))
    master_seed: int = 0
    test_interventions: int = 20
    test_samples: int = 500
    test_value_mode: str = "fixed"  # "fixed" or "uniform"
    train: TrainConfig = field(default_factory=TrainConfig)
    graph_fit: GraphFitConfig = field(default_factory=GraphFitConfig)
    adapt_lr: float = 0.1
    grid_lrs: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    grid_weight_decays: tuple[float, ...] = (1e-2, 1e-3, 0.0)
    output_dir: str = "results"

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not self.models:
            raise ValueError("need at least one model")
        for m in self.models:
            if m not in MODELS:
                raise ValueError(f"unknown model {m!r}; expected subset of {MODELS}")
        if self.graph not in GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {self.graph!r}")
        if self.test_value_mode not in ("fixed", "uniform"):
            raise ValueError("test_value_mode must be 'fixed' or 'uniform'")
        if min(self.train_sizes, default=1) < 1 or min(self.adapt_sizes, default=1) < 1:
            raise ValueError("sizes must be positive")

    @property
    def graph_label(self) -> str:
        if self.graph == "er":
            d = self.density
            return f"er{d:g}"
        return self.graph


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    if "train" in data and isinstance(data["train"], dict):
        data["train"] = TrainConfig(**data["train"])
    if "graph_fit" in data and isinstance(data["graph_fit"], dict):
        data["graph_fit"] = GraphFitConfig(**data["graph_fit"])
    for name in ("train_sizes", "adapt_sizes", "adapt_methods", "models", "seeds",
                 "grid_lrs", "grid_weight_decays"):
        if name in data and isinstance(data[name], list):
            data[name] = tuple(data[name])
    return ExperimentConfig(**data)


def cell_rng(master_seed: int, *key_parts) -> np.random.Generator:
    """Independent stream for one cell: sha256 of the key feeds a SeedSequence."""
    digest = hashlib.sha256("/".join(str(p) for p in key_parts).encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(master_seed)] + words))


@dataclass
class ResultRow:
    graph_type: str
    n: int
    k: int
    seed: int
    model: str
    train_samples: object  # int or "" when not applicable
    adapt_samples: object
    adapt_method: str
    step: object
    metric: str
    value: float

    def as_csv(self) -> list[str]:
        return [self.graph_type, str(self.n), str(self.k), str(self.seed),
                self.model, str(self.train_samples), str(self.adapt_samples),
                self.adapt_method, str(self.step), self.metric, repr(self.value)]


def build_graph(cfg: ExperimentConfig, seed: int) -> Dag:
    if cfg.graph == "er":
        return generate_er(cfg.n, cfg.density, cell_rng(cfg.master_seed, "graph", seed))
    return generate_preset(cfg.graph, cfg.n)


def build_world(cfg: ExperimentConfig, seed: int):
    """Graph, ground-truth SCM and the fixed held-out test suite for one seed."""
    dag = build_graph(cfg, seed)
    model = scm.init_scm(dag, cfg.k, cell_rng(cfg.master_seed, "scm", seed))
    test_rng = cell_rng(cfg.master_seed, "test", seed)
    tests = []
    for _ in range(cfg.test_interventions):
        target = int(test_rng.integers(cfg.n))
        value = int(test_rng.integers(cfg.k)) if cfg.test_value_mode == "fixed" else None
        tests.append(scm.sample_interventional(
            model, scm.Intervention(target, value), cfg.test_samples, test_rng))
    return dag, model, tests


def _record_to_rows(rec: metrics.EvalRecord, cfg: ExperimentConfig, seed: int,
                    model_name: str, train_samples, adapt_samples="",
                    adapt_method="", step="") -> list[ResultRow]:
    return [
        ResultRow(cfg.graph_label, cfg.n, cfg.k, seed, model_name, train_samples,
                  adapt_samples, adapt_method, step, metric, value)
        for metric, value in rec.metric_items()
    ]


def _error_row(cfg: ExperimentConfig, seed: int, model_name: str, train_samples,
               adapt_samples="", adapt_method="", step="") -> ResultRow:
    return ResultRow(cfg.graph_label, cfg.n, cfg.k, seed, model_name, train_samples,
                     adapt_samples, adapt_method, step, "error", math.nan)


def train_model(name: str, cfg: ExperimentConfig, dag: Dag, d_obs: scm.Dataset,
                d_int: list[scm.Dataset], init_rng: np.random.Generator,
                train_rng: np.random.Generator):
    """Train one named model; returns (stack, l_causal result or None)."""
    stack = nn.init_stack(cfg.n, cfg.k, init_rng)
    if name == "pseudo_ll":
        training.train_pseudo_ll(stack, d_obs, cfg.train, train_rng)
        return stack, None
    if name == "maml":
        training.train_maml(stack, d_int, cfg.train, train_rng)
        return stack, None
    if name in ("exp_causal", "exp_anticausal", "exp_skeleton"):
        mode = name.removeprefix("exp_")
        training.train_expert(stack, d_obs, dag, mode, cfg.train, train_rng)
        return stack, None
    if name == "l_causal":
        result = training.train_l_causal(stack, d_obs, d_int, cfg.train,
                                         cfg.graph_fit, train_rng)
        return stack, result
    raise ValueError(f"unknown trainable model {name!r}")


def _write_l_causal_artifacts(result: training.LCausalResult, out_dir: Path,
                              tag: str) -> None:
    """Per-round loss trace CSV and gamma snapshots, per the training interfaces."""
    target = out_dir / "l_causal" / tag
    target.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "iteration", "module", "loss"])
    for row in result.loss_rows:
        writer.writerow([row[0], row[1], row[2], repr(row[3])])
    (target / "losses.csv").write_text(buf.getvalue())
    payload = {"rounds": [p.tolist() for p in result.gamma_history],
               "final": result.gamma.edge_probs().tolist()}
    (target / "gamma.json").write_text(json.dumps(payload, indent=1))


def _generalization_cell(cfg: ExperimentConfig, seed: int):
    dag, model, tests = build_world(cfg, seed)
    rows: list[ResultRow] = []
    zero_rec, adapt_rec = metrics.evaluate_bounds(model, tests)
    if "bound_zero_shot" in cfg.models:
        rows += _record_to_rows(zero_rec, cfg, seed, "bound_zero_shot", "")
    if "bound_adaptation" in cfg.models:
        rows += _record_to_rows(adapt_rec, cfg, seed, "bound_adaptation", "")
    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    for t_size in cfg.train_sizes:
        data_rng = cell_rng(cfg.master_seed, "data", seed, t_size)
        # train size T means T observational plus T interventional samples
        d_obs, d_int = scm.make_training_data(model, t_size, t_size, data_rng)
        for name in cfg.models:
            if name in BOUND_MODELS:
                continue
            try:
                stack, extra = train_model(
                    name, cfg, dag, d_obs, d_int,
                    cell_rng(cfg.master_seed, "init", seed, t_size, name),
                    cell_rng(cfg.master_seed, "train", seed, t_size, name))
                rec = metrics.evaluate(stack, dag, tests)
                if extra is not None:
                    rec.shd = shd(extra.dag, dag)
                    if out_dir is not None:
                        _write_l_causal_artifacts(extra, out_dir,
                                                  f"seed{seed}_train{t_size}")
                rows += _record_to_rows(rec, cfg, seed, name, t_size)
            except Exception:
                rows.append(_error_row(cfg, seed, name, t_size))
    return rows, dag.adj.tolist()


def _mean_records(records: list[metrics.EvalRecord]) -> metrics.EvalRecord:
    """Average metric-wise over trials; a metric counts where it is defined."""

    def agg(name):
        vals = [getattr(r, name) for r in records if getattr(r, name) is not None]
        return float(np.mean(vals)) if vals else None

    return metrics.EvalRecord(
        nll_mean=agg("nll_mean"), nll_intervention=agg("nll_intervention"),
        nll_root=agg("nll_root"), nll_parents=agg("nll_parents"),
        nll_remainder=agg("nll_remainder"), shd=None,
        grad_norm_intervened=agg("grad_norm_intervened"),
        grad_norm_others=agg("grad_norm_others"))


def _adaptation_cell(cfg: ExperimentConfig, seed: int):
    dag, model, tests = build_world(cfg, seed)
    rows: list[ResultRow] = []
    zero_rec, adapt_rec = metrics.evaluate_bounds(model, tests)
    if "bound_zero_shot" in cfg.models:
        rows += _record_to_rows(zero_rec, cfg, seed, "bound_zero_shot", "")
    if "bound_adaptation" in cfg.models:
        rows += _record_to_rows(adapt_rec, cfg, seed, "bound_adaptation", "")
    t_size = cfg.train_sizes[0]
    data_rng = cell_rng(cfg.master_seed, "data", seed, t_size)
    d_obs, d_int = scm.make_training_data(model, t_size, t_size, data_rng)
    # fresh unseen interventions from a dedicated stream, one per trial
    trial_rng = cell_rng(cfg.master_seed, "adapt-data", seed)
    trials = []
    for _ in range(cfg.test_interventions):
        target = int(trial_rng.integers(cfg.n))
        value = int(trial_rng.integers(cfg.k)) if cfg.test_value_mode == "fixed" else None
        iv = scm.Intervention(target, value)
        d_test = scm.sample_interventional(model, iv, cfg.test_samples, trial_rng)
        adapt_pools = {size: scm.sample_interventional(model, iv, size, trial_rng)
                       for size in cfg.adapt_sizes}
        trials.append((iv, adapt_pools, d_test))

    for name in cfg.models:
        if name in BOUND_MODELS:
            continue
        try:
            stack, _ = train_model(
                name, cfg, dag, d_obs, d_int,
                cell_rng(cfg.master_seed, "init", seed, t_size, name),
                cell_rng(cfg.master_seed, "train", seed, t_size, name))
        except Exception:
            rows.append(_error_row(cfg, seed, name, t_size))
            continue
        for size in cfg.adapt_sizes:
            for method in cfg.adapt_methods:
                try:
                    per_step: list[list[metrics.EvalRecord]] = [
                        [] for _ in range(cfg.adapt_steps + 1)]
                    for iv, adapt_pools, d_test in trials:
                        d_adapt = adapt_pools[size]
                        acfg = adaptation.AdaptConfig(
                            method=method, steps=cfg.adapt_steps, lr=cfg.adapt_lr)
                        _, trace = adaptation.adapt(
                            stack, d_adapt, acfg, known_target=iv.target,
                            eval_fn=lambda work: metrics.evaluate(work, dag, [d_test]))
                        probe = adaptation.parameter_space_probe(stack, d_adapt,
                                                                 iv.target)
                        for rec_step, record in enumerate(trace):
                            ev = record.test_metrics
                            if rec_step == 0:
                                ev = replace(
                                    ev, grad_norm_intervened=probe.grad_norm_intervened,
                                    grad_norm_others=probe.grad_norm_others_mean)
                            per_step[rec_step].append(ev)
                    for step_idx, recs in enumerate(per_step):
                        rows += _record_to_rows(_mean_records(recs), cfg, seed, name,
                                                t_size, size, method, step_idx)
                except Exception:
                    rows.append(_error_row(cfg, seed, name, t_size, size, method))
    return rows, dag.adj.tolist()


def _run_cells(cfg: ExperimentConfig, cell_fn, jobs: int):
    if jobs <= 1:
        outcomes = [cell_fn(cfg, seed) for seed in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(cell_fn, cfg, seed) for seed in cfg.seeds]
            outcomes = [f.result() for f in futures]  # submission order
    rows = [row for cell_rows, _ in outcomes for row in cell_rows]
    graphs = {str(seed): adj for seed, (_, adj) in zip(cfg.seeds, outcomes)}
    return rows, graphs


def run_generalization_sweep(cfg: ExperimentConfig, jobs: int = 1):
    """Zero-shot generalization over (seed, train size, model)."""
    rows, graphs = _run_cells(cfg, _generalization_cell, jobs)
    return emit_results(rows, cfg.output_dir, cfg, name="generalization",
                        graphs=graphs)


def run_adaptation_sweep(cfg: ExperimentConfig, jobs: int = 1):
    """Few-shot adaptation traces over (seed, model, adaptation size, method)."""
    rows, graphs = _run_cells(cfg, _adaptation_cell, jobs)
    return emit_results(rows, cfg.output_dir, cfg, name="adaptation", graphs=graphs)


def run_grid(cfg: ExperimentConfig, jobs: int = 1):
    """Hyperparameter grid over (lr, weight decay); reports the best cell per model.

    Writes grid_results.csv with one nll_mean row per (model, lr, wd) and
    grid_best.json mapping each model to its winning hyperparameters.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scores: dict[tuple[str, float, float], list[float]] = {}
    for lr in cfg.grid_lrs:
        for wd in cfg.grid_weight_decays:
            sub = replace(cfg, train=replace(cfg.train, lr=lr, weight_decay=wd),
                          output_dir="")
            rows, _ = _run_cells(sub, _generalization_cell, jobs)
            for row in rows:
                if row.metric == "nll_mean" and row.model not in BOUND_MODELS:
                    scores.setdefault((row.model, lr, wd), []).append(row.value)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "lr", "weight_decay", "nll_mean"])
    best: dict[str, dict] = {}
    for (model_name, lr, wd), vals in sorted(scores.items()):
        mean = float(np.mean(vals))
        writer.writerow([model_name, repr(lr), repr(wd), repr(mean)])
        if model_name not in best or mean < best[model_name]["nll_mean"]:
            best[model_name] = {"lr": lr, "weight_decay": wd, "nll_mean": mean}
    csv_path = out_dir / "grid_results.csv"
    csv_path.write_text(buf.getvalue())
    best_path = out_dir / "grid_best.json"
    best_path.write_text(json.dumps(best, indent=1, sort_keys=True))
    return csv_path, best_path


def write_rows_csv(rows: list[ResultRow], path) -> Path:
    """Write rows under the canonical header; rejects unknown metric names."""
    if not rows:
        raise ValueError("no rows to emit")
    for row in rows:
        if row.metric not in METRICS:
            raise ValueError(f"unknown metric {row.metric!r}; expected one of {METRICS}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def emit_results(rows: list[ResultRow], output_dir, cfg: ExperimentConfig,
                 name: str = "results", graphs: dict | None = None):
    """Long-format CSV plus a JSON manifest."""
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_rows_csv(rows, out_dir / f"{name}_results.csv")
    manifest = {
        "version": __version__,
        "master_seed": cfg.master_seed,
        "seeds": list(cfg.seeds),
        "config": config_to_dict(cfg),
        "graphs": graphs or {},
    }
    manifest_path = out_dir / f"{name}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return csv_path, manifest_path
