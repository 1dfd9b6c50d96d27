"""Train the same masked-MLP stack with different objectives and compare.

The stack architecture never changes; objectives differ only in the input
masks and the loss. Run with: python demos/02_training_objectives.py
"""

import numpy as np

from causalstack import graph, metrics, nn, scm, training

rng = np.random.default_rng(1)
dag = graph.generate_er(6, density=1.0, rng=rng)
model = scm.init_scm(dag, k=8, rng=rng)
d_obs, d_int = scm.make_training_data(model, 1000, 1000, rng)
tests = [scm.sample_interventional(model, scm.Intervention(t, 2), 400, rng)
         for t in range(6)]

cfg = training.TrainConfig(lr=1e-2, iterations=600, batch_size=256)


def fresh_stack(seed):
    return nn.init_stack(6, 8, np.random.default_rng(seed))


results = {}

stack = fresh_stack(10)
training.train_pseudo_ll(stack, d_obs, cfg, np.random.default_rng(20))
results["pseudo_ll (monolithic)"] = metrics.evaluate(stack, dag, tests)

for mode in ("causal", "anticausal", "skeleton"):
    stack = fresh_stack(10)
    training.train_expert(stack, d_obs, dag, mode, cfg, np.random.default_rng(20))
    results[f"exp_{mode}"] = metrics.evaluate(stack, dag, tests)

stack = fresh_stack(10)
maml_cfg = training.TrainConfig(lr=1e-3, iterations=300, tasks_per_iteration=6)
training.train_maml(stack, d_int, maml_cfg, np.random.default_rng(20))
results["maml (monolithic)"] = metrics.evaluate(stack, dag, tests)

stack = fresh_stack(10)
lc = training.train_l_causal(
    stack, d_obs, d_int, cfg,
    training.GraphFitConfig(rounds=8, iterations=30, graphs_per_update=24,
                            batch_size=96, dist_iterations=80),
    np.random.default_rng(20))
rec = metrics.evaluate(stack, dag, tests)
rec.shd = graph.shd(lc.dag, dag)
results["l_causal (learned structure)"] = rec

zero, adapt = metrics.evaluate_bounds(model, tests)
results["bound_zero_shot (oracle)"] = zero
results["bound_adaptation (oracle)"] = adapt

print(f"{'model':32s} {'nll_mean':>9s} {'nll_parents':>12s} {'shd':>4s}")
for name, r in results.items():
    parents = "-" if r.nll_parents is None else f"{r.nll_parents:.3f}"
    shd_str = "-" if r.shd is None else str(r.shd)
    print(f"{name:32s} {r.nll_mean:9.3f} {parents:>12s} {shd_str:>4s}")

print("\nReading guide: causal masks keep nll_parents low under interventions;")
print("anticausal and monolithic predictors can rely on the intervened child")
print("and blow up exactly there.")
