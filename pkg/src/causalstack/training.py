"""Training objectives for the shared model stack.

Six ways to fit the same architecture:

* ``train_pseudo_ll``: per-module maximum likelihood with the unconstrained
  (complete minus diagonal) mask, on observational data.
* ``train_maml``: first-order meta-learning over interventional tasks; the
  outer gradient is evaluated at parameters adapted by inner SGD steps.
* ``train_expert``: maximum likelihood with a mask injected from a known
  graph (causal parents, anti-causal children, or the undirected skeleton).
* ``train_l_causal``: structure learning with a soft adjacency
  ``sigmoid(u) * sigmoid(v)``, alternating CPD fitting under sampled masks
  with mask-parameter fitting on interventional data.

The mask-fitting gradient uses a paired-contrast Monte-Carlo estimator: for
every sampled mask and every candidate edge, the target module's batch NLL is
evaluated with that bit forced on and forced off (all other bits fixed); the
averaged difference estimates the derivative of the expected NLL with respect
to the edge probability, to which the sparsity penalty is added.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .graph import Dag, is_acyclic
from .scm import Dataset

log = logging.getLogger(__name__)

EXPERT_MODES = ("causal", "anticausal", "skeleton")


@dataclass
class TrainConfig:
    lr: float = 1e-4
    weight_decay: float = 0.0
    iterations: int = 1000
    batch_size: int | None = None  # None: full batch up to 2000 samples, else 256
    inner_lr: float = 0.1
    inner_steps: int = 1
    tasks_per_iteration: int = 20

    def __post_init__(self):
        if self.lr <= 0 or self.inner_lr < 0:
            raise ValueError("learning rates must be positive (inner_lr may be 0)")
        if self.iterations < 0 or self.inner_steps < 1 or self.tasks_per_iteration < 1:
            raise ValueError("iteration counts must be positive")

    def resolve_batch_size(self, data_size: int) -> int:
        if self.batch_size is not None:
            return min(self.batch_size, data_size)
        return data_size if data_size <= 2000 else 256


@dataclass
class GraphFitConfig:
    lr_u: float = 0.005
    lr_v: float = 0.02
    iterations: int = 100
    graphs_per_update: int = 100
    lambda_sparse: float | None = None  # None resolves to 0.004 * ln(k)
    rounds: int = 30
    batch_size: int = 128
    dist_iterations: int | None = None  # per-round CPD fitting budget; None -> TrainConfig.iterations

    def resolve_lambda(self, k: int) -> float:
        return self.lambda_sparse if self.lambda_sparse is not None else 0.004 * math.log(k)


def pseudo_ll_mask(n: int) -> np.ndarray:
    """Ones everywhere except the diagonal: every other variable is a predictor."""
    if n < 2:
        raise ValueError(f"need at least 2 variables, got {n}")
    return (np.ones((n, n)) - np.eye(n)).astype(np.int8)


def expert_mask(dag: Dag, mode: str) -> np.ndarray:
    if mode == "causal":
        return dag.adj.copy()
    if mode == "anticausal":
        return dag.adj.T.copy()
    if mode == "skeleton":
        return (dag.adj | dag.adj.T).astype(np.int8)
    raise ValueError(f"unknown expert mode {mode!r}; expected one of {EXPERT_MODES}")


def _batch_stream(samples: np.ndarray, cfg: TrainConfig, rng: np.random.Generator):
    m = samples.shape[0]
    bs = cfg.resolve_batch_size(m)
    for _ in range(cfg.iterations):
        if bs >= m:
            yield samples
        else:
            yield samples[rng.choice(m, size=bs, replace=False)]


def train_on_batches(stack: nn.ModelStack, batches, cfg: TrainConfig,
                     opts: list | None = None) -> np.ndarray:
    """Shared MLE engine: one Adam step per module per batch.

    The batch is common to all modules, so module updates are mutually
    independent and order-insensitive. Returns per-iteration, per-module
    losses with shape (iterations, n).
    """
    if opts is None:
        opts = [nn.Adam(cfg.lr, weight_decay=cfg.weight_decay) for _ in range(stack.n)]
    rows = []
    for batch in batches:
        row = np.empty(stack.n)
        for i, mlp in enumerate(stack.mlps):
            grads, loss = nn.backward(mlp, batch, i)
            nn.step(mlp, grads, opts[i])
            row[i] = loss
        rows.append(row)
    return np.asarray(rows).reshape(-1, stack.n)


def train_pseudo_ll(stack: nn.ModelStack, d_obs: Dataset, cfg: TrainConfig,
                    rng: np.random.Generator) -> np.ndarray:
    """Maximum likelihood with the unconstrained mask; returns the mean loss trace."""
    if d_obs.size == 0:
        raise ValueError("observational dataset is empty")
    stack.set_masks(pseudo_ll_mask(stack.n))
    losses = train_on_batches(stack, _batch_stream(d_obs.samples, cfg, rng), cfg)
    return losses.mean(axis=1) if losses.size else np.zeros(0)


def train_expert(stack: nn.ModelStack, d_obs: Dataset, dag: Dag, mode: str,
                 cfg: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    """Maximum likelihood with a mask injected from the known graph."""
    if dag.n != stack.n:
        raise ValueError(f"graph has {dag.n} nodes, stack has {stack.n}")
    if d_obs.size == 0:
        raise ValueError("observational dataset is empty")
    stack.set_masks(expert_mask(dag, mode))
    losses = train_on_batches(stack, _batch_stream(d_obs.samples, cfg, rng), cfg)
    return losses.mean(axis=1) if losses.size else np.zeros(0)


def sample_task_splits(d_int_list: list[Dataset], cfg: TrainConfig,
                       rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Draw tasks uniformly and split each 50/50 into adaptation and evaluation halves."""
    ids = rng.integers(0, len(d_int_list), size=cfg.tasks_per_iteration)
    splits = []
    for l in ids:
        s = d_int_list[int(l)].samples
        perm = rng.permutation(s.shape[0])
        half = s.shape[0] // 2
        splits.append((s[perm[:half]], s[perm[half:]]))
    return splits


def train_maml(stack: nn.ModelStack, d_int_list: list[Dataset], cfg: TrainConfig,
               rng: np.random.Generator) -> np.ndarray:
    """First-order meta-learning on interventional tasks with the unconstrained mask.

    Per outer iteration and task: take ``inner_steps`` SGD steps at
    ``inner_lr`` on the task's adaptation half, evaluate the gradient of the
    evaluation half at the adapted parameters, then feed the task average to
    the outer Adam optimizer on the original parameters.
    """
    if not d_int_list:
        raise ValueError("need at least one interventional dataset")
    stack.set_masks(pseudo_ll_mask(stack.n))
    opts = [nn.Adam(cfg.lr, weight_decay=cfg.weight_decay) for _ in range(stack.n)]
    trace = []
    for _ in range(cfg.iterations):
        splits = sample_task_splits(d_int_list, cfg, rng)
        outer_losses = []
        for i, mlp in enumerate(stack.mlps):
            total: nn.Gradients | None = None
            for inner, outer in splits:
                adapted = mlp.copy()
                if inner.shape[0]:
                    for _ in range(cfg.inner_steps):
                        g, _ = nn.backward(adapted, inner, i)
                        nn.step(adapted, g, nn.Sgd(cfg.inner_lr))
                g_out, loss = nn.backward(adapted, outer, i)
                outer_losses.append(loss)
                if total is None:
                    total = g_out
                else:
                    total += g_out
            total /= float(len(splits))
            nn.step(mlp, total, opts[i])
        trace.append(float(np.mean(outer_losses)))
    return np.asarray(trace)


@dataclass
class SoftAdjacency:
    """Continuous relaxation of an adjacency: edge probability sigmoid(u)*sigmoid(v)."""

    u: np.ndarray
    v: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[0]

    def edge_probs(self) -> np.ndarray:
        p = _sigmoid(self.u) * _sigmoid(self.v)
        np.fill_diagonal(p, 0.0)
        return p

    def copy(self) -> "SoftAdjacency":
        return SoftAdjacency(self.u.copy(), self.v.copy())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_soft_adjacency(n: int, edge_prob: float = 0.5) -> SoftAdjacency:
    """u = v such that sigmoid(u) * sigmoid(v) equals ``edge_prob`` per entry.

    The logit is nudged down by ulps if rounding pushed the product above
    ``edge_prob``, so a freshly initialized adjacency thresholds to the empty
    graph under a strict comparison at ``edge_prob``.
    """
    r = math.sqrt(edge_prob)
    val = math.log(r / (1.0 - r))
    while float(_sigmoid(np.array([val]))[0]) ** 2 > edge_prob:
        val = math.nextafter(val, -math.inf)
    return SoftAdjacency(np.full((n, n), val), np.full((n, n), val))


def sample_masks(gamma: SoftAdjacency, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draw per off-diagonal entry; diagonal forced to 0."""
    probs = gamma.edge_probs()
    mask = (rng.random(probs.shape) < probs).astype(np.int8)
    np.fill_diagonal(mask, 0)
    return mask


class _MatrixAdam:
    """Adam on a plain ndarray parameter (used for the mask parameters u and v)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def update(self, param: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(param)
            self.v = np.zeros_like(param)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        param -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def distribution_fitting_phase(stack: nn.ModelStack, gamma: SoftAdjacency,
                               d_obs: Dataset, cfg: TrainConfig,
                               rng: np.random.Generator,
                               opts: list | None = None) -> np.ndarray:
    """One CPD-fitting phase: per iteration, a fresh mask draw then one step.

    The mask is sampled before the batch each iteration; gamma itself is
    frozen. Returns per-iteration per-module losses.
    """
    if d_obs.size == 0:
        raise ValueError("observational dataset is empty")
    if opts is None:
        opts = [nn.Adam(cfg.lr, weight_decay=cfg.weight_decay) for _ in range(stack.n)]
    samples = d_obs.samples
    m = samples.shape[0]
    bs = cfg.resolve_batch_size(m)
    rows = []
    for _ in range(cfg.iterations):
        stack.set_masks(sample_masks(gamma, rng))
        batch = samples if bs >= m else samples[rng.choice(m, size=bs, replace=False)]
        row = np.empty(stack.n)
        for i, mlp in enumerate(stack.mlps):
            grads, loss = nn.backward(mlp, batch, i)
            nn.step(mlp, grads, opts[i])
            row[i] = loss
        rows.append(row)
    return np.asarray(rows).reshape(-1, stack.n)


def _nll_per_draw(z: np.ndarray, mlp: nn.MaskedMlp,
                  targets: np.ndarray) -> np.ndarray:
    """Batch-mean NLL per mask draw from (draws, batch, hidden) pre-activations."""
    h = np.where(z > 0, z, nn.LEAKY_SLOPE * z)
    logits = h @ mlp.w2 + mlp.b2
    mx = logits.max(axis=-1, keepdims=True)
    lse = mx[..., 0] + np.log(np.exp(logits - mx).sum(axis=-1))
    picked = logits[:, np.arange(targets.shape[0]), targets]
    return (lse - picked).mean(axis=-1)


def _edge_contrasts(mlp: nn.MaskedMlp, i: int, batch: np.ndarray,
                    mask_rows: np.ndarray) -> np.ndarray:
    """Mean paired contrast NLL(bit on) - NLL(bit off) per candidate parent.

    ``mask_rows`` holds the sampled mask rows for module ``i`` with shape
    (draws, n). One side of every pair is the sampled mask itself, so only
    the toggled side is evaluated per edge; toggling bit j just adds or
    removes one row of w1 from the hidden pre-activation.
    """
    draws, n = mask_rows.shape
    m = batch.shape[0]
    hidden = mlp.hidden
    idx = np.arange(n) * mlp.k + batch  # (m, n) rows of w1 selected by each variable
    rows = mlp.w1[idx]  # (m, n, hidden)
    flat = np.ascontiguousarray(rows.transpose(1, 0, 2)).reshape(n, m * hidden)
    maskf = mask_rows.astype(np.float64)
    base = (maskf @ flat).reshape(draws, m, hidden) + mlp.b1
    targets = batch[:, i]
    base_nll = _nll_per_draw(base, mlp, targets)
    flip = 1.0 - 2.0 * maskf  # +1 toggles a clear bit on, -1 toggles a set bit off
    diffs = np.zeros(n)
    for j in range(n):
        if j == i:
            continue
        toggled = base + flip[:, j][:, None, None] * rows[:, j, :][None]
        tog_nll = _nll_per_draw(toggled, mlp, targets)
        on = np.where(maskf[:, j] == 1.0, base_nll, tog_nll)
        off = np.where(maskf[:, j] == 1.0, tog_nll, base_nll)
        diffs[j] = float(on.mean() - off.mean())
    return diffs


def graph_fitting_phase(gamma: SoftAdjacency, stack: nn.ModelStack,
                        d_int_list: list[Dataset], gf: GraphFitConfig,
                        rng: np.random.Generator,
                        opt_u: _MatrixAdam | None = None,
                        opt_v: _MatrixAdam | None = None) -> tuple[_MatrixAdam, _MatrixAdam]:
    """One mask-fitting phase: update u and v with theta frozen.

    Per iteration an interventional dataset and a batch of masks are sampled;
    the intervened variable's own module contributes no contrast on its own
    dataset (its mechanism is replaced by the intervention). Returns the
    optimizer states so alternating rounds can keep momentum.
    """
    if not d_int_list:
        raise ValueError("graph fitting requires interventional data")
    if any(ds.intervention is None for ds in d_int_list):
        raise ValueError("graph fitting expects interventional datasets only")
    n = gamma.n
    lam = gf.resolve_lambda(stack.k)
    opt_u = opt_u or _MatrixAdam(gf.lr_u)
    opt_v = opt_v or _MatrixAdam(gf.lr_v)
    for _ in range(gf.iterations):
        ds = d_int_list[int(rng.integers(len(d_int_list)))]
        samples = ds.samples
        if samples.shape[0] > gf.batch_size:
            batch = samples[rng.choice(samples.shape[0], size=gf.batch_size, replace=False)]
        else:
            batch = samples
        probs = gamma.edge_probs()
        masks = (rng.random((gf.graphs_per_update, n, n)) < probs).astype(np.int8)
        masks[:, np.arange(n), np.arange(n)] = 0
        grad_p = np.full((n, n), lam)
        target = ds.intervention.target
        for i in range(n):
            if i == target:
                continue
            grad_p[i] += _edge_contrasts(stack.mlps[i], i, batch, masks[:, i, :])
        np.fill_diagonal(grad_p, 0.0)
        su, sv = _sigmoid(gamma.u), _sigmoid(gamma.v)
        gu = grad_p * su * (1.0 - su) * sv
        gv = grad_p * su * sv * (1.0 - sv)
        np.fill_diagonal(gu, 0.0)
        np.fill_diagonal(gv, 0.0)
        opt_u.update(gamma.u, gu)
        opt_v.update(gamma.v, gv)
    return opt_u, opt_v


def extract_graph(gamma: SoftAdjacency, threshold: float = 0.5) -> Dag:
    """Edges with probability strictly above the threshold, repaired to a DAG.

    If thresholding leaves a cycle, the lowest-probability edge on a cycle is
    removed repeatedly (with a warning) until the graph is acyclic.
    """
    probs = gamma.edge_probs()
    adj = (probs > threshold).astype(np.int8)
    removed = []
    while not is_acyclic(adj):
        cycle = _find_cycle(adj)
        child, parent = min(cycle, key=lambda e: probs[e[0], e[1]])
        adj[child, parent] = 0
        removed.append((parent, child))
    if removed:
        log.warning("extract_graph removed %d edge(s) to repair cycles: %s",
                    len(removed), removed)
    return Dag(adj)


def _find_cycle(adj: np.ndarray) -> list[tuple[int, int]]:
    """Return one directed cycle as (child, parent) index pairs into adj."""
    n = adj.shape[0]
    color = [0] * n  # 0 unvisited, 1 on stack, 2 done

    def dfs(u: int, path: list[int]):
        color[u] = 1
        path.append(u)
        for w in np.nonzero(adj[:, u])[0]:  # children of u
            w = int(w)
            if color[w] == 1:
                nodes = path[path.index(w):] + [w]
                return [(nodes[s + 1], nodes[s]) for s in range(len(nodes) - 1)]
            if color[w] == 0:
                found = dfs(w, path)
                if found:
                    return found
        color[u] = 2
        path.pop()
        return None

    for s in range(n):
        if color[s] == 0:
            found = dfs(s, [])
            if found:
                return found
    raise AssertionError("no cycle found in a cyclic graph")  # pragma: no cover


@dataclass
class LCausalResult:
    stack: nn.ModelStack
    gamma: SoftAdjacency
    dag: Dag
    loss_rows: list[tuple[int, int, int, float]] = field(default_factory=list)
    gamma_history: list[np.ndarray] = field(default_factory=list)


def train_l_causal(stack: nn.ModelStack, d_obs: Dataset, d_int_list: list[Dataset],
                   cfg: TrainConfig, gf: GraphFitConfig,
                   rng: np.random.Generator) -> LCausalResult:
    """Alternate CPD fitting and mask fitting, then threshold the soft adjacency.

    The returned stack has its masks set to the extracted graph, so it scores
    each variable from its learned parents. ``loss_rows`` holds
    (round, iteration, module, loss) for the CPD-fitting iterations and
    ``gamma_history`` one edge-probability snapshot per round.
    """
    if d_obs.size == 0:
        raise ValueError("observational dataset is empty")
    if not d_int_list:
        raise ValueError("structure learning requires interventional data")
    gamma = init_soft_adjacency(stack.n)
    dist_cfg = replace(cfg, iterations=gf.dist_iterations if gf.dist_iterations is not None
                       else cfg.iterations)
    dist_opts = [nn.Adam(dist_cfg.lr, weight_decay=dist_cfg.weight_decay)
                 for _ in range(stack.n)]
    opt_u = opt_v = None
    result = LCausalResult(stack, gamma, extract_graph(gamma))
    for r in range(gf.rounds):
        losses = distribution_fitting_phase(stack, gamma, d_obs, dist_cfg, rng, dist_opts)
        for it in range(losses.shape[0]):
            for i in range(stack.n):
                result.loss_rows.append((r, it, i, float(losses[it, i])))
        opt_u, opt_v = graph_fitting_phase(gamma, stack, d_int_list, gf, rng, opt_u, opt_v)
        result.gamma_history.append(gamma.edge_probs())
    result.dag = extract_graph(gamma)
    stack.set_masks(result.dag.adj)
    return result
