"""Ground-truth structural causal model over discrete variables.

Each node's conditional distribution is a randomly initialized one-hidden-layer
network (hidden width 48, LeakyReLU 0.1) on the one-hot encoding of its
parents; weights are orthogonally initialized within [-2.5, 2.5] and biases
uniformly within [-1.1, 1.1]. Samples are drawn ancestrally along a
topological order; point interventions replace a single node's mechanism.

The CPD forward pass here is written independently of :mod:`causalstack.nn`
so the two can cross-check each other.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Dag, topological_order

SCM_HIDDEN = 48
LEAKY_SLOPE = 0.1
WEIGHT_SCALE = 2.5
BIAS_RANGE = 1.1
SCM_VERSION = 1


@dataclass(frozen=True)
class Intervention:
    """Point intervention on one node.

    ``value is None`` means target-only mode: a fresh value is drawn uniformly
    over the K categories for every sample.
    """

    target: int
    value: int | None = None


@dataclass
class Dataset:
    """Batch of categorical samples, tagged observational or interventional."""

    samples: np.ndarray  # (m, n) integer categories
    intervention: Intervention | None = None

    @property
    def observational(self) -> bool:
        return self.intervention is None

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]


@dataclass
class GroundTruthScm:
    """Per-node CPD parameters stacked along the first axis."""

    dag: Dag
    k: int
    w1: np.ndarray  # (n, n*k, hidden)
    b1: np.ndarray  # (n, hidden)
    w2: np.ndarray  # (n, hidden, k)
    b2: np.ndarray  # (n, k)

    @property
    def n(self) -> int:
        return self.dag.n


def _orthogonal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Random matrix with orthonormal columns (or rows when rows < cols)."""
    big, small = max(rows, cols), min(rows, cols)
    a = rng.standard_normal((big, small))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diagonal(r))  # fix signs so the draw is unique
    if rows < cols:
        q = q.T
    return q


def init_scm(dag: Dag, k: int, rng: np.random.Generator,
             hidden: int = SCM_HIDDEN) -> GroundTruthScm:
    if k < 2:
        raise ValueError(f"need at least 2 categories, got {k}")
    n = dag.n
    w1 = np.zeros((n, n * k, hidden))
    b1 = np.zeros((n, hidden))
    w2 = np.zeros((n, hidden, k))
    b2 = np.zeros((n, k))
    for i in range(n):
        w1[i] = WEIGHT_SCALE * _orthogonal(n * k, hidden, rng)
        b1[i] = rng.uniform(-BIAS_RANGE, BIAS_RANGE, size=hidden)
        w2[i] = WEIGHT_SCALE * _orthogonal(hidden, k, rng)
        b2[i] = rng.uniform(-BIAS_RANGE, BIAS_RANGE, size=k)
        # non-parent inputs are permanently masked: zero their K-blocks
        for j in range(n):
            if dag.adj[i, j] == 0:
                w1[i, j * k:(j + 1) * k] = 0.0
    return GroundTruthScm(dag, k, w1, b1, w2, b2)


def _node_logits(scm: GroundTruthScm, i: int, x: np.ndarray) -> np.ndarray:
    """(m, k) logits for node ``i``; reads only the parent coordinates of ``x``."""
    pa = np.nonzero(scm.dag.adj[i])[0]
    z1 = np.tile(scm.b1[i], (x.shape[0], 1))
    if pa.size:
        idx = pa * scm.k + x[:, pa]  # (m, |pa|) rows of w1 selected by one-hot
        z1 = z1 + scm.w1[i][idx].sum(axis=1)
    h = np.where(z1 > 0, z1, LEAKY_SLOPE * z1)
    return h @ scm.w2[i] + scm.b2[i]


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cpd(scm: GroundTruthScm, i: int, assignment: np.ndarray) -> np.ndarray:
    """Probability vector over K for node ``i`` given a (partial) assignment.

    Only the parent coordinates are read, so entries for unassigned
    non-parents may hold anything.
    """
    if not 0 <= i < scm.n:
        raise ValueError(f"node index {i} out of range for {scm.n} nodes")
    x = np.asarray(assignment)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    probs = np.exp(_log_softmax(_node_logits(scm, i, x)))
    return probs[0] if single else probs


def log_cpd(scm: GroundTruthScm, i: int, assignment: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(assignment))
    return _log_softmax(_node_logits(scm, i, x))


def _categorical_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0  # absorb float rounding in the last bin
    u = rng.random(probs.shape[0])
    return (cdf < u[:, None]).sum(axis=1)


def _ancestral(scm: GroundTruthScm, count: int,
               rng: np.random.Generator,
               fixed: dict[int, np.ndarray] | None = None) -> np.ndarray:
    x = np.zeros((count, scm.n), dtype=np.int64)
    fixed = fixed or {}
    for i in topological_order(scm.dag):
        if i in fixed:
            x[:, i] = fixed[i]
            continue
        probs = np.exp(_log_softmax(_node_logits(scm, i, x)))
        x[:, i] = _categorical_rows(probs, rng)
    return x


def sample_observational(scm: GroundTruthScm, count: int,
                         rng: np.random.Generator) -> Dataset:
    """Ancestral sampling along the topological order of the true graph."""
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    return Dataset(_ancestral(scm, count, rng))


def sample_interventional(scm: GroundTruthScm, intervention, count: int,
                          rng: np.random.Generator) -> Dataset:
    """Ancestral sampling with the target's mechanism replaced.

    ``intervention`` is an :class:`Intervention` or a bare target index
    (value drawn uniformly per sample). Descendants are sampled from their
    unmodified mechanisms given the intervened value.
    """
    if isinstance(intervention, (int, np.integer)):
        intervention = Intervention(int(intervention), None)
    t, v = intervention.target, intervention.value
    if not 0 <= t < scm.n:
        raise ValueError(f"intervention target {t} out of range")
    if v is not None and not 0 <= v < scm.k:
        raise ValueError(f"intervention value {v} out of range for k={scm.k}")
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    values = rng.integers(0, scm.k, size=count) if v is None else np.full(count, v, dtype=np.int64)
    samples = _ancestral(scm, count, rng, fixed={t: values})
    return Dataset(samples, intervention)


def make_training_data(scm: GroundTruthScm, n_obs: int, n_int: int,
                       rng: np.random.Generator) -> tuple[Dataset, list[Dataset]]:
    """Observational set plus per-target interventional sets.

    The ``n_int`` interventional samples are split as evenly as possible over
    targets cycling 0..n-1; each target's dataset fixes one uniformly drawn
    value.
    """
    if n_obs < 0 or n_int < 0:
        raise ValueError("sample counts must be nonnegative")
    obs = (sample_observational(scm, n_obs, rng) if n_obs
           else Dataset(np.zeros((0, scm.n), dtype=np.int64)))
    base, rem = divmod(n_int, scm.n)
    int_sets: list[Dataset] = []
    for t in range(scm.n):
        size = base + (1 if t < rem else 0)
        if size == 0:
            continue
        value = int(rng.integers(0, scm.k))
        int_sets.append(sample_interventional(scm, Intervention(t, value), size, rng))
    return obs, int_sets


def bound_zero_shot(scm: GroundTruthScm, test: Dataset) -> np.ndarray:
    """Per-variable NLL of the unmodified ground-truth mechanisms on ``test``.

    This is the best any causal model can do without adapting: the intervened
    variable is still scored by its pre-intervention mechanism.
    """
    x = test.samples
    out = np.zeros(scm.n)
    for i in range(scm.n):
        logp = log_cpd(scm, i, x)
        out[i] = float(-logp[np.arange(x.shape[0]), x[:, i]].mean())
    return out


def bound_adaptation(scm: GroundTruthScm, test: Dataset) -> np.ndarray:
    """Like :func:`bound_zero_shot` with the intervened mechanism replaced.

    A fixed-value intervention becomes a point mass (NLL 0); target-only mode
    becomes the uniform distribution (NLL log K).
    """
    if test.intervention is None:
        raise ValueError("bound_adaptation needs an interventional dataset")
    out = bound_zero_shot(scm, test)
    t = test.intervention.target
    out[t] = 0.0 if test.intervention.value is not None else float(np.log(scm.k))
    return out


def save_scm(scm: GroundTruthScm, path) -> None:
    np.savez(path, version=np.int64(SCM_VERSION), adj=scm.dag.adj,
             k=np.int64(scm.k), w1=scm.w1, b1=scm.b1, w2=scm.w2, b2=scm.b2)


def load_scm(path) -> GroundTruthScm:
    with np.load(Path(path), allow_pickle=False) as blob:
        if int(blob["version"]) != SCM_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(blob['version'])}")
        return GroundTruthScm(Dag(blob["adj"]), int(blob["k"]),
                              blob["w1"].copy(), blob["b1"].copy(),
                              blob["w2"].copy(), blob["b2"].copy())


def datasets_to_csv(datasets: list[Dataset], path) -> None:
    """Header ``regime,target,value,x0,...``; target/value empty when absent."""
    n = datasets[0].n if datasets else 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["regime", "target", "value"] + [f"x{i}" for i in range(n)])
    for ds in datasets:
        if ds.observational:
            regime, target, value = "observational", "", ""
        else:
            regime = "interventional"
            target = str(ds.intervention.target)
            value = "" if ds.intervention.value is None else str(ds.intervention.value)
        for row in ds.samples:
            writer.writerow([regime, target, value] + [str(int(v)) for v in row])
    Path(path).write_text(buf.getvalue())


def datasets_from_csv(path) -> list[Dataset]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = len(header) - 3
        groups: dict[tuple, list[list[int]]] = {}
        order: list[tuple] = []
        for row in reader:
            key = (row[0], row[1], row[2])
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append([int(v) for v in row[3:]])
    out = []
    for regime, target, value in order:
        samples = np.asarray(groups[(regime, target, value)], dtype=np.int64).reshape(-1, n)
        if regime == "observational":
            out.append(Dataset(samples))
        else:
            iv = Intervention(int(target), int(value) if value != "" else None)
            out.append(Dataset(samples, iv))
    return out
