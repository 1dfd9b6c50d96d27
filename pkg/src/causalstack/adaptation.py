"""Few-shot adaptation of a trained stack to one interventional distribution.

Three flavours, all plain SGD on the adaptation batch:

* unconstrained: every module takes full steps;
* sparse: only the affected module is updated (its index either known or
  predicted as the argmax of the per-module NLL scores);
* regularized: per-module step scales derived from a temperature softmax
  over the scores, so badly fitting modules adapt more.

The regularized scales are ``n * softmax(s / t)`` for finite positive
temperatures. The limits are special-cased to make them literal identities:
``t = 0`` uses scale 1 on the predicted module (sparse adaptation) and
``t = inf`` uses scale 1 everywhere (unconstrained adaptation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .scm import Dataset

ADAPT_METHODS = ("unconstrained", "sparse_known", "sparse_predicted", "regularized")


@dataclass
class AdaptConfig:
    method: str = "unconstrained"
    steps: int = 1
    lr: float = 0.1
    temperature: float = math.inf  # regularized only

    def __post_init__(self):
        if self.method not in ADAPT_METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {ADAPT_METHODS}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")


@dataclass
class AdaptStepRecord:
    """State before applying step ``step + 1`` (the final record is post-training)."""

    step: int
    grad_norms: np.ndarray  # (n,)
    nll_adapt: np.ndarray  # (n,) per-module mean NLL on the adaptation data
    test_metrics: object = None  # whatever eval_fn returned, if given


def module_scores(stack: nn.ModelStack, d_adapt: Dataset) -> np.ndarray:
    """Per-module mean NLL on the adaptation data (the fit scores s_i)."""
    if d_adapt.size == 0:
        raise ValueError("adaptation dataset is empty")
    return np.array([nn.nll(mlp, d_adapt.samples, i) for i, mlp in enumerate(stack.mlps)])


def predict_intervention_target(scores: np.ndarray) -> int:
    """Index of the worst-fitting module; ties broken by lowest index."""
    return int(np.argmax(scores))


def adaptation_weights(scores: np.ndarray, t: float) -> np.ndarray:
    """Temperature softmax over the scores; sums to 1.

    t = 0 returns the one-hot argmax vector, t = inf the uniform vector.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if t < 0:
        raise ValueError("temperature must be nonnegative")
    n = scores.shape[0]
    if t == 0:
        w = np.zeros(n)
        w[predict_intervention_target(scores)] = 1.0
        return w
    if math.isinf(t):
        return np.full(n, 1.0 / n)
    z = scores / t
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def _step_scales(stack_n: int, cfg: AdaptConfig, scores: np.ndarray | None,
                 known_target: int | None) -> np.ndarray:
    if cfg.method == "unconstrained":
        return np.ones(stack_n)
    if cfg.method == "sparse_known":
        if known_target is None:
            raise ValueError("sparse_known requires known_target")
        scales = np.zeros(stack_n)
        scales[known_target] = 1.0
        return scales
    if cfg.method == "sparse_predicted":
        scales = np.zeros(stack_n)
        scales[predict_intervention_target(scores)] = 1.0
        return scales
    # regularized: limits special-cased so they coincide bitwise with the
    # sparse and unconstrained code paths
    if cfg.temperature == 0:
        scales = np.zeros(stack_n)
        scales[predict_intervention_target(scores)] = 1.0
        return scales
    if math.isinf(cfg.temperature):
        return np.ones(stack_n)
    return stack_n * adaptation_weights(scores, cfg.temperature)


def adapt(stack: nn.ModelStack, d_adapt: Dataset, cfg: AdaptConfig,
          known_target: int | None = None,
          eval_fn=None) -> tuple[nn.ModelStack, list[AdaptStepRecord]]:
    """Run ``cfg.steps`` SGD steps on a copy of the stack.

    Scores (and therefore step scales) are computed once, before any update.
    The trace has ``steps + 1`` records: record 0 is the zero-shot state and
    each later record the state after that many steps; gradient norms are
    those evaluated at the recorded state.
    """
    if d_adapt.size == 0:
        raise ValueError("adaptation dataset is empty")
    work = stack.copy()
    scores = None
    if cfg.method in ("sparse_predicted", "regularized"):
        scores = module_scores(work, d_adapt)
    scales = _step_scales(work.n, cfg, scores, known_target)
    opt = nn.Sgd(cfg.lr)
    trace: list[AdaptStepRecord] = []
    for s in range(cfg.steps + 1):
        grads = []
        norms = np.empty(work.n)
        nlls = np.empty(work.n)
        for i, mlp in enumerate(work.mlps):
            g, loss = nn.backward(mlp, d_adapt.samples, i)
            grads.append(g)
            norms[i] = nn.grad_norm(g)
            nlls[i] = loss
        trace.append(AdaptStepRecord(
            step=s, grad_norms=norms, nll_adapt=nlls,
            test_metrics=eval_fn(work) if eval_fn is not None else None))
        if s == cfg.steps:
            break
        for i, mlp in enumerate(work.mlps):
            if scales[i] != 0.0:
                nn.step(mlp, grads[i], opt, scale=scales[i])
    return work, trace


@dataclass
class ParameterSpaceProbe:
    """One unconstrained-gradient evaluation; no parameters change."""

    grad_norm_intervened: float
    grad_norm_others_mean: float
    per_module: np.ndarray = field(repr=False)


def parameter_space_probe(stack: nn.ModelStack, d_adapt: Dataset,
                          intervention_target: int) -> ParameterSpaceProbe:
    if not 0 <= intervention_target < stack.n:
        raise ValueError(f"target {intervention_target} out of range")
    if d_adapt.size == 0:
        raise ValueError("adaptation dataset is empty")
    norms = np.array([
        nn.grad_norm(nn.backward(mlp, d_adapt.samples, i)[0])
        for i, mlp in enumerate(stack.mlps)
    ])
    others = np.delete(norms, intervention_target)
    return ParameterSpaceProbe(
        grad_norm_intervened=float(norms[intervention_target]),
        grad_norm_others_mean=float(others.mean()) if others.size else math.nan,
        per_module=norms,
    )
