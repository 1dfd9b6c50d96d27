"""Stack of masked one-hidden-layer networks with analytic gradients.

Every module is an independent MLP over the one-hot encoding of all N
variables (input size N*K), with a per-variable binary input mask, a
LeakyReLU(0.1) hidden layer and a log-softmax output over K categories.
All arithmetic is float64 so gradient checks and bit-identity tests are
meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LEAKY_SLOPE = 0.1
CHECKPOINT_VERSION = 1


@dataclass
class MaskedMlp:
    """One conditional model p(X_i | X, M_i): parameters plus its input mask."""

    w1: np.ndarray  # (n*k, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, k)
    b2: np.ndarray  # (k,)
    mask: np.ndarray  # (n,) 0/1; bit j admits variable j as a predictor
    k: int

    @property
    def n(self) -> int:
        return self.mask.shape[0]

    @property
    def hidden(self) -> int:
        return self.b1.shape[0]

    def copy(self) -> "MaskedMlp":
        return MaskedMlp(self.w1.copy(), self.b1.copy(), self.w2.copy(),
                         self.b2.copy(), self.mask.copy(), self.k)


@dataclass
class Gradients:
    """Same shapes as the MaskedMlp parameters."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __iadd__(self, other: "Gradients") -> "Gradients":
        self.w1 += other.w1
        self.b1 += other.b1
        self.w2 += other.w2
        self.b2 += other.b2
        return self

    def __itruediv__(self, c: float) -> "Gradients":
        self.w1 /= c
        self.b1 /= c
        self.w2 /= c
        self.b2 /= c
        return self

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass
class ModelStack:
    """N independent masked MLPs; module i models variable i."""

    mlps: list[MaskedMlp]
    k: int

    @property
    def n(self) -> int:
        return len(self.mlps)

    def copy(self) -> "ModelStack":
        return ModelStack([m.copy() for m in self.mlps], self.k)

    def set_masks(self, mask_matrix: np.ndarray) -> None:
        mask_matrix = np.asarray(mask_matrix, dtype=np.int8)
        if mask_matrix.shape != (self.n, self.n):
            raise ValueError(f"mask matrix must be {(self.n, self.n)}, got {mask_matrix.shape}")
        if np.diagonal(mask_matrix).any():
            raise ValueError("a module may not read its own variable (diagonal must be 0)")
        for i, mlp in enumerate(self.mlps):
            mlp.mask = mask_matrix[i].copy()

    def mask_matrix(self) -> np.ndarray:
        return np.stack([m.mask for m in self.mlps]).astype(np.int8)


def init_mlp(n: int, k: int, mask: np.ndarray, rng: np.random.Generator,
             hidden: int = 64) -> MaskedMlp:
    """Glorot-uniform weights, zero biases; identical across objectives."""
    lim1 = np.sqrt(6.0 / (n * k + hidden))
    lim2 = np.sqrt(6.0 / (hidden + k))
    return MaskedMlp(
        w1=rng.uniform(-lim1, lim1, size=(n * k, hidden)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-lim2, lim2, size=(hidden, k)),
        b2=np.zeros(k),
        mask=np.asarray(mask, dtype=np.int8).copy(),
        k=k,
    )


def init_stack(n: int, k: int, rng: np.random.Generator, hidden: int = 64,
               mask_matrix: np.ndarray | None = None) -> ModelStack:
    if mask_matrix is None:
        mask_matrix = np.ones((n, n), dtype=np.int8) - np.eye(n, dtype=np.int8)
    mask_matrix = np.asarray(mask_matrix, dtype=np.int8)
    mlps = [init_mlp(n, k, mask_matrix[i], rng, hidden) for i in range(n)]
    return ModelStack(mlps, k)


def one_hot(x: np.ndarray, k: int, mask: np.ndarray) -> np.ndarray:
    """(m, n*k) encoding with the K-blocks of masked-out variables left at zero."""
    x = np.atleast_2d(x)
    m, n = x.shape
    enc = np.zeros((m, n * k))
    cols = np.arange(n) * k + x
    enc[np.arange(m)[:, None], cols] = np.asarray(mask, dtype=np.float64)
    return enc


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def forward(mlp: MaskedMlp, x: np.ndarray) -> np.ndarray:
    """Log-probabilities over K; accepts a single sample (n,) or a batch (m, n)."""
    x = np.asarray(x)
    single = x.ndim == 1
    enc = one_hot(x, mlp.k, mlp.mask)
    if enc.shape[1] != mlp.w1.shape[0]:
        raise ValueError(f"input encodes to {enc.shape[1]} features, "
                         f"model expects {mlp.w1.shape[0]}")
    z1 = enc @ mlp.w1 + mlp.b1
    h = np.where(z1 > 0, z1, LEAKY_SLOPE * z1)
    logits = h @ mlp.w2 + mlp.b2
    out = _log_softmax(logits)
    return out[0] if single else out


def nll(mlp: MaskedMlp, x: np.ndarray, index: int) -> float:
    """Mean negative log-likelihood of the module's own variable over a batch."""
    x = np.atleast_2d(np.asarray(x))
    logp = forward(mlp, x)
    return float(-logp[np.arange(x.shape[0]), x[:, index]].mean())


def backward(mlp: MaskedMlp, batch: np.ndarray, index: int) -> tuple[Gradients, float]:
    """Exact gradient of the batch-mean NLL with respect to all parameters."""
    batch = np.atleast_2d(np.asarray(batch))
    m = batch.shape[0]
    if m == 0:
        raise ValueError("empty batch")
    enc = one_hot(batch, mlp.k, mlp.mask)
    z1 = enc @ mlp.w1 + mlp.b1
    h = np.where(z1 > 0, z1, LEAKY_SLOPE * z1)
    logits = h @ mlp.w2 + mlp.b2
    logp = _log_softmax(logits)
    targets = batch[:, index]
    loss = float(-logp[np.arange(m), targets].mean())

    dlogits = np.exp(logp)
    dlogits[np.arange(m), targets] -= 1.0
    dlogits /= m
    gw2 = h.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    dh = dlogits @ mlp.w2.T
    dz1 = dh * np.where(z1 > 0, 1.0, LEAKY_SLOPE)
    gw1 = enc.T @ dz1
    gb1 = dz1.sum(axis=0)
    return Gradients(gw1, gb1, gw2, gb2), loss


def grad_norm(grads: Gradients) -> float:
    """L2 norm over the concatenation of all parameter gradients."""
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.arrays())))


@dataclass
class Sgd:
    lr: float

    @property
    def kind(self) -> str:
        return "sgd"


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    m: Gradients | None = field(default=None, repr=False)
    v: Gradients | None = field(default=None, repr=False)
    t: int = 0

    @property
    def kind(self) -> str:
        return "adam"


def step(mlp: MaskedMlp, grads: Gradients, opt, scale: float = 1.0) -> MaskedMlp:
    """Apply one optimizer update in place; ``scale`` multiplies the effective step."""
    params = (mlp.w1, mlp.b1, mlp.w2, mlp.b2)
    if isinstance(opt, Sgd):
        if scale != 0.0:
            for p, g in zip(params, grads.arrays()):
                p -= (opt.lr * scale) * g
        return mlp
    if not isinstance(opt, Adam):
        raise TypeError(f"unknown optimizer {opt!r}")
    if opt.m is None:
        opt.m = Gradients(*(np.zeros_like(g) for g in grads.arrays()))
        opt.v = Gradients(*(np.zeros_like(g) for g in grads.arrays()))
    opt.t += 1
    c1 = 1.0 - opt.beta1 ** opt.t
    c2 = 1.0 - opt.beta2 ** opt.t
    for p, g, m_buf, v_buf in zip(params, grads.arrays(), opt.m.arrays(), opt.v.arrays()):
        m_buf *= opt.beta1
        m_buf += (1.0 - opt.beta1) * g
        v_buf *= opt.beta2
        v_buf += (1.0 - opt.beta2) * (g * g)
        if scale == 0.0:
            continue
        update = (m_buf / c1) / (np.sqrt(v_buf / c2) + opt.eps)
        if opt.weight_decay:
            update = update + opt.weight_decay * p  # decoupled L2
        p -= (opt.lr * scale) * update
    return mlp


def save_stack(stack: ModelStack, path, optimizer_kind: str = "adam") -> None:
    """Versioned binary checkpoint; round-trips bit-exactly."""
    np.savez(
        path,
        version=np.int64(CHECKPOINT_VERSION),
        n=np.int64(stack.n),
        k=np.int64(stack.k),
        hidden=np.int64(stack.mlps[0].hidden),
        optimizer_kind=np.bytes_(optimizer_kind.encode()),
        mask_matrix=stack.mask_matrix(),
        w1=np.stack([m.w1 for m in stack.mlps]),
        b1=np.stack([m.b1 for m in stack.mlps]),
        w2=np.stack([m.w2 for m in stack.mlps]),
        b2=np.stack([m.b2 for m in stack.mlps]),
    )


def load_stack(path) -> tuple[ModelStack, str]:
    with np.load(Path(path), allow_pickle=False) as blob:
        version = int(blob["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        n = int(blob["n"])
        k = int(blob["k"])
        masks = blob["mask_matrix"]
        mlps = [
            MaskedMlp(blob["w1"][i].copy(), blob["b1"][i].copy(),
                      blob["w2"][i].copy(), blob["b2"][i].copy(),
                      masks[i].astype(np.int8), k)
            for i in range(n)
        ]
        kind = bytes(blob["optimizer_kind"]).decode()
    return ModelStack(mlps, k), kind
