"""Independent oracles shared by the unit and acceptance suites.

Everything here recomputes quantities through a different route than the
library code it checks: straight-line per-sample loss evaluation for the
finite-difference gradient oracle, and brute-force enumeration of the joint
for the sampler oracle.
"""

import numpy as np

from causalstack import nn, scm


def random_case(seed, n, k, batch_size=8, hidden=16):
    rng = np.random.default_rng(seed)
    mask = (rng.random(n) < 0.7).astype(np.int8)
    idx = int(rng.integers(n))
    mask[idx] = 0
    mlp = nn.MaskedMlp(
        w1=rng.normal(0, 0.6, size=(n * k, hidden)),
        b1=rng.normal(0, 0.3, size=hidden),
        w2=rng.normal(0, 0.6, size=(hidden, k)),
        b2=rng.normal(0, 0.3, size=k),
        mask=mask,
        k=k,
    )
    batch = rng.integers(0, k, size=(batch_size, n))
    return mlp, batch, idx, rng


def ref_loss(mlp, batch, index):
    """Test-local reimplementation of the batch-mean NLL (independent of nn.forward)."""
    m, n = batch.shape
    total = 0.0
    for s in range(m):
        z1 = mlp.b1.copy()
        for j in range(n):
            if mlp.mask[j]:
                z1 += mlp.w1[j * mlp.k + batch[s, j]]
        h = np.where(z1 > 0, z1, 0.1 * z1)
        logits = h @ mlp.w2 + mlp.b2
        shifted = logits - logits.max()
        logz = np.log(np.exp(shifted).sum()) + logits.max()
        total += logz - logits[batch[s, index]]
    return total / m


def hidden_preacts(mlp, batch):
    m, n = batch.shape
    z = np.tile(mlp.b1, (m, 1))
    for j in range(n):
        if mlp.mask[j]:
            z += mlp.w1[j * mlp.k + batch[:, j]]
    return z


def fd_gradient_check(mlp, batch, index, rng, n_probes=20, h=1e-4):
    """Central finite differences on randomly chosen parameters.

    Probes whose perturbation flips the sign of a hidden pre-activation are
    skipped: the difference quotient is invalid across the LeakyReLU kink.
    Returns the max relative error over the validated probes.
    """
    grads, _ = nn.backward(mlp, batch, index)
    params = {"w1": mlp.w1, "b1": mlp.b1, "w2": mlp.w2, "b2": mlp.b2}
    analytic = {"w1": grads.w1, "b1": grads.b1, "w2": grads.w2, "b2": grads.b2}
    names = list(params)
    worst = 0.0
    checked = 0
    attempts = 0
    while checked < n_probes and attempts < n_probes * 10:
        attempts += 1
        name = names[int(rng.integers(len(names)))]
        arr = params[name]
        flat = int(rng.integers(arr.size))
        pos = np.unravel_index(flat, arr.shape)
        orig = arr[pos]
        if name in ("w1", "b1"):
            arr[pos] = orig + h
            sign_hi = hidden_preacts(mlp, batch) > 0
            arr[pos] = orig - h
            sign_lo = hidden_preacts(mlp, batch) > 0
            arr[pos] = orig
            if not np.array_equal(sign_hi, sign_lo):
                continue
        arr[pos] = orig + h
        hi = ref_loss(mlp, batch, index)
        arr[pos] = orig - h
        lo = ref_loss(mlp, batch, index)
        arr[pos] = orig
        fd = (hi - lo) / (2 * h)
        an = analytic[name][pos]
        err = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
        worst = max(worst, err)
        checked += 1
    assert checked == n_probes
    return worst


def enumerate_joint(model):
    """Exact joint by brute-force enumeration of all k^n assignments."""
    n, k = model.n, model.k
    grids = np.stack(np.meshgrid(*[np.arange(k)] * n, indexing="ij"), axis=-1).reshape(-1, n)
    logp = np.zeros(len(grids))
    for i in range(n):
        lp = scm.log_cpd(model, i, grids)
        logp += lp[np.arange(len(grids)), grids[:, i]]
    return grids, np.exp(logp)


def empirical_joint(samples, k):
    n = samples.shape[1]
    weights = k ** np.arange(n - 1, -1, -1)
    flat = samples @ weights
    return np.bincount(flat, minlength=k ** n) / samples.shape[0]


def tv(p, q):
    return 0.5 * float(np.abs(p - q).sum())
