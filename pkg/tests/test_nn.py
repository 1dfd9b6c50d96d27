import numpy as np
import pytest
from oracles import fd_gradient_check, random_case

from causalstack import nn


@pytest.mark.parametrize("seed", range(8))
def test_gradient_matches_finite_differences(seed):
    mlp, batch, idx, rng = random_case(seed, n=5, k=4)
    assert fd_gradient_check(mlp, batch, idx, rng) < 1e-4


def test_forward_normalized():
    mlp, batch, _, _ = random_case(11, n=6, k=5)
    logp = nn.forward(mlp, batch)
    np.testing.assert_allclose(np.exp(logp).sum(axis=1), 1.0, atol=1e-9)


def test_forward_single_sample_shape():
    mlp, batch, _, _ = random_case(12, n=6, k=5)
    out = nn.forward(mlp, batch[0])
    assert out.shape == (5,)


def test_all_zero_mask_constant_output():
    mlp, batch, _, _ = random_case(13, n=4, k=3)
    mlp.mask = np.zeros(4, dtype=np.int8)
    outs = nn.forward(mlp, batch)
    assert np.all(outs == outs[0])


def test_mask_invariance_bit_identical():
    mlp, batch, _, rng = random_case(14, n=6, k=4)
    masked_vars = np.nonzero(mlp.mask == 0)[0]
    assert masked_vars.size > 0
    base = nn.forward(mlp, batch)
    flipped = batch.copy()
    for j in masked_vars:
        flipped[:, j] = rng.integers(0, mlp.k, size=batch.shape[0])
    after = nn.forward(mlp, flipped)
    assert np.array_equal(base, after)


def test_nll_uniform_model_is_log_k():
    mlp, batch, idx, _ = random_case(15, n=4, k=7)
    mlp.w1[:] = 0
    mlp.b1[:] = 0
    mlp.w2[:] = 0
    mlp.b2[:] = 0
    assert nn.nll(mlp, batch, idx) == pytest.approx(np.log(7), abs=1e-12)


def test_nll_nonnegative():
    for seed in range(10):
        mlp, batch, idx, _ = random_case(seed + 100, n=5, k=3)
        assert nn.nll(mlp, batch, idx) >= 0.0


def test_backward_rejects_empty_batch():
    mlp, batch, idx, _ = random_case(16, n=4, k=3)
    with pytest.raises(ValueError):
        nn.backward(mlp, batch[:0], idx)


def test_backward_masked_columns_zero():
    mlp, batch, idx, _ = random_case(17, n=6, k=4)
    grads, _ = nn.backward(mlp, batch, idx)
    for j in np.nonzero(mlp.mask == 0)[0]:
        block = grads.w1[j * mlp.k:(j + 1) * mlp.k]
        assert np.all(block == 0.0)


def test_backward_duplicate_batch_invariance():
    mlp, batch, idx, _ = random_case(18, n=5, k=4)
    g1, l1 = nn.backward(mlp, batch, idx)
    g2, l2 = nn.backward(mlp, np.concatenate([batch, batch]), idx)
    assert l1 == pytest.approx(l2, abs=1e-12)
    for a, b in zip(g1.arrays(), g2.arrays()):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_sgd_exact_update():
    mlp, batch, idx, _ = random_case(19, n=4, k=3)
    before = mlp.w2.copy()
    ones = nn.Gradients(*(np.ones_like(a) for a in (mlp.w1, mlp.b1, mlp.w2, mlp.b2)))
    nn.step(mlp, ones, nn.Sgd(lr=0.1))
    np.testing.assert_array_equal(mlp.w2, before - 0.1)


def test_step_scale_zero_is_noop():
    for opt in (nn.Sgd(lr=0.1), nn.Adam(lr=0.1)):
        mlp, batch, idx, _ = random_case(20, n=4, k=3)
        grads, _ = nn.backward(mlp, batch, idx)
        snap = [a.copy() for a in (mlp.w1, mlp.b1, mlp.w2, mlp.b2)]
        nn.step(mlp, grads, opt, scale=0.0)
        for a, b in zip(snap, (mlp.w1, mlp.b1, mlp.w2, mlp.b2)):
            assert np.array_equal(a, b)


@pytest.mark.parametrize("gscale", [1e-3, 1.0, 1e3])
def test_adam_first_step_magnitude(gscale):
    mlp, _, _, _ = random_case(21, n=4, k=3)
    g = nn.Gradients(*(np.full_like(a, gscale) for a in (mlp.w1, mlp.b1, mlp.w2, mlp.b2)))
    before = mlp.w1.copy()
    opt = nn.Adam(lr=0.05)
    nn.step(mlp, g, opt)
    delta = before - mlp.w1
    # closed form for step 1: lr * g / (|g| + eps)
    expected = 0.05 * gscale / (gscale + 1e-8)
    np.testing.assert_allclose(delta, expected, rtol=1e-9)


def test_adam_step_counter_and_buffers():
    mlp, batch, idx, _ = random_case(22, n=4, k=3)
    opt = nn.Adam(lr=0.01)
    for expected_t in (1, 2, 3):
        grads, _ = nn.backward(mlp, batch, idx)
        nn.step(mlp, grads, opt)
        assert opt.t == expected_t
    for mb, pb in zip(opt.m.arrays(), (mlp.w1, mlp.b1, mlp.w2, mlp.b2)):
        assert mb.shape == pb.shape


def test_weight_decay_shrinks_parameters():
    mlp, batch, idx, _ = random_case(23, n=4, k=3)
    twin = mlp.copy()
    zeros = nn.Gradients(*(np.zeros_like(a) for a in (mlp.w1, mlp.b1, mlp.w2, mlp.b2)))
    nn.step(mlp, zeros, nn.Adam(lr=0.1, weight_decay=0.1))
    nn.step(twin, zeros, nn.Adam(lr=0.1, weight_decay=0.0))
    assert np.abs(mlp.w1).sum() < np.abs(twin.w1).sum()


def test_grad_norm():
    z = np.zeros((3, 3))
    g = nn.Gradients(z.copy(), np.zeros(3), z.copy(), np.zeros(3))
    assert nn.grad_norm(g) == 0.0
    g.w1[0, 0] = 3.0
    assert nn.grad_norm(g) == 3.0
    g2 = nn.Gradients(*(a * -2.0 for a in g.arrays()))
    assert nn.grad_norm(g2) == pytest.approx(6.0, abs=1e-12)


def test_sgd_small_step_never_increases_loss():
    hits = 0
    for seed in range(100):
        mlp, batch, idx, _ = random_case(seed + 500, n=4, k=3, batch_size=16)
        grads, before = nn.backward(mlp, batch, idx)
        nn.step(mlp, grads, nn.Sgd(lr=1e-3))
        after = nn.nll(mlp, batch, idx)
        if after <= before + 1e-12:
            hits += 1
    assert hits == 100


def test_init_deterministic():
    a = nn.init_stack(5, 4, np.random.default_rng(77))
    b = nn.init_stack(5, 4, np.random.default_rng(77))
    for ma, mb in zip(a.mlps, b.mlps):
        assert np.array_equal(ma.w1, mb.w1)
        assert np.array_equal(ma.b1, mb.b1)
        assert np.array_equal(ma.w2, mb.w2)
        assert np.array_equal(ma.b2, mb.b2)


def test_set_masks_rejects_diagonal():
    stack = nn.init_stack(4, 3, np.random.default_rng(0))
    bad = np.ones((4, 4), dtype=np.int8)
    with pytest.raises(ValueError):
        stack.set_masks(bad)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    stack = nn.init_stack(5, 4, np.random.default_rng(42))
    rng = np.random.default_rng(1)
    batch = rng.integers(0, 4, size=(10, 5))
    for i, mlp in enumerate(stack.mlps):
        g, _ = nn.backward(mlp, batch, i)
        nn.step(mlp, g, nn.Sgd(lr=0.05))
    path = tmp_path / "stack.npz"
    nn.save_stack(stack, path, optimizer_kind="sgd")
    loaded, kind = nn.load_stack(path)
    assert kind == "sgd"
    assert loaded.k == stack.k
    for ma, mb in zip(stack.mlps, loaded.mlps):
        assert np.array_equal(ma.w1, mb.w1)
        assert np.array_equal(ma.b1, mb.b1)
        assert np.array_equal(ma.w2, mb.w2)
        assert np.array_equal(ma.b2, mb.b2)
        assert np.array_equal(ma.mask, mb.mask)
