"""Reverse-mode tape: finite-difference checks per op plus graph mechanics."""

import numpy as np
import pytest

from gridcraft.nnet import autodiff as tz
from conftest import fd_gradcheck, param64


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def test_add_broadcast_grads(rng):
    a = param64(rng, (3, 4))
    b = param64(rng, (4,))
    fd_gradcheck(lambda a, b: tz.tsum(tz.mul(tz.add(a, b), tz.add(a, b))),
                 [a, b])


def test_mul_scalar_and_tensor(rng):
    a = param64(rng, (2, 5))
    b = param64(rng, (2, 5))
    fd_gradcheck(lambda a, b: tz.tsum(tz.mul(tz.mul(a, b), 0.7)), [a, b])


def test_matmul_grads(rng):
    a = param64(rng, (4, 6))
    b = param64(rng, (6, 3))
    fd_gradcheck(lambda a, b: tz.tsum(tz.mul(tz.matmul(a, b),
                                             tz.matmul(a, b))), [a, b])


def test_batched_matmul_grads(rng):
    a = param64(rng, (2, 4, 5))
    b = param64(rng, (2, 5, 3))
    fd_gradcheck(lambda a, b: tz.tsum(tz.matmul(a, b)), [a, b])


@pytest.mark.parametrize("op", [tz.relu, tz.tanh, tz.sigmoid, tz.exp])
def test_elementwise_grads(op, rng):
    x = param64(rng, (3, 7))
    fd_gradcheck(lambda x: tz.tsum(tz.mul(op(x), op(x))), [x])


def test_log_grads(rng):
    x = tz.parameter(np.abs(rng.normal(size=(4, 4))) + 0.5)
    fd_gradcheck(lambda x: tz.tsum(tz.log(x)), [x])


def test_minimum_grads(rng):
    # keep operands well separated so FD never straddles the tie point
    a = tz.parameter(rng.normal(size=(5, 5)))
    b = tz.parameter(a.data + np.where(rng.normal(size=(5, 5)) > 0, 0.5, -0.5))
    fd_gradcheck(lambda a, b: tz.tsum(tz.minimum(a, b)), [a, b])


def test_clip_grads(rng):
    x = tz.parameter(rng.normal(size=(6, 6)) * 2.0)
    mask = (x.data > -0.8) & (x.data < 0.8)
    y = tz.clip(x, -0.8, 0.8)
    tz.tsum(y).backward()
    assert np.array_equal(x.grad, mask.astype(np.float64))


def test_sum_mean_axes(rng):
    x = param64(rng, (3, 4, 5))
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.tmean(x, axis=(0, 2)),
                                          tz.tmean(x, axis=(0, 2)))), [x])
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.tsum(x, axis=1),
                                          tz.tsum(x, axis=1))), [x])


def test_reshape_transpose_slice(rng):
    x = param64(rng, (4, 6))
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.reshape(x, (2, 12)),
                                          tz.reshape(x, (2, 12)))), [x])
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.transpose(x), tz.transpose(x))),
                 [x])
    fd_gradcheck(lambda x: tz.tsum(tz.mul(x[1:3, ::2], x[1:3, ::2])), [x])


def test_concat_and_tile_batch(rng):
    a = param64(rng, (2, 3))
    b = param64(rng, (2, 3))
    fd_gradcheck(lambda a, b: tz.tsum(tz.mul(tz.concat([a, b], axis=1),
                                             tz.concat([a, b], axis=1))),
                 [a, b])
    x = param64(rng, (1, 4))
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.tile_batch(x, 3),
                                          tz.tile_batch(x, 3))), [x])


def test_softmax_rows_and_grads(rng):
    x = param64(rng, (3, 9))
    p = tz.softmax(x)
    assert np.allclose(p.data.sum(axis=-1), 1.0, atol=1e-12)
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.softmax(x), tz.softmax(x))), [x])
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.log_softmax(x),
                                          tz.log_softmax(x))), [x])


def test_log_softmax_matches_log_of_softmax(rng):
    x = param64(rng, (2, 17))
    assert np.allclose(tz.log_softmax(x).data, np.log(tz.softmax(x).data),
                       atol=1e-12)


def test_conv2d_grads(rng):
    x = param64(rng, (2, 3, 8, 8))
    w = param64(rng, (4, 3, 3, 3))
    b = param64(rng, (4,))
    fd_gradcheck(lambda x, w, b: tz.tsum(tz.mul(tz.conv2d(x, w, b, 2, 1),
                                                tz.conv2d(x, w, b, 2, 1))),
                 [x, w, b])


def test_conv2d_matches_naive(rng):
    x = rng.normal(size=(1, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    out = tz.conv2d(tz.tensor(x), tz.tensor(w), stride=1, padding=0).data
    ref = np.zeros((1, 3, 3, 3))
    for o in range(3):
        for i in range(3):
            for j in range(3):
                ref[0, o, i, j] = (x[0, :, i:i + 3, j:j + 3] * w[o]).sum()
    assert np.allclose(out, ref, atol=1e-10)


def test_extract_patches_grads_and_layout(rng):
    x = param64(rng, (2, 3, 9, 9))
    fd_gradcheck(lambda x: tz.tsum(tz.mul(tz.extract_patches(x, 3, 3),
                                          tz.extract_patches(x, 3, 3))), [x])
    got = tz.extract_patches(tz.tensor(x.data), 3, 3)
    assert got.shape == (2, 9, 27)
    # first patch is the top-left 3x3 block, channel-major
    assert np.allclose(got.data[0, 0], x.data[0, :, 0:3, 0:3].reshape(-1))


def test_layernorm_grads(rng):
    x = param64(rng, (4, 10))
    g = param64(rng, (10,))
    b = param64(rng, (10,))
    fd_gradcheck(lambda x, g, b: tz.tsum(tz.mul(tz.layernorm(x, g, b),
                                                tz.layernorm(x, g, b))),
                 [x, g, b])


def test_grad_accumulates_across_uses(rng):
    x = param64(rng, (3,))
    y = tz.tsum(tz.add(x, x))
    y.backward()
    assert np.allclose(x.grad, 2.0)


def test_backward_requires_scalar(rng):
    x = param64(rng, (3,))
    with pytest.raises(ValueError):
        tz.add(x, x).backward()


def test_no_grad_suppresses_graph(rng):
    x = param64(rng, (3,))
    with tz.no_grad():
        y = tz.mul(x, x)
    assert y._bw is None and not y.requires_grad
    assert tz.is_grad_enabled()


def test_detach_cuts_the_tape(rng):
    x = param64(rng, (3,))
    y = tz.tsum(tz.mul(x.detach(), x))
    y.backward()
    assert np.allclose(x.grad, x.data)


def test_division_by_tensor_is_rejected(rng):
    x = param64(rng, (2,))
    with pytest.raises(TypeError):
        _ = x / x


def test_matmul_shape_mismatch():
    a = tz.tensor(np.zeros((2, 3)))
    b = tz.tensor(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        tz.matmul(a, b)


def test_extract_patches_stride_cannot_exceed_patch():
    x = tz.tensor(np.zeros((1, 1, 8, 8)))
    with pytest.raises(ValueError):
        tz.extract_patches(x, 2, 3)
