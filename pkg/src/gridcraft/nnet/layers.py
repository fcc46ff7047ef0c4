"""Neural layers built from the tensor ops, plus parameter initializers.

Layers are pure functions over Tensors; parameters are passed in explicitly
so the same code serves every architecture and the checkpoint format stays
a flat name -> array mapping.
"""

import dataclasses

import numpy as np

from .autodiff import (Tensor, add, matmul, mul, relu, reshape, sigmoid,
                     softmax, tanh, transpose)


@dataclasses.dataclass
class PatchSequence:
    """A feature map cut into k flattened patch tokens plus its geometry.

    tokens is (N, k, d_in) with the patch grid enumerated row-major;
    grid = (rows, cols) is kept so attention maps can be folded back into
    image space for overlays.
    """
    tokens: Tensor
    patch: int
    stride: int
    grid: tuple

    @property
    def k(self):
        return self.tokens.shape[1]

    @property
    def d_in(self):
        return self.tokens.shape[2]


# ------------------------------------------------------------- initializers


def orthogonal(rng, shape, gain=1.0, dtype=np.float32):
    """Orthogonal initialization for linear and conv weights.

    The matrix view is (shape[0], prod(shape[1:])). For very tall matrices
    whose row count is a multiple of the column count (the SPCNN flatten
    layer is 262144x512) a plain QR takes half a minute, so those are built
    as a stack of sign-flipped, column-permuted copies of one square
    orthogonal block scaled by 1/sqrt(blocks); the stack has exactly
    orthonormal columns and costs a single n x n factorization.
    """
    rows = shape[0]
    cols = int(np.prod(shape[1:])) if len(shape) > 1 else 1
    m, n = max(rows, cols), min(rows, cols)
    if m % n == 0 and m // n >= 4:
        blocks = m // n
        q = _square_orthogonal(rng, n)
        out = np.empty((m, n))
        for i in range(blocks):
            signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            perm = rng.permutation(n)
            out[i * n:(i + 1) * n] = (signs[:, None] * q)[:, perm]
        out /= np.sqrt(blocks)
    else:
        a = rng.standard_normal((m, n))
        q, r = np.linalg.qr(a)
        q *= np.sign(np.diag(r))  # fix the sign ambiguity so draws are well spread
        out = q
    if rows < cols:
        out = out.T
    return (gain * out).reshape(shape).astype(dtype)


def _square_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def unit_gaussian(rng, shape, dtype=np.float32):
    """Unit Gaussian draw, used for the CLS token and the learned slot bank."""
    return rng.standard_normal(shape).astype(dtype)


def conv_output_size(size, kernel, stride, padding):
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ValueError(f"kernel {kernel} stride {stride} padding {padding} does not fit size {size}")
    return out


# ------------------------------------------------------------------ layers


def linear(x, w, b=None):
    """x @ w (+ b). w is (d_in, d_out); x may carry leading batch axes."""
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out


def lstm_cell(x, h, c, wx, wh, b):
    """One LSTM step. Gate layout along the last axis is [input, forget, cell, output].

    x: (N, d_in), h and c: (N, H), wx: (d_in, 4H), wh: (H, 4H), b: (4H,).
    Returns (h', c').
    """
    hidden = h.shape[-1]
    if wx.shape[-1] != 4 * hidden or wh.shape != (hidden, 4 * hidden):
        raise ValueError(f"lstm_cell: weight shapes {wx.shape}/{wh.shape} do not match hidden {hidden}")
    z = add(add(matmul(x, wx), matmul(h, wh)), b)
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden:2 * hidden])
    g = tanh(z[:, 2 * hidden:3 * hidden])
    o = sigmoid(z[:, 3 * hidden:])
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def attention(q, k, v):
    """Single-head scaled dot-product attention on 2-d inputs.

    q: (nq, d), k: (nk, d), v: (nk, dv). softmax(q kT / sqrt(d)) v.
    Returns (output, weights); weights rows sum to 1 over the keys.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"attention: query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"attention: {k.shape[0]} keys vs {v.shape[0]} values")
    scores = mul(matmul(q, transpose(k)), 1.0 / np.sqrt(q.shape[-1]))
    weights = softmax(scores, axis=-1)
    return matmul(weights, v), weights


def multi_head_attention(q, k, v, n_heads, competition="keys"):
    """Multi-head attention over batched token sequences.

    q: (N, nq, d), k/v: (N, nk, d); d must divide evenly into n_heads.
    Scaling is 1/sqrt(d/h). Heads are computed in parallel by folding them
    into the batch axis and concatenated by folding back.

    competition selects the softmax axis: "keys" is the standard form
    (weight rows over keys sum to 1), "queries" normalizes over the query
    axis instead so slots compete for each input token.

    Returns (output (N, nq, d), weights (N, h, nq, nk) as plain arrays).
    """
    n, nq, d = q.shape
    nk = k.shape[1]
    if d % n_heads:
        raise ValueError(f"model dim {d} not divisible by {n_heads} heads")
    if k.shape != (n, nk, d) or v.shape != (n, nk, d):
        raise ValueError(f"multi_head_attention: shapes {q.shape}/{k.shape}/{v.shape}")
    if competition not in ("keys", "queries"):
        raise ValueError(f"unknown competition axis {competition!r}")
    dh = d // n_heads

    def split(t, length):
        t = reshape(t, (n, length, n_heads, dh))
        t = transpose(t, (0, 2, 1, 3))
        return reshape(t, (n * n_heads, length, dh))

    qh, kh, vh = split(q, nq), split(k, nk), split(v, nk)
    scores = mul(matmul(qh, transpose(kh, (0, 2, 1))), 1.0 / np.sqrt(dh))
    weights = softmax(scores, axis=-1 if competition == "keys" else -2)
    out = matmul(weights, vh)
    out = reshape(out, (n, n_heads, nq, dh))
    out = transpose(out, (0, 2, 1, 3))
    out = reshape(out, (n, nq, d))
    return out, weights.data.reshape(n, n_heads, nq, nk)


def residual_mlp(x, w1, b1, w2, b2):
    """Two-layer ReLU MLP with a skip connection: x + W2 relu(W1 x + b1) + b2."""
    return add(x, linear(relu(linear(x, w1, b1)), w2, b2))


def sinusoidal_pe(k, d):
    """Absolute sinusoidal positional embedding table, shape (k, d).

    Even feature columns carry sin, odd columns cos, with the usual
    10000^(2i/d) frequency ladder. Plain array; it is added to patch
    features as a constant, not trained.
    """
    if k < 1 or d < 1:
        raise ValueError(f"sinusoidal_pe: need k,d >= 1, got ({k}, {d})")
    if d % 2:
        raise ValueError(f"sinusoidal_pe: feature dim must be even, got {d}")
    pos = np.arange(k, dtype=np.float64)[:, None]
    i = np.arange(d // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / d)
    pe = np.empty((k, d))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe
