import numpy as np
import pytest

from gridcraft.envapi import EnvSpec
from gridcraft.nnet import autodiff as tz


@pytest.fixture
def tiny_spec():
    """16x16 world, trees only, short episodes. Fast to generate and step."""
    return EnvSpec(counts={"tree": 30, "coal": 0, "iron": 0, "cow": 0,
                           "zombie": 0, "skeleton": 0},
                   episode_cap=60, world={"width": 16, "height": 16})


def fd_gradcheck(fn, tensors, eps=1e-6, rtol=1e-4):
    """Central finite differences in float64 against the recorded backward.

    fn maps the tensors to a scalar Tensor. Every coordinate of every
    requires-grad input is perturbed both ways; the worst relative error
    (infinity norm, scaled by the FD gradient's own magnitude) must stay
    under rtol. Returns the worst error so callers can report it.
    """
    for t in tensors:
        assert t.dtype == np.float64, "gradcheck runs in 64-bit"
        t.grad = None
    out = fn(*tensors)
    assert out.data.size == 1, "gradcheck wants a scalar loss"
    out.backward()
    worst = 0.0
    for t in tensors:
        if not t.requires_grad:
            continue
        grad = t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = float(fn(*tensors).data)
            flat[i] = keep - eps
            lo = float(fn(*tensors).data)
            flat[i] = keep
            fd[i] = (hi - lo) / (2 * eps)
        scale = max(np.abs(fd).max(), 1e-8)
        err = np.abs(grad.reshape(-1) - fd).max() / scale
        worst = max(worst, err)
    assert worst < rtol, f"gradient mismatch: rel err {worst:.3e} >= {rtol}"
    return worst


def param64(rng, shape, scale=0.5):
    return tz.parameter(rng.normal(scale=scale, size=shape))
