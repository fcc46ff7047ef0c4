"""Adam and global gradient-norm clipping."""

import numpy as np


def clip_grad_norm(params, max_norm):
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the norm measured before clipping. Parameters without a
    gradient are ignored.
    """
    total = 0.0
    grads = [p.grad for p in params.values() if p.grad is not None]
    for g in grads:
        total += float(np.dot(g.ravel(), g.ravel()))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class Adam:
    """Adam over a name -> Tensor parameter dict.

    eps defaults to 1e-5, the value common PPO baselines run with; the
    textbook 1e-8 makes early updates noticeably larger.
    """

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-5):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name in self.params:
            p = self.params[name]
            if p.grad is None:
                continue
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data -= (self.lr * update).astype(p.data.dtype, copy=False)

    def state_arrays(self):
        """Optimizer moments keyed for checkpointing."""
        out = {"t": np.array([self.t], dtype=np.int64)}
        for k in self.params:
            out[f"m.{k}"] = self._m[k]
            out[f"v.{k}"] = self._v[k]
        return out

    def load_state_arrays(self, arrays):
        self.t = int(arrays["t"][0])
        for k in self.params:
            self._m[k] = arrays[f"m.{k}"]
            self._v[k] = arrays[f"v.{k}"]
