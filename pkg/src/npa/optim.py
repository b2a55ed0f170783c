"""AdamW with decoupled weight decay for named parameter tensors."""

from __future__ import annotations

import numpy as np

__all__ = ["AdamW", "MissingGradError", "clip_grad_norm"]


class MissingGradError(RuntimeError):
    """A parameter had no gradient when an update was requested."""


class AdamW:
    """Decoupled-weight-decay Adam over a list of (name, Tensor) pairs.

    Moments are kept per parameter in float64. The weight decay term is
    applied directly to the parameter value, not folded into the gradient:

        m = b1*m + (1-b1)*g
        v = b2*v + (1-b2)*g^2
        w = w - lr * ( m/(1-b1^t) / (sqrt(v/(1-b2^t)) + eps) + wd * w )
    """

    def __init__(self, params, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.params = [(name, p) for name, p in params]
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError(f"invalid betas ({beta1}, {beta2})")
        if lr < 0 or eps <= 0 or weight_decay < 0:
            raise ValueError("lr and weight_decay must be >= 0, eps > 0")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.first_moment = {name: np.zeros_like(p.data) for name, p in self.params}
        self.second_moment = {name: np.zeros_like(p.data) for name, p in self.params}

    def step(self):
        """Apply one update; every parameter must carry a gradient."""
        missing = [name for name, p in self.params if p.grad is None]
        if missing:
            raise MissingGradError(f"no gradient for parameters: {', '.join(missing)}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params:
            g = p.grad
            m = self.first_moment[name]
            v = self.second_moment[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data = p.data - self.lr * update

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def state_tensors(self):
        """Moment arrays keyed by a stable name, for sidecar serialization."""
        out = [("step_count", np.array([float(self.step_count)]))]
        for name, _ in self.params:
            out.append((f"m.{name}", self.first_moment[name]))
            out.append((f"v.{name}", self.second_moment[name]))
        return out

    def load_state_tensors(self, named):
        table = dict(named)
        self.step_count = int(table["step_count"][0])
        for name, p in self.params:
            self.first_moment[name] = np.asarray(table[f"m.{name}"], dtype=np.float64).reshape(p.data.shape)
            self.second_moment[name] = np.asarray(table[f"v.{name}"], dtype=np.float64).reshape(p.data.shape)


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for _, p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = total ** 0.5
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for _, p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm
