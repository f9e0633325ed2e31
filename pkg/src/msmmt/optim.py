"""AdamW optimizer with decoupled weight decay.

Weight decay is applied directly to the parameter (multiplicative shrink by
``lr * weight_decay``), never folded into the gradient moments. Moments are
bias-corrected. With ``lr == 0`` a step leaves parameters bit-identical.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor

__all__ = ["AdamW"]


class AdamW:
    """Decoupled-weight-decay Adam over a dict of named parameters.

    Defaults follow the training setup this pipeline uses: lr 5e-5 and
    weight decay 0.05.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 5e-5,
        weight_decay: float = 0.05,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr < 0:
            raise ValueError(f"invalid learning rate {lr}")
        if weight_decay < 0:
            raise ValueError(f"invalid weight decay {weight_decay}")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ValueError(f"invalid betas {betas}")
        if eps <= 0:
            raise ValueError(f"invalid epsilon {eps}")
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        """Apply one update from the gradients currently stored on the parameters."""
        self.step_count += 1
        b1, b2 = self.betas
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                raise ValueError(f"parameter '{name}' has no gradient; run backward() first")
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"'{name}' shape {p.data.shape}"
                )
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            if self.lr != 0.0:
                if self.weight_decay != 0.0:
                    p.data -= (self.lr * self.weight_decay) * p.data
                p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
