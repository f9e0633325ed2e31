"""
Reverse-mode autodiff and AdamW basics
======================================

The numeric core of the package is a small define-by-run tensor library.
This walkthrough builds a computation, checks a gradient against finite
differences, and minimizes a quadratic with the decoupled-weight-decay
optimizer.
"""

import numpy as np

from msmmt import AdamW, Tensor

# Build a tiny computation: loss = sum((x @ w - y)^2)
rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(8, 3)))
w = Tensor(rng.normal(size=(3, 1)), requires_grad=True, dtype=np.float64)
y = Tensor(rng.normal(size=(8, 1)))

residual = x @ w - y
loss = (residual * residual).sum()
loss.backward()
print("loss:", loss.item())
print("analytic gradient:\n", w.grad)

# Cross-check one coordinate with central differences
h = 1e-6
w_plus = w.data.copy()
w_plus[0, 0] += h
w_minus = w.data.copy()
w_minus[0, 0] -= h


def loss_at(wv):
    r = x @ Tensor(wv, dtype=np.float64) - y
    return (r * r).sum().item()


numeric = (loss_at(w_plus) - loss_at(w_minus)) / (2 * h)
print(f"finite difference for w[0,0]: {numeric:.6f} (analytic {w.grad[0, 0]:.6f})")

# Minimize the same objective with AdamW. Weight decay is decoupled: it
# shrinks the parameter directly instead of entering the gradient moments.
w = Tensor(rng.normal(size=(3, 1)), requires_grad=True, dtype=np.float64)
opt = AdamW({"w": w}, lr=0.05, weight_decay=0.0)
for step in range(200):
    residual = x @ w - y
    loss = (residual * residual).sum()
    opt.zero_grad()
    loss.backward()
    opt.step()
    if step % 50 == 0:
        print(f"step {step:3d}: loss {loss.item():.6f}")
print("final loss:", loss.item())
