"""Shared test oracles: central finite differences for gradient checking."""

from __future__ import annotations

import numpy as np

from msmmt.autodiff import Tensor

FD_STEP = 1e-4


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def fd_gradient(scalar_fn, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of scalar_fn at x (x is not modified)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        xp = x.copy().reshape(-1)
        xm = x.copy().reshape(-1)
        xp[i] = flat[i] + h
        xm[i] = flat[i] - h
        fp = scalar_fn(xp.reshape(x.shape))
        fm = scalar_fn(xm.reshape(x.shape))
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def gradcheck(fn, arrays: list[np.ndarray], tol: float = 1e-5, h: float = FD_STEP) -> None:
    """Check the reverse-mode gradient of ``fn(*tensors) -> scalar Tensor``
    against central differences for every input array, in double precision."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    tensors = [Tensor(a.copy(), requires_grad=True, dtype=np.float64) for a in arrays]
    loss = fn(*tensors)
    loss.backward()
    for i, base in enumerate(arrays):

        def scalar_fn(perturbed, i=i):
            args = [
                Tensor(perturbed if j == i else a.copy(), dtype=np.float64)
                for j, a in enumerate(arrays)
            ]
            return float(fn(*args).data.reshape(()))

        numeric = fd_gradient(scalar_fn, base, h=h)
        analytic = tensors[i].grad
        assert analytic is not None, f"input {i} received no gradient"
        err = rel_error(analytic, numeric)
        assert err <= tol, f"input {i}: gradient mismatch rel err {err:.3e} > {tol}"
