"""Numpy implementations of the dense-network kernels.

This is the fallback backend: every function here has a compiled twin in
``_ckernels`` with the same signature and semantics.  In-place functions are
suffixed with ``_`` and return their mutated first argument.  All arrays are
C-contiguous float64.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

NAME = "python"


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def matmul_nt(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b.T


def matmul_tn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a.T @ b


def add_bias_(y: np.ndarray, bias: np.ndarray) -> np.ndarray:
    y += bias
    return y


def add_bias_relu_(y: np.ndarray, bias: np.ndarray) -> np.ndarray:
    y += bias
    np.maximum(y, 0.0, out=y)
    return y


def relu_bwd_(dz: np.ndarray, post: np.ndarray) -> np.ndarray:
    dz *= post > 0.0
    return dz


def tanh_(y: np.ndarray) -> np.ndarray:
    np.tanh(y, out=y)
    return y


def tanh_bwd_(dz: np.ndarray, post: np.ndarray) -> np.ndarray:
    dz *= 1.0 - post * post
    return dz


def softplus_shift_(y: np.ndarray, shift: float) -> np.ndarray:
    # log1p(exp(y)) computed stably for both signs of y.
    np.logaddexp(0.0, y, out=y)
    y += shift
    return y


def softplus_bwd_(dz: np.ndarray, pre: np.ndarray) -> np.ndarray:
    dz *= expit(pre)
    return dz


def colsum(a: np.ndarray) -> np.ndarray:
    return a.sum(axis=0)


def adam_(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> bool:
    """One bias-corrected Adam update, in place; t is the post-increment step.

    Returns False if the updated parameters contain a non-finite entry.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
    return bool(np.isfinite(p).all())


def polyak_(target: np.ndarray, source: np.ndarray, tau: float) -> np.ndarray:
    target *= 1.0 - tau
    target += tau * source
    return target
