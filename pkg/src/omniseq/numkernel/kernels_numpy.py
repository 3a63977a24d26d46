"""Pure-numpy implementations of the hot kernels.

This is the fallback path used when the numba backend is unavailable or
disabled via ``OMNISEQ_BACKEND=numpy``. Every function here has a
numba-compiled twin in :mod:`kernels_numba` computing the same math.
"""

import numpy as np

NAME = "numpy"


def softmax2d(x):
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=1, keepdims=True)


def softmax2d_bwd(y, dy):
    inner = (dy * y).sum(axis=1, keepdims=True)
    return y * (dy - inner)


def layernorm_fwd(x, gain, bias, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * rstd
    return xhat * gain + bias, xhat, rstd[:, 0]


def layernorm_bwd(dy, xhat, rstd, gain):
    dxhat = dy * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = rstd[:, None] * (dxhat - m1 - xhat * m2)
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    return dx, dgain, dbias


def scatter_add_rows(out, idx, rows):
    np.add.at(out, idx, rows)


def gather_rows(table, idx):
    return table[idx]


def relu(x):
    return np.maximum(x, 0.0)


def relu_bwd(x, dy):
    return np.where(x > 0.0, dy, 0.0)


def adam_step_flat(param, grad, m, v, t, lr, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


def sampled_ce_fwd(pos, neg):
    z = np.concatenate([pos[:, None], neg], axis=1)
    mx = z.max(axis=1, keepdims=True)
    e = np.exp(z - mx)
    s = e.sum(axis=1, keepdims=True)
    losses = mx[:, 0] + np.log(s[:, 0]) - pos
    return losses, e / s
