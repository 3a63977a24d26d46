"""Numba-compiled hot kernels.

Same contracts as :mod:`kernels_numpy`; serial loops, no fastmath, so results
stay deterministic and IEEE-faithful. Compilation is cached on disk, so the
JIT cost is paid once per machine.
"""

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def softmax2d(x):
    rows, cols = x.shape
    out = np.empty((rows, cols))
    for r in range(rows):
        m = x[r, 0]
        for c in range(1, cols):
            if x[r, c] > m:
                m = x[r, c]
        s = 0.0
        for c in range(cols):
            e = np.exp(x[r, c] - m)
            out[r, c] = e
            s += e
        for c in range(cols):
            out[r, c] /= s
    return out


@njit(cache=True)
def softmax2d_bwd(y, dy):
    rows, cols = y.shape
    dx = np.empty((rows, cols))
    for r in range(rows):
        inner = 0.0
        for c in range(cols):
            inner += dy[r, c] * y[r, c]
        for c in range(cols):
            dx[r, c] = y[r, c] * (dy[r, c] - inner)
    return dx


@njit(cache=True)
def layernorm_fwd(x, gain, bias, eps):
    rows, cols = x.shape
    y = np.empty((rows, cols))
    xhat = np.empty((rows, cols))
    rstd = np.empty(rows)
    for r in range(rows):
        mu = 0.0
        for c in range(cols):
            mu += x[r, c]
        mu /= cols
        var = 0.0
        for c in range(cols):
            d = x[r, c] - mu
            var += d * d
        var /= cols
        rs = 1.0 / np.sqrt(var + eps)
        rstd[r] = rs
        for c in range(cols):
            h = (x[r, c] - mu) * rs
            xhat[r, c] = h
            y[r, c] = h * gain[c] + bias[c]
    return y, xhat, rstd


@njit(cache=True)
def layernorm_bwd(dy, xhat, rstd, gain):
    rows, cols = dy.shape
    dx = np.empty((rows, cols))
    dgain = np.zeros(cols)
    dbias = np.zeros(cols)
    for r in range(rows):
        m1 = 0.0
        m2 = 0.0
        for c in range(cols):
            g = dy[r, c] * gain[c]
            m1 += g
            m2 += g * xhat[r, c]
            dgain[c] += dy[r, c] * xhat[r, c]
            dbias[c] += dy[r, c]
        m1 /= cols
        m2 /= cols
        for c in range(cols):
            dx[r, c] = rstd[r] * (dy[r, c] * gain[c] - m1 - xhat[r, c] * m2)
    return dx, dgain, dbias


@njit(cache=True)
def scatter_add_rows(out, idx, rows):
    n, d = rows.shape
    for i in range(n):
        r = idx[i]
        for j in range(d):
            out[r, j] += rows[i, j]


@njit(cache=True)
def gather_rows(table, idx):
    n = idx.shape[0]
    d = table.shape[1]
    out = np.empty((n, d))
    for i in range(n):
        r = idx[i]
        for j in range(d):
            out[i, j] = table[r, j]
    return out


@njit(cache=True)
def relu(x):
    out = x.ravel().copy()
    for i in range(out.shape[0]):
        if out[i] < 0.0:
            out[i] = 0.0
    return out.reshape(x.shape)


@njit(cache=True)
def relu_bwd(x, dy):
    xf = x.ravel()
    dyf = dy.ravel()
    dx = np.zeros(xf.shape[0])
    for i in range(xf.shape[0]):
        if xf[i] > 0.0:
            dx[i] = dyf[i]
    return dx.reshape(x.shape)


@njit(cache=True)
def adam_step_flat(param, grad, m, v, t, lr, beta1, beta2, eps):
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for i in range(param.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
        mhat = m[i] / bc1
        vhat = v[i] / bc2
        param[i] -= lr * mhat / (np.sqrt(vhat) + eps)


@njit(cache=True)
def sampled_ce_fwd(pos, neg):
    p, k = neg.shape
    losses = np.empty(p)
    probs = np.empty((p, k + 1))
    for r in range(p):
        mx = pos[r]
        for c in range(k):
            if neg[r, c] > mx:
                mx = neg[r, c]
        s = np.exp(pos[r] - mx)
        probs[r, 0] = s
        for c in range(k):
            e = np.exp(neg[r, c] - mx)
            probs[r, c + 1] = e
            s += e
        losses[r] = mx + np.log(s) - pos[r]
        for c in range(k + 1):
            probs[r, c] /= s
    return losses, probs
