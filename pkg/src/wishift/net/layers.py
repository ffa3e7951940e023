"""Layer primitives as explicit forward/backward pairs over float64 arrays.

Every forward returns (output, cache); the matching backward consumes the
upstream gradient plus the cache and returns input and parameter
gradients. No autodiff framework: gradients here are checked against
finite differences in the test suite.
"""
from __future__ import annotations

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


# -- 2-D convolution, stride 1, zero same-padding ------------------------------

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x: (B, Cin, H, W); w: (Cout, Cin, kh, kw); b: (Cout,). Output keeps H, W."""
    B, Cin, H, W = x.shape
    Cout, _, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.tile(b[None, :, None, None], (B, 1, H, W)).astype(np.float64)
    for di in range(kh):
        for dj in range(kw):
            patch = xp[:, :, di : di + H, dj : dj + W]
            out += np.einsum("oc,bcij->boij", w[:, :, di, dj], patch, optimize=True)
    return out, (xp, w.shape, x.shape)


def conv2d_backward(dout: np.ndarray, w: np.ndarray, cache):
    xp, w_shape, x_shape = cache
    _Cout, _Cin, kh, kw = w_shape
    B, _, H, W = x_shape
    ph, pw = kh // 2, kw // 2
    db = dout.sum(axis=(0, 2, 3))
    dw = np.zeros(w_shape)
    dxp = np.zeros_like(xp)
    for di in range(kh):
        for dj in range(kw):
            patch = xp[:, :, di : di + H, dj : dj + W]
            dw[:, :, di, dj] = np.einsum("boij,bcij->oc", dout, patch, optimize=True)
            dxp[:, :, di : di + H, dj : dj + W] += np.einsum(
                "boij,oc->bcij", dout, w[:, :, di, dj], optimize=True
            )
    dx = dxp[:, :, ph : ph + H, pw : pw + W]
    return dx, dw, db


# -- batch normalization over (B, H, W) per channel ----------------------------

def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str,
):
    """Train mode normalizes by batch statistics and returns updated running
    stats; eval mode uses the running statistics unchanged."""
    if mode == "train":
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        new_mean = (1.0 - BN_MOMENTUM) * running_mean + BN_MOMENTUM * mean
        new_var = (1.0 - BN_MOMENTUM) * running_var + BN_MOMENTUM * var
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    cache = (xhat, gamma, inv_std, mode)
    return out, cache, new_mean, new_var


def batchnorm_backward(dout: np.ndarray, cache):
    xhat, gamma, inv_std, mode = cache
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    g = gamma[None, :, None, None] * inv_std[None, :, None, None]
    if mode == "train":
        n = dout.shape[0] * dout.shape[2] * dout.shape[3]
        mean_dout = dout.mean(axis=(0, 2, 3))[None, :, None, None]
        mean_dx = (dout * xhat).mean(axis=(0, 2, 3))[None, :, None, None]
        dx = g * (dout - mean_dout - xhat * mean_dx)
    else:
        dx = g * dout
    return dx, dgamma, dbeta


# -- relu ----------------------------------------------------------------------

def relu_forward(x: np.ndarray):
    out = np.maximum(x, 0.0)
    return out, (x > 0.0)


def relu_backward(dout: np.ndarray, cache):
    return dout * cache


# -- max pooling (non-overlapping, floor semantics) ----------------------------

def maxpool_forward(x: np.ndarray, ph: int, pw: int):
    B, C, H, W = x.shape
    H2, W2 = H // ph, W // pw
    xc = x[:, :, : H2 * ph, : W2 * pw]
    blocks = xc.reshape(B, C, H2, ph, W2, pw).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(B, C, H2, W2, ph * pw)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape, ph, pw)


def maxpool_backward(dout: np.ndarray, cache):
    arg, x_shape, ph, pw = cache
    B, C, H, W = x_shape
    H2, W2 = H // ph, W // pw
    dflat = np.zeros((B, C, H2, W2, ph * pw))
    np.put_along_axis(dflat, arg[..., None], dout[..., None], axis=-1)
    dxc = dflat.reshape(B, C, H2, W2, ph, pw).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(x_shape)
    dx[:, :, : H2 * ph, : W2 * pw] = dxc.reshape(B, C, H2 * ph, W2 * pw)
    return dx


# -- dense ---------------------------------------------------------------------

def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, x


def dense_backward(dout: np.ndarray, w: np.ndarray, cache):
    x = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


# -- LSTM, one direction -------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray, reverse: bool = False):
    """Run an LSTM over x (B, T, D); gate layout along the 4H axis is
    input, forget, cell, output.

    Returns hidden states aligned to input time indices (B, T, H), the
    final hidden state (the last processed step: t = T-1 forward, t = 0
    reversed), and the BPTT cache.
    """
    B, T, D = x.shape
    H = wh.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.zeros((B, T, H))
    steps = range(T - 1, -1, -1) if reverse else range(T)
    caches = []
    for t in steps:
        z = x[:, t] @ wx + h @ wh + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        caches.append((t, x[:, t], h, c, i, f, g, o, tanh_c))
        h, c = h_new, c_new
        hs[:, t] = h
    return hs, h, (caches, x.shape, reverse)


def lstm_backward(
    dhs: np.ndarray,
    dh_final: np.ndarray | None,
    wx: np.ndarray,
    wh: np.ndarray,
    cache,
):
    """Backpropagate through time.

    ``dhs`` holds gradients w.r.t. the per-step hidden states (aligned to
    input indices); ``dh_final`` is an extra gradient on the final state.
    Returns (dx, dwx, dwh, db).
    """
    caches, x_shape, _reverse = cache
    B, T, D = x_shape
    H = wh.shape[0]
    dx = np.zeros(x_shape)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dh = np.zeros((B, H)) if dh_final is None else dh_final.copy()
    dc = np.zeros((B, H))
    for step in reversed(caches):
        t, x_t, h_prev, c_prev, i, f, g, o, tanh_c = step
        dh_t = dh + dhs[:, t]
        do = dh_t * tanh_c
        dc_t = dc + dh_t * o * (1.0 - tanh_c * tanh_c)
        di = dc_t * g
        dg = dc_t * i
        df = dc_t * c_prev
        dc = dc_t * f
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dwx += x_t.T @ dz
        dwh += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx[:, t] = dz @ wx.T
        dh = dz @ wh.T
    return dx, dwx, dwh, db


# -- softmax cross-entropy -----------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_forward(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy from raw logits via log-sum-exp; returns the loss
    and the gradient w.r.t. logits."""
    B = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    loss = -float(log_probs[np.arange(B), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(B), labels] -= 1.0
    grad /= B
    return loss, grad
