"""Feed-forward building blocks with hand-written backward passes.

Tensors are NCHW. Every ``*_forward`` returns ``(out, cache)``; the matching
``*_backward`` takes the upstream gradient and the cache.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x, W, b):
    """Valid, stride-1 cross-correlation. ``x (N,C,H,W)``, ``W (F,C,k,k)``."""
    N, C, H, Wd = x.shape
    F, C2, k, _ = W.shape
    if C != C2:
        raise ValueError("shape mismatch: input has %d channels, kernel expects %d" % (C, C2))
    Ho, Wo = H - k + 1, Wd - k + 1
    if Ho < 1 or Wo < 1:
        raise ValueError("input %dx%d smaller than kernel %d" % (H, Wd, k))
    win = sliding_window_view(x, (k, k), axis=(2, 3))            # N,C,Ho,Wo,k,k
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(N * Ho * Wo, C * k * k)
    out = cols @ W.reshape(F, -1).T + b
    out = out.reshape(N, Ho, Wo, F).transpose(0, 3, 1, 2)
    return out, (x.shape, cols, W)


def conv2d_backward(dout, cache, need_dx=True):
    x_shape, cols, W = cache
    N, C, H, Wd = x_shape
    F, _, k, _ = W.shape
    Ho, Wo = dout.shape[2], dout.shape[3]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, F)
    dW = (d2.T @ cols).reshape(W.shape)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dW, db
    dcols = (d2 @ W.reshape(F, -1)).reshape(N, Ho, Wo, C, k, k)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + Ho, j:j + Wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx, dW, db


def pool_output_size(n, k=3, stride=2):
    return (n - k) // stride + 1


def maxpool_forward(x, k=3, stride=2):
    """Max pooling without padding; ties resolve to the first element in row-major window order."""
    N, C, H, W = x.shape
    Ho, Wo = pool_output_size(H, k, stride), pool_output_size(W, k, stride)
    if Ho < 1 or Wo < 1:
        raise ValueError("input %dx%d smaller than pooling window %d" % (H, W, k))
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :Ho, :Wo]
    flat = win.reshape(N, C, Ho, Wo, k * k)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, k, stride)


def maxpool_backward(dout, cache):
    x_shape, arg, k, stride = cache
    Ho, Wo = dout.shape[2], dout.shape[3]
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            mask = arg == i * k + j
            # for a fixed offset, distinct windows hit distinct pixels
            dx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dout * mask
    return dx


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(dout, x):
    return dout * (x > 0)


def dense_forward(x, W, b):
    """``x (N, in) @ W.T + b`` with ``W (out, in)``."""
    if x.shape[-1] != W.shape[1]:
        raise ValueError("shape mismatch: input dim %d, weight expects %d" % (x.shape[-1], W.shape[1]))
    return x @ W.T + b, (x, W)


def dense_backward(dout, cache):
    x, W = cache
    return dout @ W, dout.T @ x, dout.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, y):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    p = softmax(logits)
    n = logits.shape[0]
    idx = np.arange(n)
    loss = float(-np.mean(np.log(np.maximum(p[idx, y], 1e-300))))
    d = p.copy()
    d[idx, y] -= 1.0
    return loss, d / n, p
