"""LSTM and GRU cells and full-sequence layers with backpropagation through time.

Parameter layout per layer: ``W (G*H, D)`` input weights, ``U (G*H, H)``
recurrent weights, ``b (G*H,)``. Gate blocks are stacked in the order

* LSTM (G=4): input, forget, output, candidate
* GRU  (G=3): update ``z``, reset ``r``, candidate ``n``

GRU follows ``n = tanh(W_n x + U_n (r * h) + b_n)`` and
``h' = z * h + (1 - z) * n``.
"""
import numpy as np

CELLS = ("lstm", "gru")
N_GATES = {"lstm": 4, "gru": 3}


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def check_cell(cell):
    cell = str(cell).lower()
    if cell not in CELLS:
        raise ValueError("unknown cell %r (expected lstm or gru)" % (cell,))
    return cell


def lstm_step(W, U, b, h_prev, c_prev, x):
    H = h_prev.shape[-1]
    a = x @ W.T + h_prev @ U.T + b
    i = sigmoid(a[..., :H])
    f = sigmoid(a[..., H:2 * H])
    o = sigmoid(a[..., 2 * H:3 * H])
    g = np.tanh(a[..., 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, o, g, tc)


def lstm_step_backward(dh, dc, W, U, cache):
    x, h_prev, c_prev, i, f, o, g, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc ** 2)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    da = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g ** 2)], axis=-1)
    dW = da.T @ x
    dU = da.T @ h_prev
    db = da.sum(axis=0)
    return da @ W, da @ U, dc * f, dW, dU, db


def gru_step(W, U, b, h_prev, x):
    H = h_prev.shape[-1]
    ax = x @ W.T + b
    ah = h_prev @ U[:2 * H].T
    z = sigmoid(ax[..., :H] + ah[..., :H])
    r = sigmoid(ax[..., H:2 * H] + ah[..., H:])
    rh = r * h_prev
    n = np.tanh(ax[..., 2 * H:] + rh @ U[2 * H:].T)
    h = z * h_prev + (1.0 - z) * n
    return h, (x, h_prev, z, r, rh, n)


def gru_step_backward(dh, W, U, cache):
    x, h_prev, z, r, rh, n = cache
    H = h_prev.shape[-1]
    dz = dh * (h_prev - n)
    dn = dh * (1.0 - z)
    dan = dn * (1.0 - n ** 2)
    drh = dan @ U[2 * H:]
    dr = drh * h_prev
    daz = dz * z * (1 - z)
    dar = dr * r * (1 - r)
    da_x = np.concatenate([daz, dar, dan], axis=-1)
    da_h = np.concatenate([daz, dar], axis=-1)
    dW = da_x.T @ x
    db = da_x.sum(axis=0)
    dU = np.concatenate([da_h.T @ h_prev, dan.T @ rh], axis=0)
    dh_prev = dh * z + drh * r + da_h @ U[:2 * H]
    return da_x @ W, dh_prev, dW, dU, db


def cell_step(cell, params, h_prev, x, c_prev=None):
    """One recurrent step. ``params = (W, U, b)``.

    Returns ``h`` for GRU and ``(h, c)`` for LSTM.
    """
    cell = check_cell(cell)
    W, U, b = params
    H = U.shape[1]
    if h_prev.shape[-1] != H or x.shape[-1] != W.shape[1] or W.shape[0] != N_GATES[cell] * H:
        raise ValueError("shape mismatch in %s step" % cell)
    if cell == "lstm":
        if c_prev is None:
            raise ValueError("LSTM step needs c_prev")
        h, c, _ = lstm_step(W, U, b, h_prev, c_prev, x)
        return h, c
    return gru_step(W, U, b, h_prev, x)[0]


def rnn_layer_forward(cell, W, U, b, xs):
    """Run a layer over ``xs (B, T, D)`` from zero state; returns ``hs (B, T, H)``."""
    B, T, _ = xs.shape
    H = U.shape[1]
    h = np.zeros((B, H), dtype=xs.dtype)
    c = np.zeros((B, H), dtype=xs.dtype)
    hs = np.empty((B, T, H), dtype=xs.dtype)
    caches = []
    for t in range(T):
        if cell == "lstm":
            h, c, cache = lstm_step(W, U, b, h, c, xs[:, t])
        else:
            h, cache = gru_step(W, U, b, h, xs[:, t])
        hs[:, t] = h
        caches.append(cache)
    return hs, caches


def rnn_layer_backward(cell, W, U, dhs, caches):
    """BPTT. ``dhs (B, T, H)`` is the gradient w.r.t. every output state."""
    B, T, H = dhs.shape
    dW, dU = np.zeros_like(W), np.zeros_like(U)
    db = np.zeros(W.shape[0], dtype=dhs.dtype)
    dxs = np.empty((B, T, W.shape[1]), dtype=dhs.dtype)
    dh_next = np.zeros((B, H), dtype=dhs.dtype)
    dc_next = np.zeros((B, H), dtype=dhs.dtype)
    for t in reversed(range(T)):
        dh = dhs[:, t] + dh_next
        if cell == "lstm":
            dx, dh_next, dc_next, gW, gU, gb = lstm_step_backward(dh, dc_next, W, U, caches[t])
        else:
            dx, dh_next, gW, gU, gb = gru_step_backward(dh, W, U, caches[t])
        dxs[:, t] = dx
        dW += gW
        dU += gU
        db += gb
    return dxs, dW, dU, db
