"""Single-layer GRU with a linear head.

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    c = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * c
    y = W_out h' + b_out
"""

import numpy as np

from .ops import orthogonal, sigmoid, uniform_fan_in


def layout(spec):
    h, x, o = spec.hidden_size, spec.input_size, spec.output_size
    return ([(f"W_{g}", (h, x)) for g in "zrh"] + [(f"U_{g}", (h, h)) for g in "zrh"]
            + [(f"b_{g}", (h,)) for g in "zrh"] + [("W_out", (o, h)), ("b_out", (o,))])


def initialize(spec, ws, rng):
    for g in "zrh":
        ws.view(f"W_{g}")[...] = uniform_fan_in(rng, ws.view(f"W_{g}").shape)
        ws.view(f"U_{g}")[...] = orthogonal(rng, spec.hidden_size)
    ws.view("W_out")[...] = uniform_fan_in(rng, ws.view("W_out").shape)


def _blocks(spec, ws):
    h, x = spec.hidden_size, spec.input_size
    W = ws.span("W_z", "W_h", (3 * h, x))
    U = ws.span("U_z", "U_h", (3 * h, h))
    b = ws.span("b_z", "b_h", (3 * h,))
    return W, U, b


def forward(spec, ws, x):
    B, T, _ = x.shape
    H = spec.hidden_size
    W, U, b = _blocks(spec, ws)
    Uzr, Uh = U[:2 * H], U[2 * H:]
    gx = x @ W.T + b
    hs = np.zeros((B, T + 1, H))
    zs = np.empty((B, T, H))
    rs = np.empty((B, T, H))
    cs = np.empty((B, T, H))
    h = hs[:, 0]
    for t in range(T):
        g = gx[:, t]
        zr = sigmoid(g[:, :2 * H] + h @ Uzr.T)
        z, r = zr[:, :H], zr[:, H:]
        c = np.tanh(g[:, 2 * H:] + (r * h) @ Uh.T)
        h = (1.0 - z) * h + z * c
        hs[:, t + 1], zs[:, t], rs[:, t], cs[:, t] = h, z, r, c
    y = hs[:, 1:] @ ws.view("W_out").T + ws.view("b_out")
    return y, (x, hs, zs, rs, cs)


def backward(spec, ws, cache, dy):
    x, hs, zs, rs, cs = cache
    B, T, _ = x.shape
    H = spec.hidden_size
    W, U, b = _blocks(spec, ws)
    Uz, Ur, Uh = U[:H], U[H:2 * H], U[2 * H:]
    grad = ws.zeros_like()
    Wout = ws.view("W_out")
    grad.view("W_out")[...] = np.einsum("bto,bth->oh", dy, hs[:, 1:])
    grad.view("b_out")[...] = dy.sum(axis=(0, 1))
    dh_out = dy @ Wout

    dpre = np.empty((B, T, 3 * H))
    dU = grad.span("U_z", "U_h", (3 * H, H))
    dh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dh_out[:, t]
        h_prev = hs[:, t]
        z, r, c = zs[:, t], rs[:, t], cs[:, t]
        da_h = dh * z * (1.0 - c * c)
        da_z = dh * (c - h_prev) * z * (1.0 - z)
        drh = da_h @ Uh
        da_r = drh * h_prev * r * (1.0 - r)
        dpre[:, t, :H], dpre[:, t, H:2 * H], dpre[:, t, 2 * H:] = da_z, da_r, da_h
        dU[2 * H:] += da_h.T @ (r * h_prev)
        dU[:H] += da_z.T @ h_prev
        dU[H:2 * H] += da_r.T @ h_prev
        dh = dh * (1.0 - z) + drh * r + da_z @ Uz + da_r @ Ur
    grad.span("W_z", "W_h", (3 * H, spec.input_size))[...] = np.einsum("bth,btx->hx", dpre, x)
    grad.span("b_z", "b_h", (3 * H,))[...] = dpre.sum(axis=(0, 1))
    return grad
