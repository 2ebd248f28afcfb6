"""Single-layer LSTM (input, forget, cell, output gates) with a linear head."""

import numpy as np

from .ops import orthogonal, sigmoid, uniform_fan_in

GATES = "ifgo"


def layout(spec):
    h, x, o = spec.hidden_size, spec.input_size, spec.output_size
    return ([(f"W_{g}", (h, x)) for g in GATES] + [(f"U_{g}", (h, h)) for g in GATES]
            + [(f"b_{g}", (h,)) for g in GATES] + [("W_out", (o, h)), ("b_out", (o,))])


def initialize(spec, ws, rng):
    for g in GATES:
        ws.view(f"W_{g}")[...] = uniform_fan_in(rng, ws.view(f"W_{g}").shape)
        ws.view(f"U_{g}")[...] = orthogonal(rng, spec.hidden_size)
    ws.view("W_out")[...] = uniform_fan_in(rng, ws.view("W_out").shape)


def forward(spec, ws, x):
    B, T, _ = x.shape
    H = spec.hidden_size
    W = ws.span("W_i", "W_o", (4 * H, spec.input_size))
    U = ws.span("U_i", "U_o", (4 * H, H))
    b = ws.span("b_i", "b_o", (4 * H,))
    gx = x @ W.T + b
    hs = np.zeros((B, T + 1, H))
    cs = np.zeros((B, T + 1, H))
    acts = np.empty((B, T, 4 * H))
    tcs = np.empty((B, T, H))
    h, c = hs[:, 0], cs[:, 0]
    for t in range(T):
        a = gx[:, t] + h @ U.T
        act = np.empty_like(a)
        act[:, :2 * H] = sigmoid(a[:, :2 * H])
        act[:, 2 * H:3 * H] = np.tanh(a[:, 2 * H:3 * H])
        act[:, 3 * H:] = sigmoid(a[:, 3 * H:])
        i, f, g, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t + 1], cs[:, t + 1], acts[:, t], tcs[:, t] = h, c, act, tc
    y = hs[:, 1:] @ ws.view("W_out").T + ws.view("b_out")
    return y, (x, hs, cs, acts, tcs)


def backward(spec, ws, cache, dy):
    x, hs, cs, acts, tcs = cache
    B, T, _ = x.shape
    H = spec.hidden_size
    U = ws.span("U_i", "U_o", (4 * H, H))
    grad = ws.zeros_like()
    grad.view("W_out")[...] = np.einsum("bto,bth->oh", dy, hs[:, 1:])
    grad.view("b_out")[...] = dy.sum(axis=(0, 1))
    dh_out = dy @ ws.view("W_out")

    dpre = np.empty((B, T, 4 * H))
    dU = grad.span("U_i", "U_o", (4 * H, H))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dh_out[:, t]
        act, tc = acts[:, t], tcs[:, t]
        i, f, g, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        dc = dc + dh * o * (1.0 - tc * tc)
        da = dpre[:, t]
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H:2 * H] = dc * cs[:, t] * f * (1.0 - f)
        da[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        da[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dU += da.T @ hs[:, t]
        dh = da @ U
        dc = dc * f
    grad.span("W_i", "W_o", (4 * H, spec.input_size))[...] = np.einsum("bth,btx->hx", dpre, x)
    grad.span("b_i", "b_o", (4 * H,))[...] = dpre.sum(axis=(0, 1))
    return grad
