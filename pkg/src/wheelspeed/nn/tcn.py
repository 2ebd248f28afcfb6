"""Temporal convolutional network: causal dilated convolutions with residual adds.

Layer ``n`` (dilation ``2**n``)::

    pre[t] = sum_j K_n[j] @ u[t - j * 2**n] + c_n      (zero before t = 0)
    u'[t]  = relu(pre[t]) + res(u[t])

``res`` is the identity, or a bias-free 1x1 projection ``P_n`` where the channel
count changes (the first layer, from the input width to ``hidden_size``).
"""

import numpy as np

from .ops import uniform_fan_in


def _channels(spec):
    c_in = spec.input_size
    for _ in range(spec.tcn_layers):
        yield c_in, spec.hidden_size
        c_in = spec.hidden_size


def layout(spec):
    items = []
    for n, (c_in, c_out) in enumerate(_channels(spec)):
        items += [(f"K_{n}", (spec.kernel_size, c_out, c_in)), (f"c_{n}", (c_out,))]
        if c_in != c_out:
            items.append((f"P_{n}", (c_out, c_in)))
    return items + [("W_out", (spec.output_size, spec.hidden_size)), ("b_out", (spec.output_size,))]


def initialize(spec, ws, rng):
    for n, (c_in, c_out) in enumerate(_channels(spec)):
        K = ws.view(f"K_{n}")
        K[...] = uniform_fan_in(rng, K.shape, fan_in=spec.kernel_size * c_in)
        if f"P_{n}" in ws.layout:
            ws.view(f"P_{n}")[...] = uniform_fan_in(rng, (c_out, c_in))
    ws.view("W_out")[...] = uniform_fan_in(rng, ws.view("W_out").shape)


def _shifted(u, lag):
    if lag == 0:
        return u
    out = np.zeros_like(u)
    if lag < u.shape[1]:
        out[:, lag:] = u[:, :-lag]
    return out


def forward(spec, ws, x):
    u = x
    cache = []
    for n in range(spec.tcn_layers):
        d = 2**n
        K = ws.view(f"K_{n}")
        pre = np.broadcast_to(ws.view(f"c_{n}"), u.shape[:2] + (K.shape[1],)).copy()
        for j in range(spec.kernel_size):
            pre += _shifted(u, j * d) @ K[j].T
        res = u @ ws.view(f"P_{n}").T if f"P_{n}" in ws.layout else u
        active = pre > 0
        cache.append((u, active))
        u = np.where(active, pre, 0.0) + res
    y = u @ ws.view("W_out").T + ws.view("b_out")
    return y, (cache, u)


def backward(spec, ws, cache, dy):
    layers, top = cache
    grad = ws.zeros_like()
    grad.view("W_out")[...] = np.einsum("bto,btc->oc", dy, top)
    grad.view("b_out")[...] = dy.sum(axis=(0, 1))
    du = dy @ ws.view("W_out")
    for n in range(spec.tcn_layers - 1, -1, -1):
        u, active = layers[n]
        d = 2**n
        K = ws.view(f"K_{n}")
        T = u.shape[1]
        dpre = np.where(active, du, 0.0)
        grad.view(f"c_{n}")[...] = dpre.sum(axis=(0, 1))
        dK = grad.view(f"K_{n}")
        if f"P_{n}" in ws.layout:
            grad.view(f"P_{n}")[...] = np.einsum("btc,bti->ci", du, u)
            du_in = du @ ws.view(f"P_{n}")
        else:
            du_in = du.copy()
        for j in range(spec.kernel_size):
            lag = j * d
            if lag >= T:
                continue
            dK[j] = np.einsum("btc,bti->ci", dpre[:, lag:], u[:, :T - lag])
            du_in[:, :T - lag] += dpre[:, lag:] @ K[j]
        du = du_in
    return grad
