import numpy as np


def sigmoid(a):
    # tanh form cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def uniform_fan_in(rng, shape, fan_in=None):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); fan_in defaults to the last axis."""
    fan_in = shape[-1] if fan_in is None else fan_in
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
