"""Rectified Adam and the cosine-annealing schedule."""

import math

import numpy as np

from ..errors import DivergenceError, WheelSpeedError


class RAdam:
    """Rectified Adam over a flat parameter vector (updated in place).

    While the variance of the adaptive step is intractable (``rho_t <= 4``)
    the update is plain bias-corrected momentum; afterwards the adaptive step
    is scaled by the rectification term ``r_t``. ``weight_decay`` is applied
    decoupled from the gradient.
    """

    def __init__(self, params, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = params
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = np.zeros_like(params)
        self.v = np.zeros_like(params)
        self.t = 0
        self.rho_inf = 2.0 / (1.0 - self.beta2) - 1.0

    def rho(self, t):
        b2t = self.beta2**t
        return self.rho_inf - 2.0 * t * b2t / (1.0 - b2t)

    def step(self, grad, lr):
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("non-finite-gradient", f"at step {self.t + 1}", index=self.t + 1)
        self.t += 1
        t, b1, b2 = self.t, self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * grad
        self.v *= b2
        self.v += (1.0 - b2) * grad * grad
        m_hat = self.m / (1.0 - b1**t)
        if self.weight_decay:
            self.params -= lr * self.weight_decay * self.params
        rho_t = self.rho(t)
        if rho_t > 4.0:
            r_t = math.sqrt((rho_t - 4.0) * (rho_t - 2.0) * self.rho_inf
                            / ((self.rho_inf - 4.0) * (self.rho_inf - 2.0) * rho_t))
            v_hat = np.sqrt(self.v / (1.0 - b2**t))
            self.params -= lr * r_t * m_hat / (v_hat + self.eps)
        else:
            self.params -= lr * m_hat
        return self.params

    def state_dict(self):
        return {"m": self.m.copy(), "v": self.v.copy(), "t": self.t}


def cosine_lr(step, total_steps, lr_max, lr_min=0.0):
    if total_steps < 1 or not 0 <= step <= total_steps:
        raise WheelSpeedError("step-out-of-range", f"step={step}, total_steps={total_steps}")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))
