"""Model specification, flat weight storage and architecture dispatch."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import WheelSpeedError

ARCHS = ("GRU", "LSTM", "TCN")


@dataclass(frozen=True)
class ModelSpec:
    arch: str = "GRU"
    input_size: int = 5
    output_size: int = 2
    hidden_size: int = 32
    tcn_layers: int = 5
    kernel_size: int = 3
    seed: int = 0

    def __post_init__(self):
        arch = self.arch.upper()
        object.__setattr__(self, "arch", arch)
        if arch not in ARCHS:
            raise WheelSpeedError("invalid-spec", f"arch={self.arch!r}")
        for name in ("input_size", "output_size", "hidden_size"):
            if int(getattr(self, name)) < 1:
                raise WheelSpeedError("invalid-spec", f"{name} must be >= 1")
        if arch == "TCN" and (self.tcn_layers < 1 or self.kernel_size < 2):
            raise WheelSpeedError("invalid-spec", "TCN needs tcn_layers >= 1 and kernel_size >= 2")

    @property
    def receptive_field(self):
        """Past samples (including the current one) that influence an output."""
        if self.arch != "TCN":
            return None
        return (self.kernel_size - 1) * (2**self.tcn_layers - 1) + 1

    def to_dict(self):
        return asdict(self)


class WeightSet:
    """Flat parameter vector with a named layout.

    ``layout`` maps each name to ``(offset, shape)``; entries are contiguous in
    insertion order. :meth:`view` returns writable views into ``vector``.
    """

    def __init__(self, layout, vector=None):
        self.layout = {}
        offset = 0
        for name, shape in layout:
            shape = tuple(int(s) for s in shape)
            self.layout[name] = (offset, shape)
            offset += int(np.prod(shape))
        self.size = offset
        if vector is None:
            vector = np.zeros(offset)
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (offset,):
            raise WheelSpeedError("weight-shape-mismatch", f"vector has {vector.shape}, layout needs ({offset},)")
        self.vector = vector

    def view(self, name):
        off, shape = self.layout[name]
        return self.vector[off:off + int(np.prod(shape))].reshape(shape)

    def span(self, first, last, shape):
        """View over consecutive entries ``first..last`` reshaped to ``shape``."""
        start = self.layout[first][0]
        off, sh = self.layout[last]
        return self.vector[start:off + int(np.prod(sh))].reshape(shape)

    def views(self):
        return {n: self.view(n) for n in self.layout}

    def copy(self):
        return WeightSet(self.layout_items(), self.vector.copy())

    def layout_items(self):
        return [(n, s) for n, (_, s) in self.layout.items()]

    def zeros_like(self):
        return WeightSet(self.layout_items())


def _arch_module(spec):
    from . import gru, lstm, tcn

    return {"GRU": gru, "LSTM": lstm, "TCN": tcn}[spec.arch]


def layout(spec: ModelSpec):
    return _arch_module(spec).layout(spec)


def init_weights(spec: ModelSpec) -> WeightSet:
    """Orthogonal recurrent matrices, uniform(+-1/sqrt(fan_in)) input and head
    matrices, zero biases."""
    ws = WeightSet(layout(spec))
    rng = np.random.default_rng(spec.seed)
    _arch_module(spec).initialize(spec, ws, rng)
    return ws


def check_weights(spec: ModelSpec, weights: WeightSet):
    expected = layout(spec)
    if weights.layout_items() != [(n, tuple(s)) for n, s in expected]:
        raise WheelSpeedError("weight-shape-mismatch", f"weights do not match {spec.arch} layout")


def _as_batch(x, size, name):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != size:
        raise WheelSpeedError("weight-shape-mismatch", f"{name} shape {x.shape} incompatible with width {size}")
    return x, single


def forward(spec: ModelSpec, weights: WeightSet, x):
    """Outputs for every timestep of ``x`` shaped ``(T, in)`` or ``(B, T, in)``."""
    check_weights(spec, weights)
    xb, single = _as_batch(x, spec.input_size, "x")
    if xb.shape[1] < 1:
        raise WheelSpeedError("empty-input")
    y, _ = _arch_module(spec).forward(spec, weights, xb)
    return y[0] if single else y


def backward(spec: ModelSpec, weights: WeightSet, x, target, washout=0, mask=None):
    """MSE over timesteps ``>= washout`` and output dims, and its gradient.

    ``mask`` optionally weights individual ``(B, T)`` timesteps (padding).
    Returns ``(loss, grad)`` with ``grad`` a flat vector aligned with
    ``weights.vector``.
    """
    check_weights(spec, weights)
    xb, single = _as_batch(x, spec.input_size, "x")
    yb = np.asarray(target, dtype=np.float64)
    if single:
        yb = yb[None]
    if yb.shape[:2] != xb.shape[:2]:
        raise WheelSpeedError("target-length-mismatch", f"x {xb.shape[:2]} vs target {yb.shape[:2]}")
    mod = _arch_module(spec)
    yhat, cache = mod.forward(spec, weights, xb)
    w = np.zeros(xb.shape[:2])
    w[:, washout:] = 1.0
    if mask is not None:
        w *= np.asarray(mask, dtype=float).reshape(w.shape)
    count = w.sum() * spec.output_size
    if count == 0:
        return 0.0, np.zeros(weights.size)
    resid = (yhat - yb) * w[..., None]
    loss = float(np.sum(resid * (yhat - yb)) / count)
    dy = 2.0 * resid / count
    grad = mod.backward(spec, weights, cache, dy)
    return loss, grad.vector


# ---------------------------------------------------------------------------
# operation counts


def flops_per_step(spec: ModelSpec) -> int:
    """Floating-point operations per timestep (multiply and add counted separately).

    * GRU: ``2*3*(h*x + h*h) + 15*h + 2*h*o``
    * LSTM: ``2*4*(h*x + h*h) + 17*h + 2*h*o``; the 17h elementwise term is
      4h bias adds, 4h gate nonlinearities (one op each), 3h for the cell
      update ``f*c + i*g``, 1h for ``tanh(c)``, 1h for ``o*tanh(c)`` and 4h for
      the recurrent pre-activation sums.
    * TCN: per layer ``2*k*C_in*C_out`` convolution, ``C_out`` bias, ``C_out``
      ReLU and ``C_out`` residual add, plus ``2*C_in*C_out`` for a 1x1
      projection when channel counts differ; head ``2*C*o``.

    The GRU and LSTM heads count multiply-adds only (no bias add).
    """
    h, x, o = spec.hidden_size, spec.input_size, spec.output_size
    if spec.arch == "GRU":
        return 2 * 3 * (h * x + h * h) + 15 * h + 2 * h * o
    if spec.arch == "LSTM":
        return 2 * 4 * (h * x + h * h) + 17 * h + 2 * h * o
    total, c_in = 0, x
    for _ in range(spec.tcn_layers):
        total += 2 * spec.kernel_size * c_in * h + 3 * h
        if c_in != h:
            total += 2 * c_in * h
        c_in = h
    return total + 2 * h * o


def ecu_budget(flops_per_step, rate, clock, flops_per_cycle=1.0):
    """Fraction of processor throughput used: ``flops * rate / (clock * flops_per_cycle)``."""
    for name, val in (("flops_per_step", flops_per_step), ("rate", rate), ("clock", clock),
                      ("flops_per_cycle", flops_per_cycle)):
        if not val > 0:
            raise WheelSpeedError("invalid-budget", f"{name} must be > 0")
    return flops_per_step * rate / (clock * flops_per_cycle)
