"""Tanh multilayer baseline network with truncated Taylor-jet propagation.

Time derivatives up to order 4 come from pushing the jet (t, 1, 0, ...)
through the layers; the tanh recurrence is driven by tanh' = 1 - tanh^2.
Parameter gradients of jet-dependent losses are computed by a hand-written
reverse pass over the same jet arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .serialize import CheckpointError, read_checkpoint, write_checkpoint

MAX_JET_DEGREE = 4
HIDDEN_WIDTH = 50


@dataclass
class TaylorJet:
    """Truncated Taylor coefficients c_0..c_d around the evaluation point.

    The n-th derivative equals n! * c_n.
    """

    coefficients: np.ndarray  # shape (d+1,) or (d+1, M)

    @property
    def degree(self) -> int:
        return self.coefficients.shape[0] - 1

    def derivative(self, n: int):
        if not 0 <= n <= self.degree:
            raise ValueError(f"jet holds orders 0..{self.degree}")
        return math.factorial(n) * self.coefficients[n]

    def value(self):
        return self.coefficients[0]


@dataclass
class Mlp:
    """Scalar-in scalar-out tanh network; weights[i] has shape (fan_out, fan_in)."""

    weights: list
    biases: list

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.weights) - 1

    def count_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def copy(self) -> "Mlp":
        return Mlp([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    # ---- flat parameter vector (same protocol as FourierNet) --------------

    def to_vector(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def from_vector(self, vec: np.ndarray) -> "Mlp":
        Ws, bs, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            Ws.append(vec[pos:pos + W.size].reshape(W.shape).copy())
            pos += W.size
            bs.append(vec[pos:pos + b.size].copy())
            pos += b.size
        return Mlp(Ws, bs)

    # ---- forward / jets ----------------------------------------------------

    def eval(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = t[:, None]
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ W.T + b
            if i < len(self.weights) - 1:
                x = np.tanh(x)
        out = x[:, 0]
        return out if out.size > 1 else float(out[0])

    def derivative_stack(self, t: np.ndarray, max_order: int) -> np.ndarray:
        acts, _ = _jet_forward(self, np.asarray(t, dtype=float), max_order)
        coeff = acts[-1][:, :, 0]
        return coeff * _FACTORIALS[: max_order + 1, None]

    def derivative(self, n: int, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.derivative_stack(t, n)[n]
        return out if out.size > 1 else float(out[0])

    def backprop_stack(self, t: np.ndarray, stack_bar: np.ndarray) -> np.ndarray:
        """Gradient of sum_n <stack_bar[n], n-th derivative at t> over all weights."""
        t = np.asarray(t, dtype=float)
        d = stack_bar.shape[0] - 1
        acts, caches = _jet_forward(self, t, d)
        out_bar = (stack_bar * _FACTORIALS[: d + 1, None])[:, :, None]
        gW, gb = _jet_backward(self, acts, caches, out_bar)
        parts = []
        for W, b in zip(gW, gb):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)


_FACTORIALS = np.array([math.factorial(n) for n in range(MAX_JET_DEGREE + 1)], dtype=float)


def mlp_init(n_hidden: int, seed=None, width: int = HIDDEN_WIDTH) -> Mlp:
    """Glorot-uniform weights, zero biases; n_hidden tanh layers of the given width."""
    if not 1 <= n_hidden <= 5:
        raise ValueError("n_hidden must be between 1 and 5")
    rng = np.random.default_rng(seed)
    sizes = [1] + [width] * n_hidden + [1]
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return Mlp(Ws, bs)


def jet_eval(mlp: Mlp, t, degree: int) -> TaylorJet:
    if not 0 <= degree <= MAX_JET_DEGREE:
        raise ValueError(f"jet degree must be in [0, {MAX_JET_DEGREE}]")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    acts, _ = _jet_forward(mlp, t, degree)
    coeff = acts[-1][:, :, 0]
    if coeff.shape[1] == 1:
        coeff = coeff[:, 0]
    return TaylorJet(coeff)


def _tanh_jet_forward(z: np.ndarray):
    """Apply tanh to a jet; z has shape (d+1, M, n). Returns (y, cache)."""
    d = z.shape[0] - 1
    y = np.empty_like(z)
    w = np.empty_like(z)  # Taylor coefficients of 1 - y^2
    y[0] = np.tanh(z[0])
    w[0] = 1.0 - y[0] * y[0]
    if d >= 1:
        y[1] = w[0] * z[1]
    if d >= 2:
        w[1] = -2.0 * y[0] * y[1]
        y[2] = w[0] * z[2] + 0.5 * w[1] * z[1]
    if d >= 3:
        w[2] = -(2.0 * y[0] * y[2] + y[1] * y[1])
        y[3] = w[0] * z[3] + (2.0 / 3.0) * w[1] * z[2] + (1.0 / 3.0) * w[2] * z[1]
    if d >= 4:
        w[3] = -2.0 * (y[0] * y[3] + y[1] * y[2])
        y[4] = w[0] * z[4] + 0.75 * w[1] * z[3] + 0.5 * w[2] * z[2] + 0.25 * w[3] * z[1]
    return y, (z, y, w)


def _tanh_jet_backward(cache, y_bar: np.ndarray) -> np.ndarray:
    """Adjoint of _tanh_jet_forward; mirrors its steps in reverse order."""
    z, y, w = cache
    d = z.shape[0] - 1
    z_bar = np.zeros_like(z)
    w_bar = np.zeros_like(z)
    yb = y_bar.copy()
    if d >= 4:
        w_bar[0] += yb[4] * z[4]
        z_bar[4] += yb[4] * w[0]
        w_bar[1] += yb[4] * 0.75 * z[3]
        z_bar[3] += yb[4] * 0.75 * w[1]
        w_bar[2] += yb[4] * 0.5 * z[2]
        z_bar[2] += yb[4] * 0.5 * w[2]
        w_bar[3] += yb[4] * 0.25 * z[1]
        z_bar[1] += yb[4] * 0.25 * w[3]
        yb[0] += w_bar[3] * (-2.0) * y[3]
        yb[3] += w_bar[3] * (-2.0) * y[0]
        yb[1] += w_bar[3] * (-2.0) * y[2]
        yb[2] += w_bar[3] * (-2.0) * y[1]
    if d >= 3:
        w_bar[0] += yb[3] * z[3]
        z_bar[3] += yb[3] * w[0]
        w_bar[1] += yb[3] * (2.0 / 3.0) * z[2]
        z_bar[2] += yb[3] * (2.0 / 3.0) * w[1]
        w_bar[2] += yb[3] * (1.0 / 3.0) * z[1]
        z_bar[1] += yb[3] * (1.0 / 3.0) * w[2]
        yb[0] += w_bar[2] * (-2.0) * y[2]
        yb[2] += w_bar[2] * (-2.0) * y[0]
        yb[1] += w_bar[2] * (-2.0) * y[1]
    if d >= 2:
        w_bar[0] += yb[2] * z[2]
        z_bar[2] += yb[2] * w[0]
        w_bar[1] += yb[2] * 0.5 * z[1]
        z_bar[1] += yb[2] * 0.5 * w[1]
        yb[0] += w_bar[1] * (-2.0) * y[1]
        yb[1] += w_bar[1] * (-2.0) * y[0]
    if d >= 1:
        w_bar[0] += yb[1] * z[1]
        z_bar[1] += yb[1] * w[0]
    yb[0] += w_bar[0] * (-2.0) * y[0]
    z_bar[0] += yb[0] * w[0]  # tanh'(z0) = w0
    return z_bar


def _jet_forward(mlp: Mlp, t: np.ndarray, degree: int):
    """Propagate input jets through the network. Activations per layer are
    (d+1, M, width) arrays; affine layers act slice-wise and are exactly
    linear in the jet coefficients."""
    M = len(t)
    x = np.zeros((degree + 1, M, 1))
    x[0, :, 0] = t
    if degree >= 1:
        x[1, :, 0] = 1.0
    acts = [x]
    caches = []
    last = len(mlp.weights) - 1
    for i, (W, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = acts[-1] @ W.T
        z[0] += b
        if i < last:
            y, cache = _tanh_jet_forward(z)
            caches.append(cache)
            acts.append(y)
        else:
            acts.append(z)
    return acts, caches


def _jet_backward(mlp: Mlp, acts, caches, out_bar: np.ndarray):
    gW = [None] * len(mlp.weights)
    gb = [None] * len(mlp.weights)
    bar = out_bar
    for i in range(len(mlp.weights) - 1, -1, -1):
        gW[i] = np.einsum("dmo,dmi->oi", bar, acts[i])
        gb[i] = bar[0].sum(axis=0)
        bar = bar @ mlp.weights[i]
        if i > 0:
            bar = _tanh_jet_backward(caches[i - 1], bar)
    return gW, gb


def save_checkpoint(mlp: Mlp, path: str, meta: dict | None = None) -> None:
    payload = {
        "layer_sizes": mlp.layer_sizes,
        "weights": [W.tolist() for W in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }
    write_checkpoint(path, "mlp", payload, meta)


def load_checkpoint(path: str):
    doc = read_checkpoint(path, "mlp")
    try:
        Ws = [np.array(W, dtype=float) for W in doc["weights"]]
        bs = [np.array(b, dtype=float) for b in doc["biases"]]
        mlp = Mlp(Ws, bs)
        if mlp.layer_sizes != doc["layer_sizes"]:
            raise CheckpointError("stored layer_sizes inconsistent with weights")
    except KeyError as e:
        raise CheckpointError(f"checkpoint missing field {e}") from None
    return mlp, doc.get("meta", {})
