"""Physics-informed losses shared by both model families.

The training objective is the sum of three mean-squared terms: data mismatch,
ODE residual at collocation points, and initial-condition mismatch. The
initial-condition term compares derivative orders 0..order-1, normalizing
order m by omega^m so every summand carries ampere^2 units; without that
normalization the higher-order terms (scale lam * omega^m) dwarf everything
else and wreck the optimization landscape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import (CircuitClass, CircuitParams, LinearOde, SourceWaveform,
                       ode_coefficient_partials, ode_for_class)


@dataclass
class InitialConditions:
    """Prescribed derivatives of I at t0 for orders 0..(ode order - 1)."""

    t0: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()

    @classmethod
    def rest(cls, order: int, t0: float = 0.0) -> "InitialConditions":
        return cls(t0=t0, values=np.zeros(order))


@dataclass
class LossConfig:
    """Weights, collocation grid, optional data block and initial conditions.

    Target (fine-tuning) mode has no data block; the loss is then physics +
    initial conditions only.
    """

    collocation_times: np.ndarray
    ics: InitialConditions
    data_times: np.ndarray | None = None
    data_values: np.ndarray | None = None
    w_data: float = 1.0
    w_pde: float = 1.0
    w_ic: float = 1.0

    def __post_init__(self):
        self.collocation_times = np.asarray(self.collocation_times, dtype=float)
        if self.collocation_times.size == 0:
            raise ValueError("collocation set must be nonempty")
        if min(self.w_data, self.w_pde, self.w_ic) < 0:
            raise ValueError("loss weights must be nonnegative")
        if (self.data_times is None) != (self.data_values is None):
            raise ValueError("data times and values must be given together")
        if self.data_times is not None:
            self.data_times = np.asarray(self.data_times, dtype=float)
            self.data_values = np.asarray(self.data_values, dtype=float)
            if self.data_times.shape != self.data_values.shape:
                raise ValueError("data times and values must have equal length")

    @property
    def has_data(self) -> bool:
        return self.data_times is not None


@dataclass
class LossBreakdown:
    total: float
    data: float
    pde: float
    ic: float


def ic_scale(ode: LinearOde, source: SourceWaveform) -> np.ndarray:
    """Per-order normalization omega^m making every IC mismatch ampere-valued."""
    return source.omega ** np.arange(ode.order)


def residual(model, ode: LinearOde, source: SourceWaveform, t) -> np.ndarray:
    """r(t) = sum_k a_k d^k I_model/dt^k - sum_k g_k d^k V/dt^k."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    stack = model.derivative_stack(t, ode.order)
    return ode.lhs_array() @ stack - ode.forcing_signal(source, t)


def _ic_mismatch(model, ode, source, ics: InitialConditions) -> np.ndarray:
    order = ode.order
    if len(ics.values) != order:
        raise ValueError(f"need {order} initial-condition values, got {len(ics.values)}")
    st = model.derivative_stack(np.array([ics.t0]), order)[:order, 0]
    return (st - ics.values) / ic_scale(ode, source)


def total_loss(model, config: LossConfig, ode: LinearOde, source: SourceWaveform) -> LossBreakdown:
    tcol = config.collocation_times
    stack = model.derivative_stack(tcol, ode.order)
    r = ode.lhs_array() @ stack - ode.forcing_signal(source, tcol)
    l_pde = float(np.mean(r ** 2))
    l_data = 0.0
    if config.has_data:
        if config.data_times is tcol or np.array_equal(config.data_times, tcol):
            pred = stack[0]
        else:
            pred = model.derivative_stack(config.data_times, 0)[0]
        l_data = float(np.mean((pred - config.data_values) ** 2))
    eic = _ic_mismatch(model, ode, source, config.ics)
    l_ic = float(np.mean(eic ** 2))
    tot = config.w_data * l_data + config.w_pde * l_pde + config.w_ic * l_ic
    return LossBreakdown(total=tot, data=l_data, pde=l_pde, ic=l_ic)


def loss_gradient(model, config: LossConfig, ode: LinearOde, source: SourceWaveform) -> np.ndarray:
    """Exact gradient of total_loss over the model's packed parameter vector.

    Cotangents with respect to the derivative stacks are assembled per term and
    pulled back through the model's reverse pass.
    """
    K = ode.order
    lhs = ode.lhs_array()
    tcol = config.collocation_times
    M = len(tcol)
    r = residual(model, ode, source, tcol)
    bar = config.w_pde * (2.0 / M) * np.outer(lhs, r)
    grad = model.backprop_stack(tcol, bar)
    if config.has_data:
        pred = model.derivative_stack(config.data_times, 0)[0]
        e = pred - config.data_values
        bar_d = (config.w_data * (2.0 / len(e)) * e)[None, :]
        grad = grad + model.backprop_stack(config.data_times, bar_d)
    scale = ic_scale(ode, source)
    eic = _ic_mismatch(model, ode, source, config.ics)
    bar_ic = np.zeros((K + 1, 1))
    bar_ic[:K, 0] = config.w_ic * (2.0 / K) * eic / scale
    grad = grad + model.backprop_stack(np.array([config.ics.t0]), bar_ic)
    return grad


# Kept as an explicit name for the Fourier family; the machinery is shared.
loss_gradient_fourier = loss_gradient


def phi_gradient(model, config: LossConfig, klass: CircuitClass, phi: CircuitParams,
                 free=("R",)) -> dict:
    """Gradient of the (weighted) physics term over a subset of {R, L, C}.

    Chains through the per-class coefficient maps; the data and IC terms carry
    no R/L/C dependence. Raises if any free parameter is non-positive.
    """
    if not free:
        raise ValueError("free parameter set must be nonempty")
    for p in free:
        if p not in ("R", "L", "C"):
            raise ValueError(f"unsupported free parameter {p!r}")
        if getattr(phi, p) <= 0:
            raise ValueError(f"{p} left the positive domain: {getattr(phi, p)}")
    ode = ode_for_class(klass, phi)
    source = SourceWaveform.from_params(phi)
    tcol = config.collocation_times
    stack = model.derivative_stack(tcol, ode.order)
    r = ode.lhs_array() @ stack - ode.forcing_signal(source, tcol)
    partials = ode_coefficient_partials(klass, phi)
    out = {}
    for p in free:
        dr = partials[p] @ stack
        out[p] = config.w_pde * 2.0 * float(np.mean(r * dr))
    return out


def batch_loss_gradient(model, ode: LinearOde, source: SourceWaveform,
                        t_batch: np.ndarray, y_batch: np.ndarray | None,
                        ics: InitialConditions,
                        w_data: float = 1.0, w_pde: float = 1.0, w_ic: float = 1.0):
    """Fused loss+gradient on one minibatch where the data labels (if any) live
    on the collocation times themselves. Used by the training loop."""
    K = ode.order
    lhs = ode.lhs_array()
    M = len(t_batch)
    stack = model.derivative_stack(t_batch, K)
    r = lhs @ stack - ode.forcing_signal(source, t_batch)
    loss = w_pde * float(np.mean(r ** 2))
    bar = w_pde * (2.0 / M) * np.outer(lhs, r)
    if y_batch is not None:
        e = stack[0] - y_batch
        loss += w_data * float(np.mean(e ** 2))
        bar[0] += w_data * (2.0 / M) * e
    grad = model.backprop_stack(t_batch, bar)
    scale = ic_scale(ode, source)
    eic = _ic_mismatch(model, ode, source, ics)
    loss += w_ic * float(np.mean(eic ** 2))
    bar_ic = np.zeros((K + 1, 1))
    bar_ic[:K, 0] = w_ic * (2.0 / K) * eic / scale
    grad = grad + model.backprop_stack(np.array([ics.t0]), bar_ic)
    return loss, grad
