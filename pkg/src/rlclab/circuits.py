"""Circuit parameter sets, the three circuit-class ODEs, and the sinusoidal source.

The load-current ODEs for the three RLC circuit classes are kept in the dense
form  sum_k a_k d^k I/dt^k = sum_k g_k d^k V/dt^k  so that residual evaluation
is a dot product against a derivative stack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np


class CircuitClass(Enum):
    CLASS1 = 1
    CLASS2 = 2
    CLASS3 = 3

    @classmethod
    def from_int(cls, k: int) -> "CircuitClass":
        return cls(k)


class PresetKind(Enum):
    INITIAL = "initial"    # source-model training settings
    ANALYSIS = "analysis"  # fine-tuning / circuit-analysis settings


@dataclass(frozen=True)
class CircuitParams:
    """Physical circuit parameters: R (ohm), L (henry), C (farad), Vmax (volt), f (hertz)."""

    R: float
    L: float
    C: float
    Vmax: float
    f: float

    def __post_init__(self):
        for name in ("R", "L", "C", "Vmax", "f"):
            v = getattr(self, name)
            if not (v > 0.0 and np.isfinite(v)):
                raise ValueError(f"CircuitParams.{name} must be strictly positive, got {v}")

    @property
    def omega(self) -> float:
        return 2.0 * np.pi * self.f

    def replace(self, **kw) -> "CircuitParams":
        d = self.to_dict()
        d.update(kw)
        return CircuitParams(**d)

    def to_dict(self) -> dict:
        return {"R": self.R, "L": self.L, "C": self.C, "Vmax": self.Vmax, "f": self.f}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitParams":
        return cls(R=d["R"], L=d["L"], C=d["C"], Vmax=d["Vmax"], f=d["f"])

    @classmethod
    def from_json(cls, text: str) -> "CircuitParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SourceWaveform:
    """Sinusoidal voltage source V(t) = Vmax * sin(omega * t)."""

    Vmax: float
    omega: float

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError("omega must be positive")

    @classmethod
    def from_params(cls, phi: CircuitParams) -> "SourceWaveform":
        return cls(Vmax=phi.Vmax, omega=phi.omega)

    def value(self, t):
        return self.Vmax * np.sin(self.omega * np.asarray(t, dtype=float))

    def derivative(self, k: int, t):
        """k-th time derivative of the source. Cycles sin -> cos -> -sin -> -cos."""
        if k < 0:
            raise ValueError("derivative order must be >= 0")
        t = np.asarray(t, dtype=float)
        amp = self.Vmax * self.omega ** k
        cyc = k % 4
        if cyc == 0:
            return amp * np.sin(self.omega * t)
        if cyc == 1:
            return amp * np.cos(self.omega * t)
        if cyc == 2:
            return -amp * np.sin(self.omega * t)
        return -amp * np.cos(self.omega * t)


def source_derivative(wave: SourceWaveform, k: int, t):
    return wave.derivative(k, t)


@dataclass(frozen=True)
class LinearOde:
    """Linear constant-coefficient ODE in the load current.

    lhs[k] multiplies d^k I/dt^k, forcing[k] multiplies d^k V/dt^k. Both are
    dense, indexed by derivative order, zeros included.
    """

    lhs: tuple
    forcing: tuple

    def __post_init__(self):
        if len(self.lhs) < 2:
            raise ValueError("ODE needs order >= 1")
        if self.lhs[-1] == 0.0:
            raise ValueError("leading coefficient must be nonzero")

    @property
    def order(self) -> int:
        return len(self.lhs) - 1

    def lhs_array(self) -> np.ndarray:
        return np.asarray(self.lhs, dtype=float)

    def forcing_array(self) -> np.ndarray:
        return np.asarray(self.forcing, dtype=float)

    def forcing_signal(self, wave: SourceWaveform, t) -> np.ndarray:
        """sum_k g_k d^k V/dt^k evaluated at t."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, gk in enumerate(self.forcing):
            if gk != 0.0:
                out += gk * wave.derivative(k, t)
        return out

    def transfer(self, s: complex) -> complex:
        """I/V transfer function  (sum g_k s^k) / (sum a_k s^k)  at complex s."""
        num = sum(g * s ** k for k, g in enumerate(self.forcing))
        den = sum(a * s ** k for k, a in enumerate(self.lhs))
        return num / den

    def to_dict(self) -> dict:
        return {"order": self.order, "lhs": list(self.lhs), "forcing": list(self.forcing)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LinearOde":
        ode = cls(lhs=tuple(d["lhs"]), forcing=tuple(d["forcing"]))
        if d.get("order") is not None and d["order"] != ode.order:
            raise ValueError("order field inconsistent with lhs length")
        return ode


def ode_for_class(klass: CircuitClass, phi: CircuitParams) -> LinearOde:
    """Load-current ODE of the given circuit class, coefficients as published.

    The class-3 coefficient (L^2*C + 2L) mixes units; it is reproduced verbatim
    because the equation, not the physical circuit, defines the physics loss.
    """
    R, L, C = phi.R, phi.L, phi.C
    if klass is CircuitClass.CLASS1:
        return LinearOde(lhs=(1.0 / C, R, L), forcing=(0.0, 1.0))
    if klass is CircuitClass.CLASS2:
        return LinearOde(lhs=(1.0 / C, 2.0 * R, L, R * L * C), forcing=(0.0, 1.0))
    return LinearOde(
        lhs=(R, L * L * C + 2.0 * L, 3.0 * L * C, 0.0, R * L * L * C * C),
        forcing=(1.0,),
    )


def ode_coefficient_partials(klass: CircuitClass, phi: CircuitParams) -> dict:
    """Partials of the lhs coefficient vector with respect to R, L and C.

    Used by the inverse mode to chain physics-loss gradients through the
    coefficient maps. Forcing coefficients carry no R/L/C dependence.
    """
    R, L, C = phi.R, phi.L, phi.C
    if klass is CircuitClass.CLASS1:
        return {
            "R": np.array([0.0, 1.0, 0.0]),
            "L": np.array([0.0, 0.0, 1.0]),
            "C": np.array([-1.0 / C ** 2, 0.0, 0.0]),
        }
    if klass is CircuitClass.CLASS2:
        return {
            "R": np.array([0.0, 2.0, 0.0, L * C]),
            "L": np.array([0.0, 0.0, 1.0, R * C]),
            "C": np.array([-1.0 / C ** 2, 0.0, 0.0, R * L]),
        }
    return {
        "R": np.array([1.0, 0.0, 0.0, 0.0, L * L * C * C]),
        "L": np.array([0.0, 2.0 * L * C + 2.0, 3.0 * C, 0.0, 2.0 * R * L * C * C]),
        "C": np.array([0.0, L * L, 3.0 * L, 0.0, 2.0 * R * L * L * C]),
    }


# Initial settings used for source-model training and the new values used for
# the circuit-analysis (fine-tuning) experiments, one row per circuit class.
_PRESETS = {
    (CircuitClass.CLASS1, PresetKind.INITIAL): CircuitParams(5.0, 0.005, 0.009, 10.0, 30.0),
    (CircuitClass.CLASS2, PresetKind.INITIAL): CircuitParams(50.0, 0.001, 0.00009, 150.0, 30.0),
    (CircuitClass.CLASS3, PresetKind.INITIAL): CircuitParams(50.0, 0.005, 0.00006, 20.0, 30.0),
    (CircuitClass.CLASS1, PresetKind.ANALYSIS): CircuitParams(10.0, 0.01, 0.0009, 15.0, 25.0),
    (CircuitClass.CLASS2, PresetKind.ANALYSIS): CircuitParams(10.0, 0.0009, 0.00006, 90.0, 40.0),
    (CircuitClass.CLASS3, PresetKind.ANALYSIS): CircuitParams(25.0, 0.009, 0.000065, 100.0, 60.0),
}

# Hidden-layer sizes found optimal per class for the Fourier model.
OPTIMAL_NEURONS = {CircuitClass.CLASS1: 10, CircuitClass.CLASS2: 20, CircuitClass.CLASS3: 10}


def preset(klass: CircuitClass, which: PresetKind = PresetKind.INITIAL) -> CircuitParams:
    return _PRESETS[(klass, which)]
