"""Ground-truth generation: RK4 integration of the circuit ODEs plus a
closed-form steady-state generator, dataset splitting and CSV storage.

RK4 on the companion form is the default oracle. The printed class-3 equation
has right-half-plane characteristic roots, so its initial-value solution grows
without bound and overflows float64 well before t = 1 s; for such ODEs the
bounded particular (phasor) solution is generated in closed form instead and
tagged in the dataset metadata.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .circuits import CircuitClass, CircuitParams, LinearOde, SourceWaveform, ode_for_class


class DivergenceError(RuntimeError):
    """Raised when integration produces non-finite state."""


@dataclass
class CompanionSystem:
    """First-order form of a LinearOde with states (I, I', ..., I^(n-1))."""

    ode: LinearOde
    source: SourceWaveform

    def __post_init__(self):
        self._lhs = self.ode.lhs_array()
        self._an = self._lhs[-1]

    @property
    def n_states(self) -> int:
        return self.ode.order

    def matrix(self) -> np.ndarray:
        n = self.n_states
        A = np.zeros((n, n))
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -self._lhs[:-1] / self._an
        return A

    def deriv(self, t: float, x: np.ndarray) -> np.ndarray:
        u = float(self.ode.forcing_signal(self.source, t))
        dx = np.empty_like(x)
        dx[:-1] = x[1:]
        dx[-1] = (u - np.dot(self._lhs[:-1], x)) / self._an
        return dx

    def is_stable(self, tol: float = 0.0) -> bool:
        return np.linalg.eigvals(self.matrix()).real.max() <= tol


def to_companion(ode: LinearOde, source: SourceWaveform) -> CompanionSystem:
    return CompanionSystem(ode=ode, source=source)


@dataclass
class Dataset:
    """Timestamped load-current samples with provenance metadata."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def restrict(self, t_min=-np.inf, t_max=np.inf) -> "Dataset":
        m = (self.times >= t_min) & (self.times <= t_max)
        return Dataset(self.times[m], self.values[m], dict(self.meta))

    def initial_state(self) -> np.ndarray | None:
        ic = self.meta.get("ic")
        return None if ic is None else np.asarray(ic, dtype=float)


def _time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    n_full = int(np.floor((t1 - t0) / dt * (1 + 1e-12)))
    ts = t0 + dt * np.arange(n_full + 1)
    if t1 - ts[-1] > 1e-9 * dt:
        ts = np.append(ts, t1)  # shortened final step lands exactly on t1
    else:
        ts[-1] = t1
    return ts


def rk4_trajectory(sys: CompanionSystem, x0: np.ndarray, t0: float, t1: float, dt: float):
    """Classical fixed-step RK4. Returns (times, states) with states[i] at times[i]."""
    ts = _time_grid(t0, t1, dt)
    n = sys.n_states
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},)")
    out = np.empty((len(ts), n))
    out[0] = x
    for i in range(len(ts) - 1):
        t, h = ts[i], ts[i + 1] - ts[i]
        k1 = sys.deriv(t, x)
        k2 = sys.deriv(t + h / 2, x + h / 2 * k1)
        k3 = sys.deriv(t + h / 2, x + h / 2 * k2)
        k4 = sys.deriv(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state became non-finite at t={ts[i + 1]:.6g}")
        out[i + 1] = x
    return ts, out


def integrate_rk4(sys: CompanionSystem, x0, t0: float, t1: float, dt: float,
                  meta: dict | None = None) -> Dataset:
    ts, xs = rk4_trajectory(sys, np.asarray(x0, dtype=float), t0, t1, dt)
    m = dict(meta or {})
    m.setdefault("generator", "rk4")
    m.setdefault("t0", t0)
    m.setdefault("t1", t1)
    m.setdefault("dt", dt)
    m.setdefault("ic", list(np.asarray(x0, dtype=float)))
    return Dataset(ts, xs[:, 0], m)


def steady_state_values(ode: LinearOde, source: SourceWaveform, t, order: int = 0):
    """Derivatives of the particular (phasor) solution of the driven ODE.

    The particular solution is I_p(t) = Im(Vmax * H(j*omega) * e^{j*omega*t}),
    so its m-th derivative just picks up a factor (j*omega)^m.
    """
    H = ode.transfer(1j * source.omega)
    phasor = source.Vmax * H * (1j * source.omega) ** order
    return np.imag(phasor * np.exp(1j * source.omega * np.asarray(t, dtype=float)))


def steady_state_dataset(ode: LinearOde, source: SourceWaveform, t0: float, t1: float,
                         dt: float, meta: dict | None = None) -> Dataset:
    ts = _time_grid(t0, t1, dt)
    vals = steady_state_values(ode, source, ts)
    ic = [float(steady_state_values(ode, source, t0, order=m)) for m in range(ode.order)]
    m = dict(meta or {})
    m.setdefault("generator", "steady-state")
    m.setdefault("t0", t0)
    m.setdefault("t1", t1)
    m.setdefault("dt", dt)
    m.setdefault("ic", ic)
    return Dataset(ts, vals, m)


def simulate_circuit(klass: CircuitClass, phi: CircuitParams, t0: float, t1: float,
                     dt: float = 1e-4, x0=None, generator: str = "auto",
                     seed=None) -> Dataset:
    """Dataset for a circuit class: RK4 from rest, or the phasor solution when
    the printed ODE is unstable (generator='auto')."""
    ode = ode_for_class(klass, phi)
    source = SourceWaveform.from_params(phi)
    sys = to_companion(ode, source)
    meta = {"class": klass.value, "phi": phi.to_dict(), "seed": seed}
    if generator == "auto":
        generator = "rk4" if sys.is_stable() else "steady-state"
    if generator == "rk4":
        x0 = np.zeros(sys.n_states) if x0 is None else np.asarray(x0, dtype=float)
        return integrate_rk4(sys, x0, t0, t1, dt, meta)
    if generator == "steady-state":
        return steady_state_dataset(ode, source, t0, t1, dt, meta)
    raise ValueError(f"unknown generator {generator!r}")


def split_dataset(ds: Dataset, fraction: float, seed=None, mode: str = "random",
                  t_cut: float | None = None):
    """Split into (train, test). Random mode shuffles then partitions; temporal
    mode puts t <= t_cut into train. Both halves stay sorted by time."""
    n = len(ds)
    if mode == "random":
        if not 0.0 < fraction < 1.0:
            raise ValueError("fraction must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        n_train = int(round(fraction * n))
        tr = np.sort(perm[:n_train])
        te = np.sort(perm[n_train:])
    elif mode == "temporal":
        if t_cut is None:
            raise ValueError("temporal mode needs t_cut")
        tr = np.flatnonzero(ds.times <= t_cut)
        te = np.flatnonzero(ds.times > t_cut)
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    if len(tr) == 0 or len(te) == 0:
        raise ValueError("split produced an empty partition")
    meta_tr = dict(ds.meta, split="train", split_mode=mode, split_seed=seed)
    meta_te = dict(ds.meta, split="test", split_mode=mode, split_seed=seed)
    return (Dataset(ds.times[tr], ds.values[tr], meta_tr),
            Dataset(ds.times[te], ds.values[te], meta_te))


CSV_HEADER = "t,i_load"


def _sidecar_path(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ".json"


def write_csv(ds: Dataset, path: str) -> None:
    """CSV with full-precision decimal floats plus a metadata sidecar JSON."""
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for t, v in zip(ds.times, ds.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
    with open(_sidecar_path(path), "w") as fh:
        json.dump(ds.meta, fh, indent=1)


def read_csv(path: str) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        times, values = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"malformed row at line {lineno}")
            try:
                times.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError as e:
                raise ValueError(f"malformed row at line {lineno}: {e}") from None
    times = np.asarray(times)
    if len(times) > 1 and not np.all(np.diff(times) > 0):
        raise ValueError("times in CSV are not strictly increasing")
    meta = {}
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            meta = json.load(fh)
    return Dataset(times, np.asarray(values), meta)
