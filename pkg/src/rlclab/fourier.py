"""Shallow Fourier network with cosine activation and closed-form derivatives.

The model is I(t) = alpha0 + sum_k lam_k * cos(w_k * t + b_k). Every time
derivative is again a finite cosine/sine sum, so derivatives of any order and
all parameter gradients are exact, with no autodiff machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .serialize import CheckpointError, read_checkpoint, write_checkpoint

MAX_DERIVATIVE_ORDER = 4

# Sign of the n-th derivative of cos: (-1)^(n/2) for even n (cos term),
# (-1)^ceil(n/2) for odd n (sin term).
_COS_SIGN = (1.0, -1.0, -1.0, 1.0, 1.0)
# Same pattern for sin (used when a neuron is expressed as A*cos + B*sin).
_SIN_SIGN = (1.0, 1.0, -1.0, -1.0, 1.0)

# Initialization spread of the hidden frequencies and the 1/N amplitude
# variance constant, both taken from the Fourier-network initialization scheme.
FREQ_INIT_VARIANCE = 5.0
AMP_INIT_VARIANCE_SCALE = 0.9703


def _check_order(n: int) -> None:
    if not 0 <= n <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order must be in [0, {MAX_DERIVATIVE_ORDER}], got {n}")


@dataclass
class FourierNet:
    """Parameters: frequencies w (rad/s), phases b (rad), amplitudes lam (A), offset alpha0 (A)."""

    w: np.ndarray
    b: np.ndarray
    lam: np.ndarray
    alpha0: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if not (self.w.shape == self.b.shape == self.lam.shape) or self.w.ndim != 1:
            raise ValueError("w, b, lam must be 1-D arrays of equal length")

    @property
    def n_neurons(self) -> int:
        return len(self.w)

    def count_params(self) -> int:
        return 3 * self.n_neurons + 1

    @classmethod
    def init(cls, n_neurons: int, seed=None) -> "FourierNet":
        """Zero phases and offset; w ~ N(0, 5); lam ~ N(0, 0.9703/N). Seeded PCG64."""
        if n_neurons < 1:
            raise ValueError("need at least one neuron")
        rng = np.random.default_rng(seed)
        w = rng.normal(0.0, np.sqrt(FREQ_INIT_VARIANCE), n_neurons)
        lam = rng.normal(0.0, np.sqrt(AMP_INIT_VARIANCE_SCALE / n_neurons), n_neurons)
        return cls(w=w, b=np.zeros(n_neurons), lam=lam, alpha0=0.0)

    def copy(self) -> "FourierNet":
        return FourierNet(self.w.copy(), self.b.copy(), self.lam.copy(), self.alpha0)

    # ---- evaluation -------------------------------------------------------

    def eval(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phi = np.outer(t, self.w) + self.b
        out = np.cos(phi) @ self.lam + self.alpha0
        return out if out.size > 1 else float(out[0])

    def derivative(self, n: int, t):
        """n-th time derivative, closed form. alpha0 contributes only at n = 0."""
        _check_order(n)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.derivative_stack(t, n)[n]
        return out if out.size > 1 else float(out[0])

    def derivative_stack(self, t: np.ndarray, max_order: int) -> np.ndarray:
        """Stack of derivatives 0..max_order, shape (max_order+1, len(t))."""
        _check_order(max_order)
        t = np.asarray(t, dtype=float)
        phi = np.outer(t, self.w) + self.b
        cos_phi, sin_phi = np.cos(phi), np.sin(phi)
        out = np.empty((max_order + 1, len(t)))
        for n in range(max_order + 1):
            tri = cos_phi if n % 2 == 0 else sin_phi
            out[n] = tri @ (self.lam * self.w ** n) * _COS_SIGN[n]
        out[0] += self.alpha0
        return out

    # ---- exact gradients --------------------------------------------------

    def param_jacobian(self, n: int, t):
        """Partials of derivative(n, t) w.r.t. (w, b, lam, alpha0).

        Returns dict with arrays of shape (len(t), N) for w/b/lam and (len(t),)
        for alpha0.
        """
        _check_order(n)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phi = np.outer(t, self.w) + self.b
        s = _COS_SIGN[n]
        tri = np.cos(phi) if n % 2 == 0 else np.sin(phi)
        tri_d = -np.sin(phi) if n % 2 == 0 else np.cos(phi)  # d tri / d phi
        wn = self.w ** n
        d_lam = s * wn * tri
        d_b = s * wn * self.lam * tri_d
        dwn = n * self.w ** (n - 1) if n > 0 else np.zeros_like(self.w)
        d_w = s * self.lam * (dwn * tri + wn * t[:, None] * tri_d)
        d_alpha0 = np.ones(len(t)) if n == 0 else np.zeros(len(t))
        return {"w": d_w, "b": d_b, "lam": d_lam, "alpha0": d_alpha0}

    def backprop_stack(self, t: np.ndarray, stack_bar: np.ndarray) -> np.ndarray:
        """Gradient of sum_n <stack_bar[n], derivative n at t> w.r.t. packed params.

        This is the reverse-mode pairing of derivative_stack; with stack_bar
        holding d(loss)/d(derivative values) it yields the exact loss gradient.
        """
        t = np.asarray(t, dtype=float)
        max_order = stack_bar.shape[0] - 1
        _check_order(max_order)
        phi = np.outer(t, self.w) + self.b
        cos_phi, sin_phi = np.cos(phi), np.sin(phi)
        g_w = np.zeros_like(self.w)
        g_b = np.zeros_like(self.b)
        g_lam = np.zeros_like(self.lam)
        g_a0 = 0.0
        for n in range(max_order + 1):
            bar = stack_bar[n]
            if not np.any(bar):
                continue
            s = _COS_SIGN[n]
            tri = cos_phi if n % 2 == 0 else sin_phi
            tri_d = -sin_phi if n % 2 == 0 else cos_phi
            wn = self.w ** n
            bt = bar @ tri
            btd = bar @ tri_d
            g_lam += s * wn * bt
            g_b += s * wn * self.lam * btd
            dwn = n * self.w ** (n - 1) if n > 0 else 0.0
            g_w += s * self.lam * (dwn * bt + wn * ((bar * t) @ tri_d))
            if n == 0:
                g_a0 += bar.sum()
        return pack_params(g_w, g_b, g_lam, g_a0)

    # ---- flat parameter vector -------------------------------------------

    def to_vector(self) -> np.ndarray:
        return pack_params(self.w, self.b, self.lam, self.alpha0)

    def from_vector(self, vec: np.ndarray) -> "FourierNet":
        n = self.n_neurons
        return FourierNet(vec[:n].copy(), vec[n:2 * n].copy(), vec[2 * n:3 * n].copy(),
                          float(vec[3 * n]))


def pack_params(w, b, lam, alpha0) -> np.ndarray:
    return np.concatenate([w, b, lam, [alpha0]])


def save_checkpoint(net: FourierNet, path: str, meta: dict | None = None) -> None:
    payload = {
        "N": net.n_neurons,
        "W": list(net.w),
        "b": list(net.b),
        "lambda": list(net.lam),
        "alpha0": net.alpha0,
    }
    write_checkpoint(path, "fourier", payload, meta)


def load_checkpoint(path: str):
    doc = read_checkpoint(path, "fourier")
    try:
        net = FourierNet(np.array(doc["W"]), np.array(doc["b"]),
                         np.array(doc["lambda"]), float(doc["alpha0"]))
        if len(net.w) != doc["N"]:
            raise CheckpointError("stored N inconsistent with parameter arrays")
    except KeyError as e:
        raise CheckpointError(f"checkpoint missing field {e}") from None
    return net, doc.get("meta", {})
