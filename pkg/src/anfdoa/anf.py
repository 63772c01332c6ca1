"""Single-stage complex adaptive notch filter (ANF).

One-pole IIR notch whose centre frequency is adapted sample by sample with a
power-normalised LMS step. The filter is

    x^r_n = x_n + k_a z_n x^r_{n-1}
    y_n   = x^r_n - z_n x^r_{n-1},          z_n = exp(j omega_n)

which has transfer function H(z) = (1 - z_n z^-1) / (1 - k_a z_n z^-1), i.e. a
zero on the unit circle at omega_n and a pole at radius k_a behind it.

Per-sample order: filter, then input-power EMA, then frequency update.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "AnfParams",
    "NotchState",
    "notch_step",
    "ema_power",
    "nlms_gradient",
    "nlms_update",
    "clip_freq",
    "anf_step",
    "initial_state",
    "anf_run",
    "notch_response",
]


@dataclass(frozen=True)
class AnfParams:
    """ANF constants.

    Parameters
    ----------
    k_a : float
        Pole-radius factor, 0 < k_a < 1. Smaller values give a wider notch and
        a shorter transient (time constant ~ 1 / (1 - k_a) samples).
    mu : float
        NLMS gain (already normalised by the power estimate).
    alpha : float
        EMA coefficient of the input-power estimate, 0 < alpha <= 1.
    p_floor : float
        Lower bound on the power estimate, keeps the normalisation finite on
        silent input.
    """

    k_a: float = 0.70
    mu: float = 0.1
    alpha: float = 0.01
    p_floor: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.k_a < 1.0:
            raise ValueError(f"k_a must lie in (0, 1), got {self.k_a}")
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.p_floor > 0.0:
            raise ValueError(f"p_floor must be positive, got {self.p_floor}")


@dataclass(frozen=True)
class NotchState:
    """Running state of one ANF: notch frequency (rad/sample), previous
    intermediate state x^r_{n-1} and the EMA power estimate."""

    omega: float
    x_r_prev: complex = 0j
    p_hat: float = 1e-12


def _check_sample(x) -> complex:
    x = complex(x)
    if not cmath.isfinite(x):
        raise ValueError(f"non-finite input sample {x!r}")
    return x


def clip_freq(omega: float) -> float:
    """Saturate a frequency in rad/sample to [-pi, pi] (clamp, no wrap)."""
    omega = float(omega)
    if not math.isfinite(omega):
        raise ValueError(f"non-finite frequency {omega!r}")
    return min(math.pi, max(-math.pi, omega))


def notch_step(state: NotchState, x: complex, params: AnfParams) -> tuple[complex, NotchState]:
    """Run the notch recurrence for one sample at the frozen frequency
    ``state.omega``. Returns the output and the state carrying the new x^r."""
    x = _check_sample(x)
    zx = cmath.exp(1j * state.omega) * state.x_r_prev
    x_r = x + params.k_a * zx
    y = x_r - zx
    return y, replace(state, x_r_prev=x_r)


def ema_power(p_hat: float, x: complex, alpha: float, p_floor: float) -> float:
    """One step of the exponential moving average of |x|^2, floored."""
    x = _check_sample(x)
    p = (1.0 - alpha) * p_hat + alpha * (x.real * x.real + x.imag * x.imag)
    return max(p_floor, p)


def nlms_gradient(y: complex, omega: float, x_r_prev: complex) -> float:
    """Re{y* j z x^r_{n-1}}.

    With x_n and x^r_{n-1} held fixed, d|y|^2/d(omega) = -2 (1 - k_a) times
    this quantity, so stepping omega *along* it descends the output power.
    """
    zx = cmath.exp(1j * omega) * x_r_prev
    return (y.conjugate() * 1j * zx).real


def nlms_update(state: NotchState, y: complex, params: AnfParams) -> NotchState:
    """Adapt the notch frequency.

    ``state`` must be the pre-step state (its ``x_r_prev`` is x^r_{n-1}) with
    ``p_hat`` already updated for the current sample; ``y`` is the output that
    :func:`notch_step` produced from it. Only ``omega`` changes.
    """
    g = nlms_gradient(complex(y), state.omega, state.x_r_prev)
    return replace(state, omega=clip_freq(state.omega + params.mu / state.p_hat * g))


def anf_step(state: NotchState, x: complex, params: AnfParams) -> tuple[complex, NotchState]:
    """Full per-sample update: filter, power EMA, frequency update."""
    y, stepped = notch_step(state, x, params)
    p_hat = ema_power(state.p_hat, x, params.alpha, params.p_floor)
    adapted = nlms_update(replace(state, p_hat=p_hat), y, params)
    return y, NotchState(adapted.omega, stepped.x_r_prev, p_hat)


def initial_state(x0: complex, omega0: float, params: AnfParams) -> NotchState:
    """State before the first sample: x^r_{-1} = 0, power seeded with |x_0|^2."""
    x0 = _check_sample(x0)
    return NotchState(clip_freq(omega0), 0j, max(params.p_floor, abs(x0) ** 2))


def anf_run(x, params: AnfParams, omega0: float = 0.0, with_power: bool = False):
    """Run one ANF over a complex sequence.

    Parameters
    ----------
    x : array_like of complex, length N >= 1
    params : AnfParams
    omega0 : float
        Initial notch frequency in rad/sample, within [-pi, pi].

    Returns
    -------
    y : ndarray of complex128
        Notch output (residual) stream.
    trace : ndarray of float64
        Notch frequency in rad/sample after the update for each sample.
    power : ndarray of float64
        Power estimate used for each update; only returned when
        ``with_power`` is true.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("x must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input sample")
    if not -math.pi <= omega0 <= math.pi:
        raise ValueError(f"omega0 must lie in [-pi, pi], got {omega0}")

    k_a, mu, alpha, p_floor = params.k_a, params.mu, params.alpha, params.p_floor
    beta = 1.0 - alpha
    pi = math.pi
    exp = cmath.exp

    n = x.size
    y_out = np.empty(n, dtype=np.complex128)
    trace = np.empty(n, dtype=np.float64)
    power = np.empty(n, dtype=np.float64)
    omega = float(omega0)
    x_r_prev = 0j
    x0 = complex(x[0])
    p_hat = max(p_floor, x0.real * x0.real + x0.imag * x0.imag)

    # Same arithmetic as anf_step, inlined; the loop body does a fixed amount
    # of scalar work per sample.
    for i, xn in enumerate(x.tolist()):
        zx = exp(1j * omega) * x_r_prev
        x_r = xn + k_a * zx
        y = x_r - zx
        p_hat = beta * p_hat + alpha * (xn.real * xn.real + xn.imag * xn.imag)
        if p_hat < p_floor:
            p_hat = p_floor
        g = (y.conjugate() * 1j * zx).real
        omega += mu / p_hat * g
        if omega > pi:
            omega = pi
        elif omega < -pi:
            omega = -pi
        x_r_prev = x_r
        y_out[i] = y
        trace[i] = omega
        power[i] = p_hat
    if with_power:
        return y_out, trace, power
    return y_out, trace


def notch_response(omega_eval, omega_notch: float, k_a: float) -> np.ndarray:
    """Closed-form H(e^{j omega_eval}) for a notch frozen at ``omega_notch``."""
    zi = np.exp(-1j * np.asarray(omega_eval, dtype=float))
    zn = np.exp(1j * omega_notch)
    return (1.0 - zn * zi) / (1.0 - k_a * zn * zi)
