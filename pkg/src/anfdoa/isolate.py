"""Cascaded per-antenna ANFs, cross-antenna trace combining and
scheduled-notch isolation of one channel per transmitter."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .anf import AnfParams, anf_run

__all__ = [
    "Snapshot",
    "TraceSet",
    "default_init_offsets",
    "run_cascade",
    "combine_traces",
    "apply_scheduled_notch",
    "isolate_channel",
    "isolate_all",
]


@dataclass(frozen=True)
class Snapshot:
    """M x N complex baseband block (rows are antennas) sampled at ``f_s`` Hz."""

    data: np.ndarray
    f_s: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ValueError(f"snapshot data must be 2-D (M x N), got shape {data.shape}")
        if data.shape[0] < 2:
            raise ValueError(f"snapshot needs M >= 2 antennas, got {data.shape[0]}")
        if data.shape[1] < 1:
            raise ValueError("snapshot needs N >= 1 samples")
        if not np.all(np.isfinite(data)):
            raise ValueError("snapshot contains non-finite entries")
        if not self.f_s > 0:
            raise ValueError(f"f_s must be positive, got {self.f_s}")
        object.__setattr__(self, "data", data)

    @property
    def M(self) -> int:
        return self.data.shape[0]

    @property
    def N(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class TraceSet:
    """Output of :func:`run_cascade`.

    Attributes
    ----------
    per_antenna : ndarray, shape (S, M, N)
        Instantaneous-frequency trace of every stage on every antenna, Hz.
    combined : ndarray, shape (S, N)
        Antenna-averaged trace per stage, Hz.
    residuals : ndarray, shape (S, M, N)
        Complex output of every stage.
    init_offsets : tuple of float
        Starting notch frequency of each stage as a fraction of f_s.
    f_s : float
    """

    per_antenna: np.ndarray
    combined: np.ndarray
    residuals: np.ndarray
    init_offsets: tuple
    f_s: float

    @property
    def S(self) -> int:
        return self.combined.shape[0]


def default_init_offsets(S: int) -> tuple:
    """Evenly spaced starting frequencies in [-0.25, 0.25] of f_s;
    S=3 gives (-0.25, 0.0, 0.25)."""
    if S < 1:
        raise ValueError(f"stage count must be >= 1, got {S}")
    if S == 1:
        return (0.0,)
    return tuple(float(v) for v in np.linspace(-0.25, 0.25, S))


def combine_traces(per_antenna) -> np.ndarray:
    """Sample-wise arithmetic mean over antennas of an (M, N) trace block."""
    rows = [np.asarray(r, dtype=float) for r in per_antenna]
    if not rows:
        raise ValueError("need at least one trace")
    n = rows[0].shape
    for k, r in enumerate(rows):
        if r.shape != n:
            raise ValueError(f"trace {k} has shape {r.shape}, expected {n}")
    return np.mean(np.stack(rows), axis=0)


def run_cascade(x: Snapshot, S: int, params: AnfParams, init_offsets=None) -> TraceSet:
    """Run an S-stage ANF cascade independently on each antenna.

    Stage s consumes the residual of stage s-1 on the same antenna and starts
    at 2 pi init_offsets[s] rad/sample.
    """
    if S < 1:
        raise ValueError(f"stage count must be >= 1, got {S}")
    if init_offsets is None:
        init_offsets = default_init_offsets(S)
    init_offsets = tuple(float(v) for v in init_offsets)
    if len(init_offsets) != S:
        raise ValueError(f"expected {S} init offsets, got {len(init_offsets)}")
    for v in init_offsets:
        if not -0.5 <= v <= 0.5:
            raise ValueError(f"init offset {v} outside [-0.5, 0.5]")

    M, N = x.M, x.N
    to_hz = x.f_s / (2.0 * math.pi)
    per_antenna = np.empty((S, M, N))
    residuals = np.empty((S, M, N), dtype=np.complex128)
    for k in range(M):
        signal = x.data[k]
        for s in range(S):
            signal, trace = anf_run(signal, params, 2.0 * math.pi * init_offsets[s])
            residuals[s, k] = signal
            per_antenna[s, k] = trace * to_hz
    combined = np.stack([combine_traces(per_antenna[s]) for s in range(S)])
    return TraceSet(per_antenna, combined, residuals, init_offsets, x.f_s)


def apply_scheduled_notch(x, schedule, f_s: float, k_a: float) -> np.ndarray:
    """Filter ``x`` with the notch recurrence following a fixed per-sample
    frequency schedule (Hz), without adaptation."""
    x = np.asarray(x, dtype=np.complex128)
    schedule = np.asarray(schedule, dtype=float)
    if x.shape != schedule.shape or x.ndim != 1:
        raise ValueError(
            f"schedule shape {schedule.shape} does not match signal shape {x.shape}"
        )
    half = f_s / 2.0
    bad = np.flatnonzero(~(np.abs(schedule) <= half))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"schedule[{i}] = {schedule[i]} Hz outside Nyquist +/-{half} Hz")

    exp = cmath.exp
    w = (2.0 * math.pi / f_s) * schedule
    out = np.empty_like(x)
    x_r_prev = 0j
    for i, (xn, wn) in enumerate(zip(x.tolist(), w.tolist())):
        zx = exp(1j * wn) * x_r_prev
        x_r = xn + k_a * zx
        out[i] = x_r - zx
        x_r_prev = x_r
    return out


def isolate_channel(x: Snapshot, traces: TraceSet, j: int, k_a: float = 0.70) -> Snapshot:
    """Isolated M-channel snapshot for stage ``j`` (0-based).

    Every antenna of the *raw* snapshot is passed through fixed notches that
    follow the combined trace of each other stage, in ascending stage order.
    """
    if not 0 <= j < traces.S:
        raise IndexError(f"stage index {j} out of range for {traces.S} stages")
    data = x.data.copy()
    for s in range(traces.S):
        if s == j:
            continue
        for k in range(x.M):
            data[k] = apply_scheduled_notch(data[k], traces.combined[s], x.f_s, k_a)
    return Snapshot(data, x.f_s)


def isolate_all(x: Snapshot, traces: TraceSet, k_a: float = 0.70) -> list:
    return [isolate_channel(x, traces, j, k_a) for j in range(traces.S)]
