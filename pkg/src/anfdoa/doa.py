"""ULA steering vectors, loaded sample covariance and Capon (MVDR) spectrum.

Angles are in degrees from broadside; element m sits at m * d along the array
axis and the phase reference is element 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayConfig",
    "CovMatrix",
    "CaponSpectrum",
    "default_grid",
    "steering",
    "steering_matrix",
    "sample_cov",
    "capon_spectrum",
    "peak_angle",
]


def default_grid(step: float = 0.5) -> np.ndarray:
    n = int(round(180.0 / step))
    return np.linspace(-90.0, 90.0, n + 1)


@dataclass(frozen=True)
class ArrayConfig:
    M: int = 2
    d_over_lambda: float = 0.5
    grid_deg: np.ndarray = field(default_factory=default_grid)

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if not 0.0 < self.d_over_lambda <= 0.5:
            raise ValueError(f"d_over_lambda must lie in (0, 0.5], got {self.d_over_lambda}")
        grid = np.asarray(self.grid_deg, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid_deg must be a non-empty 1-D array")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid_deg must be strictly ascending")
        if grid[0] < -90.0 or grid[-1] > 90.0:
            raise ValueError("grid_deg must lie within [-90, 90]")
        object.__setattr__(self, "grid_deg", grid)

    @property
    def grid_step(self) -> float:
        return float(np.max(np.diff(self.grid_deg))) if self.grid_deg.size > 1 else 0.0


@dataclass(frozen=True)
class CovMatrix:
    r: np.ndarray
    loading: float


@dataclass(frozen=True)
class CaponSpectrum:
    angles: np.ndarray
    power: np.ndarray

    def db(self) -> np.ndarray:
        return 10.0 * np.log10(self.power)


def steering(theta: float, cfg: ArrayConfig) -> np.ndarray:
    """Steering vector a(theta), element m = exp(j 2 pi (d/lambda) m sin(theta))."""
    if not -90.0 <= theta <= 90.0:
        raise ValueError(f"theta must lie in [-90, 90] degrees, got {theta}")
    m = np.arange(cfg.M)
    return np.exp(2j * np.pi * cfg.d_over_lambda * m * np.sin(np.deg2rad(theta)))


def steering_matrix(cfg: ArrayConfig) -> np.ndarray:
    """Steering vectors for every grid angle, shape (len(grid), M)."""
    m = np.arange(cfg.M)
    s = np.sin(np.deg2rad(cfg.grid_deg))
    return np.exp(2j * np.pi * cfg.d_over_lambda * np.outer(s, m))


def sample_cov(x, loading_rel: float = 1e-6) -> CovMatrix:
    """(1/N) X X^H plus diagonal loading eps*I.

    eps = loading_rel * trace(R)/M, or loading_rel itself when the trace is 0.
    ``x`` is a Snapshot or an (M, N) array.
    """
    data = np.asarray(getattr(x, "data", x), dtype=np.complex128)
    M, N = data.shape
    if N < 1:
        raise ValueError("need at least one sample")
    r = data @ data.conj().T / N
    r = 0.5 * (r + r.conj().T)
    tr = float(np.real(np.trace(r)))
    eps = loading_rel * tr / M if tr > 0 else loading_rel
    return CovMatrix(r + eps * np.eye(M), eps)


def capon_spectrum(cov: CovMatrix, cfg: ArrayConfig) -> CaponSpectrum:
    """P(theta) = 1 / (a^H R^-1 a) on the configured grid."""
    r = np.asarray(cov.r, dtype=np.complex128)
    if r.shape != (cfg.M, cfg.M):
        raise ValueError(f"covariance shape {r.shape} does not match M={cfg.M}")
    cond = np.linalg.cond(r)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(f"covariance is numerically singular (condition ~{cond:.3g})")

    if cfg.M == 2:
        # Closed-form 2x2 inverse: a^H R^-1 a = (r00 + r11 - 2 Re{r01 e^{j phi}}) / det
        r00, r11 = r[0, 0].real, r[1, 1].real
        r01 = r[0, 1]
        det = r00 * r11 - abs(r01) ** 2
        phi = 2.0 * np.pi * cfg.d_over_lambda * np.sin(np.deg2rad(cfg.grid_deg))
        denom = r00 + r11 - 2.0 * np.real(r01 * np.exp(1j * phi))
        power = det / denom
    else:
        a = steering_matrix(cfg)
        sol = np.linalg.solve(r, a.T)
        power = 1.0 / np.real(np.einsum("gm,mg->g", a.conj(), sol))
    return CaponSpectrum(cfg.grid_deg.copy(), power)


def peak_angle(spec: CaponSpectrum) -> float:
    """Grid angle of the global maximum; ties go to the smaller angle."""
    if len(spec.power) == 0:
        raise ValueError("empty spectrum")
    return float(spec.angles[int(np.argmax(spec.power))])
