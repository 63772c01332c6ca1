"""Indoor scene synthesis: narrowband transmitters in a rectangular room,
a receive ULA, single-bounce image-source multipath and white noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT",
    "ConfigError",
    "RoomConfig",
    "Tone",
    "Chirp",
    "Beam",
    "Transmitter",
    "Scene",
    "TxTruth",
    "image_sources",
    "tx_baseband",
    "antenna_gain",
    "synth_components",
    "synth_snapshot",
    "build_scene",
    "direct_angle",
]

SPEED_OF_LIGHT = 299_792_458.0

# Wall order used everywhere: x=0, x=L, y=0, y=W, z=0, z=H.
_WALLS = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1))


class ConfigError(ValueError):
    """Invalid scenario/scene configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _vec3(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ConfigError(name, f"expected three finite numbers, got {v!r}")
    return a


def _unit(v, name: str) -> np.ndarray:
    a = _vec3(v, name)
    n = np.linalg.norm(a)
    if n == 0:
        raise ConfigError(name, "zero-length direction")
    return a / n


@dataclass(frozen=True)
class RoomConfig:
    dims: tuple = (20.0, 12.0, 3.0)
    refl_range: tuple = (0.33, 0.52)

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dims)
        if len(dims) != 3 or any(not d > 0 for d in dims):
            raise ConfigError("room.dims", f"need three positive lengths, got {self.dims!r}")
        lo, hi = (float(v) for v in self.refl_range)
        if not 0.0 <= lo <= hi < 1.0:
            raise ConfigError("room.refl_range", f"need 0 <= min <= max < 1, got {self.refl_range!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "refl_range", (lo, hi))

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p > 0) and np.all(p < np.asarray(self.dims)))


@dataclass(frozen=True)
class Tone:
    """Constant tone at baseband offset ``f0`` Hz."""

    f0: float

    def freq(self, n, N: int):
        return np.full(np.shape(n), float(self.f0))

    def phase(self, n, f_s: float, N: int):
        return 2.0 * np.pi * self.f0 * np.asarray(n, dtype=float) / f_s

    def band(self, N: int) -> tuple:
        return (float(self.f0), float(self.f0))


@dataclass(frozen=True)
class Chirp:
    """Linear sweep from ``f_start`` (sample 0) to ``f_end`` (sample N-1).

    Phase is the running sum of 2 pi f[k] / f_s over k < n, written in closed
    form so it also extends to negative n.
    """

    f_start: float
    f_end: float

    def _rate(self, N: int) -> float:
        return (self.f_end - self.f_start) / max(N - 1, 1)

    def freq(self, n, N: int):
        return self.f_start + self._rate(N) * np.asarray(n, dtype=float)

    def phase(self, n, f_s: float, N: int):
        n = np.asarray(n, dtype=float)
        return 2.0 * np.pi / f_s * (self.f_start * n + self._rate(N) * n * (n - 1.0) / 2.0)

    def band(self, N: int) -> tuple:
        return (float(min(self.f_start, self.f_end)), float(max(self.f_start, self.f_end)))


@dataclass(frozen=True)
class Beam:
    """cos^m beam around ``boresight``; m=1 is Lambertian."""

    boresight: tuple = (0.0, -1.0, 0.0)
    exponent: float = 1.0

    @property
    def kind(self) -> str:
        return "lambertian" if self.exponent == 1.0 else "directional"


@dataclass(frozen=True)
class Transmitter:
    pos: tuple
    waveform: object
    amplitude: float = 1.0
    beam: Beam = field(default_factory=Beam)
    phase0: float = 0.0
    name: str = ""


@dataclass(frozen=True)
class TxTruth:
    name: str
    theta_deg: float
    freq_band: tuple

    @property
    def band_center(self) -> float:
        return 0.5 * (self.freq_band[0] + self.freq_band[1])


@dataclass(frozen=True)
class Scene:
    room: RoomConfig
    txs: tuple
    rx_center: tuple = (8.2, 2.8, 1.2)
    rx_axis: tuple = (1.0, 0.0, 0.0)
    f_c: float = 2.0e9
    f_s: float = 4.0e6
    N: int = 512
    noise_sigma: float = 0.12
    M: int = 2
    spacing: float | None = None

    def __post_init__(self):
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2.0)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def d_over_lambda(self) -> float:
        return self.spacing / self.wavelength

    def element_positions(self) -> np.ndarray:
        axis = np.asarray(self.rx_axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        offs = (np.arange(self.M) - (self.M - 1) / 2.0) * self.spacing
        return np.asarray(self.rx_center, dtype=float) + offs[:, None] * axis

    def truth(self) -> list:
        return [
            TxTruth(tx.name or f"Tx{i}", direct_angle(self, tx.pos), tx.waveform.band(self.N))
            for i, tx in enumerate(self.txs)
        ]


def direct_angle(scene: Scene, pos) -> float:
    """Broadside angle (degrees) of ``pos`` seen from the array centre."""
    v = np.asarray(pos, dtype=float) - np.asarray(scene.rx_center, dtype=float)
    axis = np.asarray(scene.rx_axis, dtype=float)
    s = np.dot(v, axis) / (np.linalg.norm(v) * np.linalg.norm(axis))
    return float(np.rad2deg(np.arcsin(np.clip(s, -1.0, 1.0))))


def image_sources(tx_pos, room: RoomConfig) -> np.ndarray:
    """Mirror images of ``tx_pos`` across the six walls, shape (6, 3)."""
    p = np.asarray(tx_pos, dtype=float)
    if not room.contains(p):
        raise ValueError(f"transmitter {tuple(p)} is not inside the room {room.dims}")
    images = np.tile(p, (6, 1))
    for w, (ax, side) in enumerate(_WALLS):
        plane = 0.0 if side == 0 else room.dims[ax]
        images[w, ax] = 2.0 * plane - p[ax]
    return images


def tx_baseband(tx: Transmitter, n, f_s: float, N: int):
    """Complex baseband sample(s) of ``tx`` at integer index ``n`` (any sign)."""
    ph = tx.waveform.phase(n, f_s, N)
    return tx.amplitude * np.exp(1j * (ph + tx.phase0))


def antenna_gain(tx: Transmitter, direction) -> float:
    """max(0, cos psi)^m where psi is measured from the beam boresight."""
    b = np.asarray(tx.beam.boresight, dtype=float)
    d = np.asarray(direction, dtype=float)
    c = float(np.dot(b, d) / (np.linalg.norm(b) * np.linalg.norm(d)))
    return max(0.0, c) ** tx.beam.exponent


def _delayed(tx: Transmitter, n: np.ndarray, delay_samples: float, f_s: float, N: int) -> np.ndarray:
    # Linear interpolation between integer-index samples of the analytic signal.
    t = n - delay_samples
    i0 = np.floor(t)
    frac = t - i0
    s0 = tx_baseband(tx, i0, f_s, N)
    s1 = tx_baseband(tx, i0 + 1.0, f_s, N)
    return (1.0 - frac) * s0 + frac * s1


def _draw_reflections(room: RoomConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = room.refl_range
    mag = rng.uniform(lo, hi, size=6)
    ph = rng.uniform(0.0, 2.0 * np.pi, size=6)
    return mag * np.exp(1j * ph)


def synth_components(scene: Scene, seed: int, reflections=None):
    """Per-transmitter received signals plus the shared noise realisation.

    Returns
    -------
    components : ndarray, shape (T, M, N)
    noise : ndarray, shape (M, N)
    truth : list of TxTruth
    reflections : ndarray, shape (6,)
        Complex wall coefficients drawn for this seed.
    """
    validate_scene(scene)
    rng = np.random.default_rng(seed)
    refl = _draw_reflections(scene.room, rng) if reflections is None else np.asarray(reflections)
    M, N = scene.M, scene.N
    noise = scene.noise_sigma / np.sqrt(2.0) * (
        rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    )

    n = np.arange(N, dtype=float)
    elems = scene.element_positions()
    k_c = 2.0 * np.pi * scene.f_c
    comps = np.zeros((len(scene.txs), M, N), dtype=np.complex128)
    for i, tx in enumerate(scene.txs):
        p = np.asarray(tx.pos, dtype=float)
        images = image_sources(p, scene.room)
        for m in range(M):
            paths = [(p, 1.0 + 0j, None)] + [(images[w], refl[w], _WALLS[w][0]) for w in range(6)]
            for src, coeff, mirror_ax in paths:
                if coeff == 0:
                    continue
                v = elems[m] - src
                dist = float(np.linalg.norm(v))
                depart = v / dist
                if mirror_ax is not None:
                    depart = depart.copy()
                    depart[mirror_ax] = -depart[mirror_ax]
                g = antenna_gain(tx, depart)
                if g == 0.0:
                    continue
                tau = dist / SPEED_OF_LIGHT
                amp = g * coeff / dist * np.exp(-1j * k_c * tau)
                comps[i, m] += amp * _delayed(tx, n, tau * scene.f_s, scene.f_s, N)
    return comps, noise, scene.truth(), refl


def synth_snapshot(scene: Scene, seed: int):
    """Observed M x N snapshot (all transmitters plus noise) and ground truth."""
    from .isolate import Snapshot

    comps, noise, truth, _ = synth_components(scene, seed)
    return Snapshot(comps.sum(axis=0) + noise, scene.f_s), truth


def validate_scene(scene: Scene) -> None:
    if not scene.room.contains(scene.rx_center):
        raise ConfigError("rx.center", f"{scene.rx_center} is not inside the room")
    if not scene.spacing > 0:
        raise ConfigError("rx.spacing", "must be positive")
    if scene.M < 2:
        raise ConfigError("rx.M", "need at least two elements")
    if not scene.noise_sigma >= 0:
        raise ConfigError("signal.noise_sigma", "must be >= 0")
    if scene.N < 1:
        raise ConfigError("signal.N", "must be >= 1")
    if not scene.f_s > 0 or not scene.f_c > 0:
        raise ConfigError("signal", "f_s and f_c must be positive")
    half = scene.f_s / 2.0
    for i, tx in enumerate(scene.txs):
        if not scene.room.contains(tx.pos):
            raise ConfigError(f"txs[{i}].pos", f"{tuple(tx.pos)} is not inside the room")
        if not tx.amplitude > 0:
            raise ConfigError(f"txs[{i}].amplitude", "must be positive")
        lo, hi = tx.waveform.band(scene.N)
        if lo < -half or hi > half:
            raise ConfigError(f"txs[{i}].waveform", f"band ({lo}, {hi}) Hz exceeds Nyquist +/-{half} Hz")


# Default environment: 20 x 12 x 3 m room, 2 GHz carrier, 4 MHz sampling.
DEFAULTS = {
    "room": {"dims": [20.0, 12.0, 3.0], "refl_range": [0.33, 0.52]},
    "rx": {"center": [8.2, 2.8, 1.2], "axis": [1.0, 0.0, 0.0], "M": 2, "spacing": None},
    "signal": {"f_c": 2.0e9, "f_s": 4.0e6, "N": 512, "noise_sigma": 0.12},
}


def _waveform(cfg, name: str):
    if not isinstance(cfg, dict):
        raise ConfigError(name, "expected a mapping")
    kind = cfg.get("kind", "tone")
    try:
        if kind == "tone":
            return Tone(float(cfg["f0"]))
        if kind == "chirp":
            return Chirp(float(cfg["f_start"]), float(cfg["f_end"]))
    except KeyError as e:
        raise ConfigError(f"{name}.{e.args[0]}", "missing") from None
    raise ConfigError(f"{name}.kind", f"unknown waveform kind {kind!r}")


def _beam(cfg, name: str) -> Beam:
    if cfg is None:
        return Beam()
    kind = cfg.get("kind", "lambertian")
    bs = tuple(_unit(cfg.get("boresight", (0.0, -1.0, 0.0)), f"{name}.boresight"))
    if kind == "lambertian":
        return Beam(bs, 1.0)
    if kind == "directional":
        m = float(cfg.get("exponent", 2.0))
        if not m > 0:
            raise ConfigError(f"{name}.exponent", "must be positive")
        return Beam(bs, m)
    raise ConfigError(f"{name}.kind", f"unknown beam kind {kind!r}")


def _section(cfg: dict, key: str) -> dict:
    merged = dict(DEFAULTS[key])
    sub = cfg.get(key) or {}
    if not isinstance(sub, dict):
        raise ConfigError(key, "expected a mapping")
    merged.update(sub)
    return merged


def build_scene(config: dict | None = None) -> Scene:
    """Resolve a scenario mapping (``room``, ``rx``, ``signal``, ``txs``) into a
    validated :class:`Scene`, filling Table-I defaults. Transmitters with
    ``enabled: false`` are dropped."""
    config = config or {}
    room_cfg = _section(config, "room")
    rx_cfg = _section(config, "rx")
    sig_cfg = _section(config, "signal")

    room = RoomConfig(tuple(room_cfg["dims"]), tuple(room_cfg["refl_range"]))
    txs = []
    for i, t in enumerate(config.get("txs") or []):
        name = f"txs[{i}]"
        if not isinstance(t, dict):
            raise ConfigError(name, "expected a mapping")
        if not t.get("enabled", True):
            continue
        if "pos" not in t:
            raise ConfigError(f"{name}.pos", "missing")
        txs.append(
            Transmitter(
                pos=tuple(_vec3(t["pos"], f"{name}.pos")),
                waveform=_waveform(t.get("waveform", {}), f"{name}.waveform"),
                amplitude=float(t.get("amplitude", 1.0)),
                beam=_beam(t.get("beam"), f"{name}.beam"),
                phase0=float(t.get("phase0", 0.0)),
                name=str(t.get("name", f"Tx{i}")),
            )
        )
    try:
        scene = Scene(
            room=room,
            txs=tuple(txs),
            rx_center=tuple(_vec3(rx_cfg["center"], "rx.center")),
            rx_axis=tuple(_unit(rx_cfg["axis"], "rx.axis")),
            f_c=float(sig_cfg["f_c"]),
            f_s=float(sig_cfg["f_s"]),
            N=int(sig_cfg["N"]),
            noise_sigma=float(sig_cfg["noise_sigma"]),
            M=int(rx_cfg["M"]),
            spacing=None if rx_cfg.get("spacing") is None else float(rx_cfg["spacing"]),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("scene", str(e)) from None
    validate_scene(scene)
    return scene


def tx_from_angle(scene_center, axis, theta_deg: float, distance: float, height: float | None = None):
    """Horizontal position at broadside angle ``theta_deg`` and ``distance``
    from the array centre, with broadside along +y for an x-axis array."""
    c = np.asarray(scene_center, dtype=float)
    th = math.radians(theta_deg)
    pos = c + distance * np.array([math.sin(th), math.cos(th), 0.0])
    if height is not None:
        pos[2] = height
    return tuple(float(v) for v in pos)
