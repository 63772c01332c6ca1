"""Scenario files: YAML loading, command-line overrides and the documented
schema template.

A scenario file has the sections ``room``, ``rx``, ``signal``, ``txs``,
``anf``, ``doa`` and ``mc``. Every key except ``txs[].pos`` has a default, so
an almost empty file is valid.
"""

from __future__ import annotations

import copy
import logging
from importlib import resources
from pathlib import Path

import yaml

from .anf import AnfParams
from .bench import DEFAULT_DELTA_F_KHZ, PipelineConfig, Scenario
from .simkit import DEFAULTS, ConfigError, build_scene

logger = logging.getLogger(__name__)

__all__ = [
    "ANF_DEFAULTS",
    "DOA_DEFAULTS",
    "MC_DEFAULTS",
    "GOLDEN",
    "golden_path",
    "load_config",
    "apply_overrides",
    "scenario_from_config",
    "load_scenario",
    "schema_text",
]

ANF_DEFAULTS = {
    "k_a": 0.70,
    "mu": 0.1,
    "alpha": 0.01,
    "p_floor": 1e-12,
    "init_offsets": None,
    "notch_k_a": None,
    "discard": 0,
}
DOA_DEFAULTS = {"grid_step": 0.5, "loading_rel": 1e-6}
MC_DEFAULTS = {"trials": 400, "seed": 0, "workers": 1, "sweep_delta_f_khz": list(DEFAULT_DELTA_F_KHZ)}

GOLDEN = ("two_tx", "three_tx", "boundary")


def golden_path(name: str) -> Path:
    """Path of a bundled scenario file (``two_tx``, ``three_tx`` or ``boundary``)."""
    if name not in GOLDEN:
        raise ValueError(f"unknown golden scenario {name!r}; choose from {', '.join(GOLDEN)}")
    return Path(str(resources.files("anfdoa") / "scenarios" / f"{name}.yaml"))


def load_config(path) -> dict:
    """Parse a scenario file into a plain mapping."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror or e}") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("config", f"{path} is not valid YAML: {e}") from None
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError("config", f"{path} must contain a mapping at top level")
    return cfg


def apply_overrides(cfg: dict, *, trials=None, seed=None, f_s=None, f_c=None) -> dict:
    """Copy of ``cfg`` with command-line values written into their sections."""
    cfg = copy.deepcopy(cfg)
    if trials is not None:
        cfg.setdefault("mc", {})["trials"] = trials
    if seed is not None:
        cfg.setdefault("mc", {})["seed"] = seed
    if f_s is not None:
        cfg.setdefault("signal", {})["f_s"] = f_s
    if f_c is not None:
        cfg.setdefault("signal", {})["f_c"] = f_c
    return cfg


def _merged(cfg: dict, key: str, defaults: dict) -> dict:
    sub = cfg.get(key) or {}
    if not isinstance(sub, dict):
        raise ConfigError(key, "expected a mapping")
    unknown = set(sub) - set(defaults)
    if unknown:
        raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown key")
    out = dict(defaults)
    out.update(sub)
    return out


def pipeline_from_config(cfg: dict, d_over_lambda: float) -> PipelineConfig:
    anf = _merged(cfg, "anf", ANF_DEFAULTS)
    doa = _merged(cfg, "doa", DOA_DEFAULTS)
    try:
        params = AnfParams(float(anf["k_a"]), float(anf["mu"]), float(anf["alpha"]), float(anf["p_floor"]))
    except (TypeError, ValueError) as e:
        raise ConfigError("anf", str(e)) from None
    offsets = anf["init_offsets"]
    if offsets is not None:
        try:
            offsets = tuple(float(v) for v in offsets)
        except (TypeError, ValueError):
            raise ConfigError("anf.init_offsets", "expected a list of numbers or null") from None
    notch = None if anf["notch_k_a"] is None else float(anf["notch_k_a"])
    if notch is not None and not 0.0 < notch < 1.0:
        raise ConfigError("anf.notch_k_a", "must lie in (0, 1)")
    discard = int(anf["discard"])
    if discard < 0:
        raise ConfigError("anf.discard", "must be >= 0")
    step = float(doa["grid_step"])
    if not 0.0 < step <= 10.0:
        raise ConfigError("doa.grid_step", "must lie in (0, 10] degrees")
    loading = float(doa["loading_rel"])
    if not loading > 0:
        raise ConfigError("doa.loading_rel", "must be positive")
    return PipelineConfig(params, offsets, notch, discard, d_over_lambda, step, loading)


def scenario_from_config(cfg: dict, name: str | None = None) -> Scenario:
    """Build the Scene and pipeline described by a scenario mapping."""
    scene = build_scene(cfg)
    pipeline = pipeline_from_config(cfg, scene.d_over_lambda)
    if pipeline.init_offsets is not None and len(pipeline.init_offsets) != len(scene.txs):
        raise ConfigError(
            "anf.init_offsets",
            f"{len(pipeline.init_offsets)} offsets for {len(scene.txs)} enabled transmitters",
        )
    if pipeline.discard >= scene.N:
        raise ConfigError("anf.discard", f"must be smaller than N={scene.N}")
    mc = _merged(cfg, "mc", MC_DEFAULTS)
    trials, seed, workers = int(mc["trials"]), int(mc["seed"]), int(mc["workers"])
    if trials < 1:
        raise ConfigError("mc.trials", "must be >= 1")
    if seed < 0:
        raise ConfigError("mc.seed", "must be >= 0")
    if workers < 1:
        raise ConfigError("mc.workers", "must be >= 1")
    sweep = []
    for d in mc["sweep_delta_f_khz"] or []:
        if isinstance(d, str):
            if d.lower() != "overlap":
                raise ConfigError("mc.sweep_delta_f_khz", f"unknown entry {d!r}")
            sweep.append("overlap")
        else:
            sweep.append(float(d))
    full = copy.deepcopy(cfg)
    full["mc"] = dict(mc, workers=workers)
    return Scenario(
        name=str(cfg.get("name") or name or "scenario"),
        scene=scene,
        pipeline=pipeline,
        trials=trials,
        seed=seed,
        sweep_delta_f_khz=tuple(sweep),
        config=full,
    )


def load_scenario(path, **overrides) -> Scenario:
    """Read ``path`` (or a golden scenario name) and apply overrides."""
    p = golden_path(path) if str(path) in GOLDEN else Path(path)
    cfg = apply_overrides(load_config(p), **overrides)
    return scenario_from_config(cfg, name=p.stem)


def schema_text() -> str:
    """Annotated scenario template populated with the default values."""
    r, x, s = DEFAULTS["room"], DEFAULTS["rx"], DEFAULTS["signal"]
    a, d, m = ANF_DEFAULTS, DOA_DEFAULTS, MC_DEFAULTS

    def y(v):
        return yaml.safe_dump(v, default_flow_style=True).strip().removesuffix("\n...").removesuffix("...").strip()

    return f"""\
# anfdoa scenario file.
# Units: metres, hertz, degrees. Keys left out take the value shown here.
name: my_scenario

room:
  dims: {y(r["dims"])}            # x, y, z extent; walls at 0 and dims
  refl_range: {y(r["refl_range"])}        # reflection magnitude drawn uniformly per wall per trial

rx:
  center: {y(x["center"])}           # array centre
  axis: {y(x["axis"])}           # unit vector along the element baseline
  M: {x["M"]}                            # antennas
  spacing: {y(x["spacing"])}                   # element spacing in metres; null means half a wavelength

signal:
  f_c: {s["f_c"]:.1e}                      # carrier, Hz
  f_s: {s["f_s"]:.1e}                      # complex sample rate, Hz
  N: {s["N"]}                          # samples per snapshot
  noise_sigma: {s["noise_sigma"]}                # total complex noise std per antenna sample

txs:                                # one entry per transmitter; pos is required
  - name: Tx0
    enabled: true                   # false keeps the entry but leaves it out of the scene
    pos: [5.11, 7.94, 1.2]
    waveform: {{kind: tone, f0: -1.6e6}}                      # or {{kind: chirp, f_start: 0.8e6, f_end: 1.4e6}}
    amplitude: 1.0                  # field amplitude at 1 m along boresight
    phase0: 0.0                     # radians
    beam: {{kind: lambertian, boresight: [0.0, -1.0, 0.0]}}   # or kind: directional with exponent

anf:
  k_a: {a["k_a"]}                        # notch pole radius
  mu: {a["mu"]}                          # NLMS step
  alpha: {a["alpha"]}                      # input power EMA coefficient
  p_floor: {a["p_floor"]}                   # power estimate floor
  init_offsets: null                # per-stage start as fraction of f_s; null spreads them over [-0.25, 0.25]
  notch_k_a: null                   # pole radius of the isolation notches; null reuses k_a
  discard: {a["discard"]}                        # leading samples left out of the covariance

doa:
  grid_step: {d["grid_step"]}                    # degrees, grid spans [-90, 90]
  loading_rel: {d["loading_rel"]}               # diagonal loading relative to trace(R)/M

mc:
  trials: {m["trials"]}
  seed: {m["seed"]}                           # trial t uses seed + t
  workers: {m["workers"]}                        # processes for the Monte Carlo loop
  sweep_delta_f_khz: {y(m["sweep_delta_f_khz"])}   # tone offset from chirp lower edge; overlap = chirp centre
"""
