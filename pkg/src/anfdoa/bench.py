"""Monte Carlo harness: ANF+Capon pipeline vs. the oracle, stage-to-transmitter
association, RMSE aggregation, boundary sweep and result serialisation."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .anf import AnfParams
from .doa import ArrayConfig, capon_spectrum, default_grid, peak_angle, sample_cov
from .isolate import Snapshot, TraceSet, isolate_all, run_cascade
from .simkit import Chirp, Scene, Tone, synth_components

logger = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "Scenario",
    "StageEstimate",
    "TxResult",
    "TrialResult",
    "MonteCarloResult",
    "SweepRow",
    "SweepTable",
    "estimate_snapshot",
    "associate_estimates",
    "oracle_estimate",
    "run_trial",
    "run_monte_carlo",
    "boundary_sweep",
    "rmse",
    "tail_median",
    "write_trials_csv",
    "write_summary_json",
    "write_sweep_csv",
    "write_plot_data",
]

DEFAULT_DELTA_F_KHZ = (-2500.0, -1200.0, -900.0, -750.0, -600.0, -200.0, "overlap")


@dataclass(frozen=True)
class PipelineConfig:
    """Estimator settings shared by the simulated and recorded-IQ paths."""

    anf: AnfParams = field(default_factory=AnfParams)
    init_offsets: tuple | None = None
    notch_k_a: float | None = None  # isolation notch pole radius; None -> anf.k_a
    discard: int = 0  # leading samples dropped before the covariance
    d_over_lambda: float = 0.5
    grid_step: float = 0.5
    loading_rel: float = 1e-6

    def array_config(self, M: int) -> ArrayConfig:
        return ArrayConfig(M, self.d_over_lambda, default_grid(self.grid_step))

    @property
    def isolation_k_a(self) -> float:
        return self.anf.k_a if self.notch_k_a is None else self.notch_k_a


@dataclass(frozen=True)
class Scenario:
    name: str
    scene: Scene
    pipeline: PipelineConfig
    trials: int = 400
    seed: int = 0
    sweep_delta_f_khz: tuple = DEFAULT_DELTA_F_KHZ
    config: dict = field(default_factory=dict, compare=False)


@dataclass
class StageEstimate:
    theta_deg: float
    trace_median_hz: float
    angles: np.ndarray
    spectrum_db: np.ndarray


@dataclass
class TxResult:
    tx: int
    theta_true: float
    theta_anf: float
    theta_oracle: float
    stage: int
    trace_median_hz: float


@dataclass
class TrialResult:
    trial_id: int
    seed: int
    txs: list
    error: str | None = None


@dataclass
class MonteCarloResult:
    scenario: str
    trials: list
    rmse_anf: list
    rmse_oracle: list
    failures: int
    base_seed: int

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "trials": len(self.trials),
            "failures": self.failures,
            "seed": self.base_seed,
            "rmse_anf_deg": self.rmse_anf,
            "rmse_oracle_deg": self.rmse_oracle,
        }


def rmse(estimates, truth) -> float:
    """Root-mean-square of ``estimates - truth`` (degrees)."""
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise ValueError("rmse of an empty set")
    return float(np.sqrt(np.mean((est - np.asarray(truth, dtype=float)) ** 2)))


def tail_median(trace) -> float:
    """Median over the last quarter of a trace."""
    trace = np.asarray(trace, dtype=float)
    return float(np.median(trace[-max(1, trace.size // 4):]))


def associate_estimates(traces, band_centers) -> tuple:
    """Stage index assigned to each transmitter.

    ``traces`` is a TraceSet or an (S, N) array of combined traces. Each
    stage's tail median is matched to transmitter band centres by the
    permutation with the smallest total absolute distance; ties keep the
    lexicographically first permutation (lowest stage indices first).
    """
    combined = traces.combined if isinstance(traces, TraceSet) else np.asarray(traces)
    medians = [tail_median(t) for t in combined]
    centers = [float(c) for c in band_centers]
    if len(medians) != len(centers):
        raise ValueError(f"{len(medians)} stages but {len(centers)} transmitters")
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(len(medians))):
        cost = sum(abs(medians[s] - c) for s, c in zip(perm, centers))
        if cost < best_cost:
            best, best_cost = perm, cost
    return best


def estimate_snapshot(x: Snapshot, S: int, pipeline: PipelineConfig):
    """Cascade -> isolation -> Capon peak for every stage.

    Returns the TraceSet, the per-stage estimates and the isolated snapshots.
    """
    traces = run_cascade(x, S, pipeline.anf, pipeline.init_offsets)
    isolated = isolate_all(x, traces, pipeline.isolation_k_a)
    cfg = pipeline.array_config(x.M)
    stages = []
    for s, iso in enumerate(isolated):
        spec = capon_spectrum(sample_cov(iso.data[:, pipeline.discard:], pipeline.loading_rel), cfg)
        stages.append(StageEstimate(peak_angle(spec), tail_median(traces.combined[s]), spec.angles, spec.db()))
    return traces, stages, isolated


def _capon_peak(data: np.ndarray, pipeline: PipelineConfig) -> float:
    cfg = pipeline.array_config(data.shape[0])
    return peak_angle(capon_spectrum(sample_cov(data, pipeline.loading_rel), cfg))


def oracle_estimate(scene: Scene, seed: int, pipeline: PipelineConfig | None = None) -> list:
    """Capon estimate on each transmitter's own received signal (direct path,
    its multipath and the same noise realisation as the full snapshot)."""
    pipeline = pipeline or PipelineConfig(d_over_lambda=scene.d_over_lambda)
    comps, noise, _, _ = synth_components(scene, seed)
    return [_capon_peak(c + noise, pipeline) for c in comps]


def run_trial(scenario: Scenario, trial_id: int, base_seed: int | None = None) -> TrialResult:
    """One paired trial: ANF pipeline and oracle on the same realisation."""
    base = scenario.seed if base_seed is None else base_seed
    seed = base + trial_id
    scene, pipe = scenario.scene, scenario.pipeline
    try:
        comps, noise, truth, _ = synth_components(scene, seed)
        x = Snapshot(comps.sum(axis=0) + noise, scene.f_s)
        traces, stages, _ = estimate_snapshot(x, len(scene.txs), pipe)
        mapping = associate_estimates(traces, [t.band_center for t in truth])
        txs = []
        for i, t in enumerate(truth):
            s = mapping[i]
            txs.append(
                TxResult(
                    tx=i,
                    theta_true=t.theta_deg,
                    theta_anf=stages[s].theta_deg,
                    theta_oracle=_capon_peak(comps[i] + noise, pipe),
                    stage=s,
                    trace_median_hz=stages[s].trace_median_hz,
                )
            )
        return TrialResult(trial_id, seed, txs)
    except Exception as e:  # recorded per trial, excluded from RMSE
        logger.warning("trial %d failed: %s", trial_id, e)
        return TrialResult(trial_id, seed, [], error=f"{type(e).__name__}: {e}")


def _run_trial_args(args):
    return run_trial(*args)


def run_monte_carlo(scenario: Scenario, trials: int | None = None, base_seed: int | None = None,
                    workers: int = 1) -> MonteCarloResult:
    """Run ``trials`` paired trials with seeds ``base_seed + trial_id``."""
    trials = scenario.trials if trials is None else trials
    base = scenario.seed if base_seed is None else base_seed
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = [(scenario, t, base) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_args, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        results = [run_trial(*j) for j in jobs]
    results.sort(key=lambda r: r.trial_id)

    ok = [r for r in results if r.error is None]
    failures = len(results) - len(ok)
    T = len(scenario.scene.txs)
    rmse_anf, rmse_oracle = [], []
    for i in range(T):
        rows = [r.txs[i] for r in ok]
        if rows:
            rmse_anf.append(rmse([t.theta_anf for t in rows], [t.theta_true for t in rows]))
            rmse_oracle.append(rmse([t.theta_oracle for t in rows], [t.theta_true for t in rows]))
        else:
            rmse_anf.append(float("nan"))
            rmse_oracle.append(float("nan"))
    return MonteCarloResult(scenario.name, results, rmse_anf, rmse_oracle, failures, base)


@dataclass
class SweepRow:
    delta_f_khz: float | str
    tone_hz: float
    tx0_rmse_deg: float
    tx1_rmse_deg: float
    trials: int


@dataclass
class SweepTable:
    rows: list

    def as_dicts(self) -> list:
        return [asdict(r) for r in self.rows]


def sweep_tone_frequency(chirp: Chirp, delta_f_khz) -> float:
    """Tone frequency for a sweep step: chirp lower edge + delta f, or the chirp
    centre for ``"overlap"``."""
    lo = min(chirp.f_start, chirp.f_end)
    hi = max(chirp.f_start, chirp.f_end)
    if isinstance(delta_f_khz, str):
        if delta_f_khz.lower() != "overlap":
            raise ValueError(f"unknown sweep step {delta_f_khz!r}")
        return 0.5 * (lo + hi)
    return lo + 1e3 * float(delta_f_khz)


def _sweep_key(d) -> float:
    # "overlap" sorts last: it is the limit of delta f -> 0 and beyond.
    return math.inf if isinstance(d, str) else float(d)


def boundary_sweep(scenario: Scenario, delta_f_list=None, trials: int | None = None,
                   base_seed: int | None = None, workers: int = 1) -> SweepTable:
    """Move the Tx0 tone toward the fixed Tx1 chirp and rerun the Monte Carlo
    at each step."""
    delta_f_list = scenario.sweep_delta_f_khz if delta_f_list is None else delta_f_list
    if not delta_f_list:
        raise ValueError("empty delta f list")
    scene = scenario.scene
    if len(scene.txs) != 2 or not isinstance(scene.txs[1].waveform, Chirp):
        raise ValueError("boundary sweep needs a two-transmitter scene with a Tx1 chirp")
    chirp = scene.txs[1].waveform
    half = scene.f_s / 2.0
    rows = []
    for d in sorted(delta_f_list, key=_sweep_key):
        f0 = sweep_tone_frequency(chirp, d)
        if abs(f0) > half:
            raise ValueError(f"delta f {d} kHz puts the tone at {f0} Hz, outside Nyquist")
        tx0 = replace(scene.txs[0], waveform=Tone(f0))
        sub = replace(scenario, name=f"{scenario.name}@{d}", scene=replace(scene, txs=(tx0, scene.txs[1])))
        mc = run_monte_carlo(sub, trials, base_seed, workers)
        n_ok = len(mc.trials) - mc.failures
        rows.append(SweepRow(d, f0, mc.rmse_anf[0], mc.rmse_anf[1], n_ok))
        logger.info("delta f %s kHz: Tx0 %.2f deg, Tx1 %.2f deg", d, mc.rmse_anf[0], mc.rmse_anf[1])
    return SweepTable(rows)


def write_trials_csv(result: MonteCarloResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_id", "tx", "theta_true", "theta_anf", "theta_oracle", "stage", "trace_median_hz"])
        for r in result.trials:
            for t in r.txs:
                w.writerow([r.trial_id, t.tx, repr(t.theta_true), repr(t.theta_anf),
                            repr(t.theta_oracle), t.stage, repr(t.trace_median_hz)])


def write_summary_json(result: MonteCarloResult, path, config: dict | None = None) -> dict:
    summary = result.summary()
    summary["errors"] = {r.trial_id: r.error for r in result.trials if r.error is not None}
    if config is not None:
        summary["config"] = config
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return summary


def write_sweep_csv(table: SweepTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_f_khz", "tone_hz", "tx0_rmse_deg", "tx1_rmse_deg", "trials"])
        for r in table.rows:
            w.writerow([r.delta_f_khz, repr(r.tone_hz), f"{r.tx0_rmse_deg:.4f}", f"{r.tx1_rmse_deg:.4f}", r.trials])


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def psd_db(x, f_s: float, nperseg: int = 128):
    """Two-sided Welch PSD in dB, frequency axis ascending (Hz)."""
    from scipy.signal import welch

    x = np.asarray(x)
    f, p = welch(x, fs=f_s, nperseg=min(nperseg, x.size), return_onesided=False, detrend=False)
    order = np.argsort(f)
    return f[order], 10.0 * np.log10(np.maximum(p[order], 1e-300))


def write_plot_data(x: Snapshot, traces: TraceSet, stages: list, isolated: list, out_dir, prefix: str = "") -> None:
    """PSD of antenna 0 (raw and per isolated channel), Capon spectra in dB and
    the combined/per-antenna traces, as CSV for external plotting."""
    from pathlib import Path

    out = Path(out_dir)
    f, raw = psd_db(x.data[0], x.f_s)
    cols = [raw] + [psd_db(iso.data[0], x.f_s)[1] for iso in isolated]
    with open(out / f"{prefix}psd.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "raw_db"] + [f"channel{j}_db" for j in range(len(isolated))])
        for i in range(f.size):
            w.writerow([repr(float(f[i]))] + [f"{c[i]:.6f}" for c in cols])

    grid = stages[0].angles
    with open(out / f"{prefix}capon.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["angle_deg"] + [f"stage{j}_db" for j in range(len(stages))])
        for i, a in enumerate(grid):
            w.writerow([repr(float(a))] + [f"{st.spectrum_db[i]:.6f}" for st in stages])

    with open(out / f"{prefix}traces.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        S, M, N = traces.per_antenna.shape
        w.writerow(["n"] + [f"stage{s}_combined_hz" for s in range(S)]
                   + [f"stage{s}_ant{k}_hz" for s in range(S) for k in range(M)])
        for n in range(N):
            w.writerow([n] + [repr(float(traces.combined[s, n])) for s in range(S)]
                       + [repr(float(traces.per_antenna[s, k, n])) for s in range(S) for k in range(M)])
