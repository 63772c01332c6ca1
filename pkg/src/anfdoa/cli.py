"""Command-line front end.

Subcommands
-----------
simulate    Monte Carlo run of a scenario file (optionally the boundary sweep)
sweep       boundary sweep of a two-transmitter scenario
process-iq  estimate angles from a recorded multi-channel cf32 file
schema      write an annotated scenario template

Exit status is 0 on success, 1 for usage or validation errors and 2 when a
run fails at runtime.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bench import (
    PipelineConfig,
    boundary_sweep,
    estimate_snapshot,
    run_monte_carlo,
    write_plot_data,
    write_summary_json,
    write_sweep_csv,
    write_trials_csv,
)
from .config import GOLDEN, golden_path, load_config, load_scenario, pipeline_from_config, schema_text
from .isolate import Snapshot
from .simkit import ConfigError, build_scene, synth_components

logger = logging.getLogger("anfdoa")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
SNAPSHOT_LEN = 512


class UsageError(Exception):
    """Bad arguments or input that fails validation (exit status 1)."""


# --------------------------------------------------------------------------
# cf32 recordings: little-endian float32 pairs, frames interleaved across
# channels (ch0 I, ch0 Q, ch1 I, ch1 Q, ...).

_CF32 = np.dtype("<c8")


@dataclass(frozen=True)
class IqRecording:
    path: Path
    f_s: float
    M: int = 2
    f_c: float | None = None

    def __post_init__(self):
        if self.M < 2:
            raise UsageError(f"--channels must be >= 2 for direction finding, got {self.M}")
        if not self.f_s > 0:
            raise UsageError(f"--fs must be positive, got {self.f_s}")


def write_cf32(path, blocks) -> int:
    """Append (M, N) blocks to a cf32 file in frame-interleaved order.

    Returns the number of frames written.
    """
    frames = 0
    with open(path, "wb") as fh:
        for b in blocks:
            b = np.asarray(b)
            fh.write(np.ascontiguousarray(b.T).astype(_CF32).tobytes())
            frames += b.shape[1]
    return frames


def read_cf32(rec: IqRecording) -> np.ndarray:
    """Load a recording as an (M, n_frames) complex64 array."""
    try:
        raw = Path(rec.path).read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {rec.path}: {e.strerror or e}") from None
    frame = _CF32.itemsize * rec.M
    extra = len(raw) % frame
    if extra:
        offset = len(raw) - extra
        raise UsageError(
            f"{rec.path}: truncated frame at byte offset {offset} "
            f"({extra} trailing bytes, frame size is {frame} bytes for {rec.M} channels)"
        )
    return np.frombuffer(raw, dtype=_CF32).reshape(-1, rec.M).T


def split_snapshots(data: np.ndarray, n: int = SNAPSHOT_LEN) -> list:
    """Non-overlapping n-sample windows; a trailing partial window is dropped."""
    count = data.shape[1] // n
    return [data[:, i * n:(i + 1) * n] for i in range(count)]


def process_recording(rec: IqRecording, S: int, pipeline: PipelineConfig, n: int = SNAPSHOT_LEN):
    """Run cascade, isolation and Capon on every snapshot of a recording.

    Returns a list of (snapshot index, traces, stages, isolated, Snapshot).
    """
    data = read_cf32(rec)
    windows = split_snapshots(data, n)
    if not windows:
        raise UsageError(f"{rec.path}: {data.shape[1]} frames is shorter than one {n}-sample snapshot")
    if data.shape[1] % n:
        logger.info("dropping %d trailing frames", data.shape[1] % n)
    out = []
    for i, w in enumerate(windows):
        x = Snapshot(w.astype(np.complex128), rec.f_s)
        traces, stages, isolated = estimate_snapshot(x, S, pipeline)
        out.append((i, traces, stages, isolated, x))
    return out


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _scenario(args):
    src = args.config
    if src is None:
        raise UsageError("--config is required (a file or one of: " + ", ".join(GOLDEN) + ")")
    if src not in GOLDEN and not Path(src).exists():
        raise UsageError(f"config file {src} does not exist")
    return load_scenario(src, trials=args.trials, seed=args.seed, f_s=args.fs, f_c=args.fc)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _first_trial_plots(scenario, out: Path):
    scene = scenario.scene
    comps, noise, _, _ = synth_components(scene, scenario.seed)
    x = Snapshot(comps.sum(axis=0) + noise, scene.f_s)
    traces, stages, isolated = estimate_snapshot(x, len(scene.txs), scenario.pipeline)
    plot = _out_dir(out / "plot")
    write_plot_data(x, traces, stages, isolated, plot)


def _export_iq(scenario, path) -> int:
    scene = scenario.scene

    def blocks():
        for t in range(scenario.trials):
            comps, noise, _, _ = synth_components(scene, scenario.seed + t)
            yield comps.sum(axis=0) + noise

    return write_cf32(path, blocks())


def _run_sweep(scenario, out: Path, workers: int):
    table = boundary_sweep(scenario, workers=workers)
    write_sweep_csv(table, out / "sweep.csv")
    print(f"{'delta_f_khz':>12} {'tx0_rmse':>9} {'tx1_rmse':>9}")
    for r in table.rows:
        print(f"{str(r.delta_f_khz):>12} {r.tx0_rmse_deg:9.2f} {r.tx1_rmse_deg:9.2f}")
    return table


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    out = _out_dir(args.out)
    workers = int(scenario.config.get("mc", {}).get("workers", 1))
    logger.info("running %s: %d trials from seed %d", scenario.name, scenario.trials, scenario.seed)
    result = run_monte_carlo(scenario, workers=workers)
    write_trials_csv(result, out / "trials.csv")
    write_summary_json(result, out / "summary.json", scenario.config)
    _first_trial_plots(scenario, out)
    if args.export_iq:
        frames = _export_iq(scenario, args.export_iq)
        logger.info("wrote %d frames to %s", frames, args.export_iq)
    for i, tx in enumerate(scenario.scene.txs):
        print(f"{tx.name}: RMSE anf {result.rmse_anf[i]:.3f} deg, oracle {result.rmse_oracle[i]:.3f} deg")
    if result.failures:
        print(f"{result.failures} of {len(result.trials)} trials failed (see summary.json)")
    if args.sweep:
        _run_sweep(scenario, out, workers)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _scenario(args)
    out = _out_dir(args.out)
    _run_sweep(scenario, out, int(scenario.config.get("mc", {}).get("workers", 1)))
    return EXIT_OK


def _iq_pipeline(args):
    """Pipeline settings for recorded IQ: anf/doa sections of --config if
    given, half-wavelength spacing unless the config says otherwise."""
    if args.config is None:
        return PipelineConfig(), None
    cfg = load_config(golden_path(args.config) if args.config in GOLDEN else args.config)
    scene_cfg = {k: v for k, v in cfg.items() if k in ("room", "rx", "signal")}
    scene = build_scene(scene_cfg)
    return pipeline_from_config(cfg, scene.d_over_lambda), scene


def cmd_process_iq(args) -> int:
    pipeline, scene = _iq_pipeline(args)
    f_s = args.fs if args.fs is not None else (scene.f_s if scene else None)
    if f_s is None:
        raise UsageError("--fs is required when no --config is given")
    S = args.stages
    if S < 1:
        raise UsageError(f"--stages must be >= 1, got {S}")
    if pipeline.init_offsets is not None and len(pipeline.init_offsets) != S:
        pipeline = replace(pipeline, init_offsets=None)
    rec = IqRecording(Path(args.recording), f_s, args.channels, args.fc)
    results = process_recording(rec, S, pipeline)

    out = _out_dir(args.out)
    with open(out / "estimates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snapshot", "stage", "theta_deg", "trace_median_hz"])
        for i, _, stages, _, _ in results:
            for s, st in enumerate(stages):
                w.writerow([i, s, repr(st.theta_deg), repr(st.trace_median_hz)])
    _, traces, stages, isolated, x = results[0]
    write_plot_data(x, traces, stages, isolated, _out_dir(out / "plot"))

    angles = np.array([[st.theta_deg for st in r[2]] for r in results])
    for s in range(S):
        print(f"stage {s}: median angle {np.median(angles[:, s]):.1f} deg over {len(results)} snapshots")
    return EXIT_OK


def cmd_schema(args) -> int:
    text = schema_text()
    if args.out == "-":
        sys.stdout.write(text)
        return EXIT_OK
    path = Path(args.out)
    if path.exists() and not args.force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    path.write_text(text)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="anfdoa", description="ANF source separation and Capon DoA on a two-element array.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_flags(sp):
        sp.add_argument("--config", help="scenario YAML file or golden name (two_tx, three_tx, boundary)")
        sp.add_argument("--trials", type=int, help="override mc.trials")
        sp.add_argument("--seed", type=int, help="override mc.seed")
        sp.add_argument("--fs", type=float, help="override signal.f_s (Hz)")
        sp.add_argument("--fc", type=float, help="override signal.f_c (Hz)")
        sp.add_argument("--out", default="results", help="output directory (default: results)")

    sp = sub.add_parser("simulate", help="Monte Carlo run of a scenario")
    scenario_flags(sp)
    sp.add_argument("--sweep", action="store_true", help="also run the boundary sweep")
    sp.add_argument("--export-iq", metavar="PATH", help="write every trial's snapshot to a cf32 recording")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="boundary sweep of a two-transmitter scenario")
    scenario_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("process-iq", help="estimate angles from a cf32 recording")
    sp.add_argument("recording", help="frame-interleaved little-endian complex float32 file")
    sp.add_argument("--fs", type=float, help="sample rate of the recording (Hz)")
    sp.add_argument("--fc", type=float, help="carrier frequency (Hz), informational")
    sp.add_argument("--channels", type=int, default=2, help="channels per frame (default: 2)")
    sp.add_argument("--stages", type=int, default=2, help="ANF stages, one per transmitter (default: 2)")
    sp.add_argument("--config", help="scenario YAML whose anf/doa/rx sections set the estimator")
    sp.add_argument("--out", default="results", help="output directory (default: results)")
    sp.set_defaults(func=cmd_process_iq)

    sp = sub.add_parser("schema", help="write an annotated scenario template")
    sp.add_argument("--out", default="scenario.yaml", help="destination file, '-' for stdout")
    sp.add_argument("--force", action="store_true", help="overwrite an existing file")
    sp.set_defaults(func=cmd_schema)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help or a usage error
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"anfdoa: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - top-level reporting
        logger.debug("runtime failure", exc_info=True)
        print(f"anfdoa: runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
