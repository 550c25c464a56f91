"""Command line front end: ``dynabg {pool,segment,detect,eval,synth,bench}``.

Every subcommand writes ``run.json`` (``eval.json`` for ``eval``) into its
output directory with the command line, the resolved configuration,
library versions, timings and, for ``detect``, solver diagnostics. Worker threads are capped by the
``DYNABG_THREADS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import re
import sys
import time
import warnings
from dataclasses import asdict
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from ._parallel import THREADS_ENV, pmap, worker_count
from .bench import run_bench
from .detection import MODES, DEFAULT_EPSILON, DetectionConfig, StageError, detect
from .evaluation import BACKGROUND_KINDS, SceneConfig, evaluate_sequence, synth_scene, write_reports, write_scene
from .gmp import PoolingConfig, pool_sequence
from .imaging import IMAGE_SUFFIXES, FrameSequence, ImagingError, load_sequence, read_frame, write_frame
from .partition import GroupPartition, partition_stats
from .segmentation import SegmentationConfig, segment_video
from .solver import WEIGHT_MODES, ConvergenceWarning, SolverConfig

log = logging.getLogger("dynabg")

REPORT_NAME = "run.json"
EVAL_REPORT_NAME = "eval.json"
PARTITION_NAME = "partition.txt"


class CliError(Exception):
    pass


def _versions() -> dict:
    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"dynabg": own, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _write_report(out: Path, args, started: float, name: str = REPORT_NAME, **extra) -> None:
    report = {
        "command": args.command,
        "argv": args.argv,
        "versions": _versions(),
        "threads": worker_count(args.threads),
        "wall_seconds": time.perf_counter() - started,
    }
    report.update(extra)
    (out / name).write_text(json.dumps(report, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, (np.integer, np.floating)):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


# --- config assembly ---------------------------------------------------------

def _pooling(args) -> PoolingConfig:
    return PoolingConfig(window_size=args.window, sigma=args.sigma)


def _segmentation(args) -> SegmentationConfig:
    return SegmentationConfig(target_count=args.superpixels, compactness=args.compactness,
                              merge_threshold=args.merge_threshold,
                              center_threshold=args.center_threshold,
                              similarity_threshold=args.similarity_threshold)


def _solver(args) -> SolverConfig:
    return SolverConfig(lam=args.lam, mu0=args.mu0, rho=args.rho, tol=args.tol, max_iter=args.max_iter)


def _detection(args) -> DetectionConfig:
    return DetectionConfig(pooling=_pooling(args), segmentation=_segmentation(args), solver=_solver(args),
                           epsilon=args.epsilon, weight_mode=args.weight_mode, mode=args.mode,
                           lambda_scale=args.lambda_scale)


def _frames_dir(path: Path) -> Path:
    """Accept a CDNET video directory (with ``input/``) or a plain frame directory."""
    if not path.is_dir():
        raise CliError(f"not a directory: {path}")
    return path / "input" if (path / "input").is_dir() else path


def _load(args, path: Path) -> FrameSequence:
    return load_sequence(_frames_dir(path), args.pattern, args.downscale, images_only=True)


def _write_frames(seq, out: Path, prefix: str, first: int = 1) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(seq, start=first):
        write_frame(f, out / f"{prefix}{i:06d}.png")


def _first_number(directory: Path) -> int:
    nums = [int(m.group(1)) for p in directory.iterdir()
            if p.suffix.lower() in IMAGE_SUFFIXES and (m := re.search(r"(\d+)", p.stem))]
    return min(nums) if nums else 1


# --- subcommands -------------------------------------------------------------

def cmd_pool(args) -> None:
    config = _pooling(args)
    t = time.perf_counter()
    seq = _load(args, args.input)
    pooled = pool_sequence(seq, config, args.threads)
    _write_frames(pooled, args.out, "in", _first_number(_frames_dir(args.input)))
    _write_report(args.out, args, t, pooling=asdict(config), frames=len(seq),
                  width=seq.width, height=seq.height)


def cmd_segment(args) -> None:
    pooling, seg = _pooling(args), _segmentation(args)
    t = time.perf_counter()
    seq = _load(args, args.input)
    pooled = pool_sequence(seq, pooling, args.threads)
    C = segment_video(pooled, seg, args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    C.write(args.out / PARTITION_NAME)
    stats = partition_stats(C)
    (args.out / "partition.json").write_text(json.dumps(stats, indent=2))
    _write_report(args.out, args, t, pooling=asdict(pooling), segmentation=asdict(seg),
                  partition=stats, frames=len(seq), width=seq.width, height=seq.height)


def _detect_one(args, config: DetectionConfig, src: Path, out: Path, partition, workers) -> dict:
    t = time.perf_counter()
    seq = _load(args, src)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        res = detect(seq, config, workers, partition=partition)
    for w in caught:
        log.warning("%s: %s", src.name, w.message)
    _write_frames(res.masks, out, "bin", _first_number(_frames_dir(src)))
    dec = res.decomposition
    if args.trace:
        dec.write_trace(out / "trace.csv")
    diag = {"iterations": dec.iterations, "final_residual": dec.final_residual, "objective": dec.objective,
            "converged": dec.converged, "rank": dec.rank, "lambda": dec.lam,
            "foreground_pixels": int(sum(int((m.data > 0).sum()) for m in res.masks))}
    extra = {"input": src, "frames": len(seq), "width": seq.width, "height": seq.height,
             "config": asdict(config), "timings": res.timings, "solver": diag}
    if res.partition is not None:
        extra["partition"] = partition_stats(res.partition)
    _write_report(out, args, t, **extra)
    log.info("%s: %d iterations, residual %.2e, rank %d", src.name, dec.iterations, dec.final_residual, dec.rank)
    return diag


def cmd_detect(args) -> None:
    config = _detection(args)
    partition = GroupPartition.read(args.partition) if args.partition else None
    inputs = args.inputs
    if len(inputs) == 1:
        _detect_one(args, config, inputs[0], args.out, partition, args.threads)
        return
    if partition is not None:
        raise CliError("--partition needs a single input")
    # one pipeline per video; each stays single-threaded inside
    pmap(lambda src: _detect_one(args, config, src, args.out / src.name, None, 1), inputs, args.threads)


def cmd_eval(args) -> None:
    t = time.perf_counter()
    masks_dir = args.masks
    if not masks_dir.is_dir():
        raise CliError(f"not a directory: {masks_dir}")
    files = sorted(masks_dir.glob("bin*.*"))
    if not files:
        raise ImagingError(f"no bin*.png masks in {masks_dir}")
    masks = [read_frame(p) for p in files]
    first = int(re.search(r"(\d+)", files[0].stem).group(1))
    roi = read_frame(args.roi) if args.roi else None
    report = evaluate_sequence(masks, args.gt, roi=roi, first_frame=first)
    name = args.video or args.gt.resolve().parent.name
    out = args.out or masks_dir
    out.mkdir(parents=True, exist_ok=True)
    write_reports({name: report}, out / "metrics.csv", out / "metrics.json")
    print(f"{name}: recall {report.recall:.4f} precision {report.precision:.4f} F {report.f_measure:.4f}")
    # masks usually sit next to the detect report; keep both
    _write_report(out, args, t, EVAL_REPORT_NAME, masks=masks_dir, groundtruth=args.gt, counts=asdict(report.counts),
                  recall=report.recall, precision=report.precision, fmeasure=report.f_measure)


def cmd_synth(args) -> None:
    kw = dict(kind=args.kind, seed=args.seed, width=args.width, height=args.height, frames=args.frames,
              object_size=args.object_size, noise_sigma=args.noise)
    if args.amplitude is not None:
        kw["wave_amplitude"] = args.amplitude
    if args.period is not None:
        kw["wave_period"] = args.period
    if args.crest is not None:
        kw["wave_crest"] = args.crest
    if args.snow_rate is not None:
        kw["snow_rate"] = args.snow_rate
    config = SceneConfig(**kw)
    t = time.perf_counter()
    frames, gts = synth_scene(config)
    write_scene(frames, gts, args.out, config)
    _write_report(args.out, args, t, scene=asdict(config))


def cmd_bench(args) -> None:
    config = _solver(args)
    t = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        rows = run_bench(args.repeats, args.seed, config)
    print(f"{'solver':<8} {'seed':>4} {'iters':>5} {'seconds':>8} {'residual':>9} {'err A':>9} {'err E':>9}")
    for r in rows:
        print(f"{r['solver']:<8} {r['seed']:>4} {r['iterations']:>5} {r['seconds']:>8.3f} "
              f"{r['residual']:>9.2e} {r['error_A']:>9.2e} {r['error_E']:>9.2e}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_report(args.out, args, t, solver=asdict(config), rows=rows)


# --- parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one line instead of the usage dump
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _pool_flags(p) -> None:
    p.add_argument("--window", type=int, default=5, help="pooling window side (odd)")
    p.add_argument("--sigma", type=float, default=10.0, help="Gaussian scale, intensity units")


def _input_flags(p) -> None:
    p.add_argument("--pattern", default="*", help="frame filename glob (default: all images)")
    p.add_argument("--downscale", type=int, default=1, help="integer box-filter downscale at load time")


def _seg_flags(p) -> None:
    p.add_argument("--superpixels", type=int, default=200)
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--merge-threshold", type=float, default=12.0)
    p.add_argument("--center-threshold", type=float, default=20.0, help="cross-frame centroid distance, px")
    p.add_argument("--similarity-threshold", type=float, default=8.0)


def _solver_flags(p) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="sparsity weight (default: lambda-scale / sqrt(max(m, n)))")
    p.add_argument("--rho", type=float, default=1.1)
    p.add_argument("--mu0", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynabg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (capped by ${THREADS_ENV}; default 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="Gaussian max-pooling of every frame")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _pool_flags(p)
    _input_flags(p)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("segment", help="pool, then build the cross-frame group partition")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _pool_flags(p)
    _seg_flags(p)
    _input_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("detect", help="foreground masks for one or more videos")
    p.add_argument("inputs", type=Path, nargs="+")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mode", choices=MODES, default="sc-rpca-stable")
    p.add_argument("--weight-mode", choices=WEIGHT_MODES, default="sqrt")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--lambda-scale", type=float, default=DetectionConfig.lambda_scale)
    p.add_argument("--partition", type=Path, default=None, help="precomputed partition.txt")
    p.add_argument("--trace", action="store_true", help="write per-iteration trace.csv")
    _pool_flags(p)
    _seg_flags(p)
    _solver_flags(p)
    _input_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="recall/precision/F of masks against CDNET ground truth")
    p.add_argument("masks", type=Path)
    p.add_argument("gt", type=Path)
    p.add_argument("--roi", type=Path, default=None, help="ROI image (nonzero = evaluated)")
    p.add_argument("--video", default=None, help="row name (default: ground truth's parent directory)")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic scene in CDNET layout")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--kind", choices=BACKGROUND_KINDS, default="wave")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--object-size", type=int, default=16)
    p.add_argument("--amplitude", type=float, default=None)
    p.add_argument("--period", type=float, default=None)
    p.add_argument("--crest", type=float, default=None)
    p.add_argument("--snow-rate", type=float, default=None)
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="solver exact-recovery timing table")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    _solver_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValueError, CliError, StageError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"dynabg {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
