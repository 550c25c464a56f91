"""Run the detection modes on CDNET 2014 videos and write a metrics table.

Each video directory holds ``input/``, ``groundtruth/``, ``temporalROI.txt``
and ``ROI.bmp``. Frames are box-downscaled before detection and the masks
are upsampled back for scoring at full resolution. A window of frames
starting at the temporal ROI keeps the matrix size manageable.

    python3 scripts/cdnet.py ~/cdnet2014/dynamicBackground/* --frames 200 --out results/cdnet.csv
"""

import argparse
import csv
import time
import warnings
from pathlib import Path

from dynabg.detection import MODES, DetectionConfig, detect
from dynabg.evaluation import evaluate_sequence, read_temporal_roi
from dynabg.imaging import IMAGE_SUFFIXES, Frame, FrameSequence, downscale, read_frame, upsample
from dynabg.solver import ConvergenceWarning


def load_window(video: Path, start: int, count: int, factor: int):
    files = sorted(p for p in (video / "input").iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    files = files[start - 1:start - 1 + count]
    full = [read_frame(p) for p in files]
    small = FrameSequence([Frame(downscale(f.data, factor)) for f in full])
    return small, full[0].width, full[0].height


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("videos", nargs="+", type=Path)
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    p.add_argument("--downscale", type=int, default=4)
    p.add_argument("--frames", type=int, default=200, help="frames per video, from the temporal ROI start")
    p.add_argument("--out", type=Path, default=None)
    args = p.parse_args()

    rows = []
    for video in args.videos:
        if not (video / "input").is_dir():
            print(f"skipping {video}: no input/")
            continue
        roi_range = read_temporal_roi(video / "temporalROI.txt") or (1, None)
        start = roi_range[0]
        seq, width, height = load_window(video, start, args.frames, args.downscale)
        roi = read_frame(video / "ROI.bmp") if (video / "ROI.bmp").exists() else None
        for mode in args.modes:
            t = time.perf_counter()
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ConvergenceWarning)
                res = detect(seq, DetectionConfig(mode=mode))
            masks = [upsample(m, args.downscale, width, height) for m in res.masks]
            r = evaluate_sequence(masks, video / "groundtruth", roi=roi, first_frame=start)
            row = {"video": video.name, "mode": mode, "frames": len(seq), "recall": r.recall,
                   "precision": r.precision, "fmeasure": r.f_measure,
                   "iterations": res.decomposition.iterations, "converged": not caught,
                   "seconds": time.perf_counter() - t}
            rows.append(row)
            print(f"{video.name:<16} {mode:<15} R {r.recall:.3f} P {r.precision:.3f} F {r.f_measure:.3f} "
                  f"{row['seconds']:.0f}s")

    if args.out and rows:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
