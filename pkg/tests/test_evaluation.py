import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynabg.evaluation import (ConfusionCounts, SceneConfig, compare, evaluate_sequence, f_measure, metrics,
                               read_temporal_roi, synth_scene, write_reports, write_scene)
from dynabg.imaging import Frame, ImagingError, stack, write_frame

counts = st.builds(ConfusionCounts, st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))


def hand_case():
    gt = np.zeros((4, 4), np.uint8)
    gt.flat[:10] = 255
    mask = np.zeros((4, 4), np.uint8)
    mask.flat[:8] = 255
    mask.flat[14:16] = 255
    return Frame(mask), Frame(gt)


def test_compare_examples():
    mask, gt = hand_case()
    c = compare(gt, gt)
    assert (c.tp, c.fn, c.fp) == (10, 0, 0)
    c = compare(Frame(np.zeros((4, 4))), gt)
    assert (c.tp, c.fn, c.fp) == (0, 10, 0)
    c = compare(mask, gt)
    assert (c.tp, c.fn, c.fp, c.tn, c.evaluated) == (8, 2, 2, 4, 16)


def test_cdnet_labels():
    gt = Frame(np.array([[0, 50, 85, 170, 255]]))
    full = Frame(np.full((1, 5), 255))
    c = compare(full, gt)
    # 50 counts as background, 85/170 are ignored
    assert (c.tp, c.fn, c.fp, c.evaluated) == (1, 0, 2, 3)


def test_compare_roi_and_shape():
    mask, gt = hand_case()
    roi = np.zeros((4, 4), np.uint8)
    roi[:2] = 255
    c = compare(mask, gt, Frame(roi))
    assert c.evaluated == 8 and (c.tp, c.fn, c.fp) == (8, 0, 0)
    with pytest.raises(ValueError):
        compare(mask, Frame(np.zeros((3, 4))))


def test_metrics_examples():
    r = metrics(ConfusionCounts(tp=8, fn=2, fp=2))
    assert (r.recall, r.precision, r.f_measure) == pytest.approx((0.8, 0.8, 0.8))
    assert f_measure(0.957, 0.787) == pytest.approx(0.8635, abs=5e-4)
    assert f_measure(0.955, 0.930) == pytest.approx(0.9423, abs=5e-4)


def test_metrics_degenerate_flagged():
    r = metrics(ConfusionCounts())
    assert (r.recall, r.precision, r.f_measure) == (0, 0, 0)
    assert r.degenerate
    assert f_measure(0, 0) == 0


@given(counts, st.integers(1, 50))
def test_metrics_scale_free(c, k):
    a, b = metrics(c), metrics(c.scaled(k))
    assert (a.recall, a.precision, a.f_measure) == pytest.approx((b.recall, b.precision, b.f_measure))


@given(counts)
def test_f_between_recall_and_precision(c):
    r = metrics(c)
    if r.f_measure > 0:
        lo, hi = sorted((r.recall, r.precision))
        assert lo - 1e-12 <= r.f_measure <= hi + 1e-12


@given(st.integers(0, 2**32 - 1))
def test_counts_sum_to_evaluated(seed):
    rng = np.random.default_rng(seed)
    gt = Frame(rng.choice([0, 50, 85, 170, 255], (6, 5)))
    mask = Frame(rng.choice([0, 255], (6, 5)))
    c = compare(mask, gt)
    assert c.tp + c.fn + c.fp + c.tn == c.evaluated
    assert c.tp + c.fn == int(np.sum(gt.data == 255))


# --- harness ---

def _gt_dir(tmp_path, gts, roi=None):
    d = tmp_path / "video" / "groundtruth"
    d.mkdir(parents=True)
    for i, g in enumerate(gts, start=1):
        write_frame(g, d / f"gt{i:06d}.png")
    if roi:
        (tmp_path / "video" / "temporalROI.txt").write_text(f"{roi[0]} {roi[1]}\n")
    return d


def test_evaluate_sequence_accumulates(tmp_path):
    mask, gt = hand_case()
    d = _gt_dir(tmp_path, [gt, gt])
    r = evaluate_sequence([mask, mask], d)
    assert (r.counts.tp, r.counts.fn, r.counts.fp) == (16, 4, 4)
    assert r.f_measure == pytest.approx(0.8)
    assert evaluate_sequence([gt, gt], d).f_measure == 1.0


def test_evaluate_sequence_temporal_roi(tmp_path):
    mask, gt = hand_case()
    d = _gt_dir(tmp_path, [gt, gt, gt], roi=(2, 2))
    assert read_temporal_roi(d.parent / "temporalROI.txt") == (2, 2)
    r = evaluate_sequence([Frame(np.zeros((4, 4))), mask, Frame(np.zeros((4, 4)))], d)
    assert (r.counts.tp, r.counts.fn, r.counts.fp) == (8, 2, 2)


def test_evaluate_sequence_errors(tmp_path):
    mask, gt = hand_case()
    d = _gt_dir(tmp_path, [gt])
    with pytest.raises(ImagingError, match="frame 2"):
        evaluate_sequence([mask, mask], d)
    with pytest.raises(ImagingError, match="frame 1"):
        evaluate_sequence([Frame(np.zeros((3, 3)))], d)


def test_write_reports(tmp_path):
    r = metrics(ConfusionCounts(tp=8, fn=2, fp=2))
    write_reports({"boats": r}, tmp_path / "m.csv", tmp_path / "m.json")
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["video", "recall", "precision", "fmeasure"]
    assert rows[1][0] == "boats" and float(rows[1][3]) == pytest.approx(0.8)
    assert json.loads((tmp_path / "m.json").read_text())["boats"]["fmeasure"] == pytest.approx(0.8)


# --- synthetic scenes ---

def test_static_scene_differs_only_on_square():
    frames, gts = synth_scene(SceneConfig(kind="static", frames=6))
    D, G = stack(frames), stack(gts) > 0
    ref = D[:, 0]
    for k in range(1, 6):
        changed = D[:, k] != ref
        assert np.all(G[changed, k] | G[changed, 0])


def test_scene_deterministic():
    for kind in ("static", "wave", "snow"):
        a = synth_scene(SceneConfig(kind=kind, seed=5, noise_sigma=2))
        b = synth_scene(SceneConfig(kind=kind, seed=5, noise_sigma=2))
        assert list(a[0]) == list(b[0]) and list(a[1]) == list(b[1])


def test_wave_period_by_autocorrelation():
    cfg = SceneConfig(kind="wave", wave_amplitude=30, wave_period=16, wave_crest=1, wave_perspective=0,
                      frames=64, object_size=4, velocity=(0.5, 0.0), background_blocks=0)
    frames, gts = synth_scene(cfg)
    D, G = stack(frames), stack(gts) > 0
    bg = np.nonzero(~G.any(axis=1))[0]
    x = D[bg] - D[bg].mean(axis=1, keepdims=True)
    ac = np.array([np.sum(x[:, :-lag] * x[:, lag:]) / (x.shape[1] - lag) for lag in range(1, 30)])
    assert np.argmax(ac) + 1 == 16


def test_snow_flecks_are_sparse_and_bright():
    frames, gts = synth_scene(SceneConfig(kind="snow", snow_rate=0.02, seed=1))
    static, _ = synth_scene(SceneConfig(kind="static", seed=1))
    D, S, G = stack(frames), stack(static), stack(gts) > 0
    diff = (D != S) & ~G
    assert 0 < diff.mean() < 0.1
    assert np.all(D[diff] == 240)


def test_scene_rejects_escape():
    with pytest.raises(ValueError, match="frame"):
        SceneConfig(velocity=(5, 0), frames=30)
    with pytest.raises(ValueError):
        SceneConfig(kind="fog")


def test_write_scene_layout(tmp_path):
    cfg = SceneConfig(frames=3, width=16, height=16, object_size=4, velocity=(1, 0))
    frames, gts = synth_scene(cfg)
    out = write_scene(frames, gts, tmp_path / "s", cfg)
    assert sorted(p.name for p in (out / "input").iterdir()) == [f"in{i:06d}.png" for i in (1, 2, 3)]
    assert (out / "temporalROI.txt").read_text().split() == ["1", "3"]
    assert json.loads((out / "scene.json").read_text())["frames"] == 3
    r = evaluate_sequence(list(gts), out / "groundtruth")
    assert r.f_measure == 1.0
