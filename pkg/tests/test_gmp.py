import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynabg.gmp import (PoolingConfig, conditional_prob, kernel_table, pool_frame, pool_sequence,
                        stable_value, window_scores)
from dynabg.imaging import Frame, FrameSequence

SAMPLE_1 = [[46, 53, 50, 51, 68],
            [68, 68, 53, 45, 49],
            [63, 62, 58, 62, 48],
            [59, 52, 43, 47, 59],
            [82, 79, 65, 62, 45]]
SAMPLE_2 = [[46, 53, 63, 62, 59],
            [68, 69, 52, 82, 79],
            [128] * 5, [128] * 5, [128] * 5]

windows = st.lists(st.integers(0, 255), min_size=1, max_size=30)
sigmas = st.sampled_from([0.5, 2.0, 10.0, 40.0])


def brute_force(window, sigma):
    """Exhaustive argmax by a plain loop, with the same near-tie rule."""
    c = 1.0 / (math.sqrt(2 * math.pi) * sigma)
    scores = [sum(c * math.exp(-(v - u) ** 2 / (2 * sigma ** 2)) for v in window) for u in range(256)]
    best = max(scores)
    return scores, min(u for u in range(256) if scores[u] >= best * (1 - 1e-12))


def test_config_validation():
    with pytest.raises(ValueError, match="window must be odd"):
        PoolingConfig(window_size=4)
    with pytest.raises(ValueError, match="window"):
        PoolingConfig(window_size=0)
    with pytest.raises(ValueError, match="sigma must be positive"):
        PoolingConfig(sigma=0)


def test_conditional_prob_values():
    assert conditional_prob(5, 5, 10) == pytest.approx(0.039894228, abs=1e-9)
    assert conditional_prob(58, 48, 10) == pytest.approx(0.024197072, abs=1e-9)
    with pytest.raises(ValueError):
        conditional_prob(1, 2, 0)
    with pytest.raises(ValueError):
        conditional_prob(1, 2, -1)


@given(st.integers(0, 255), st.integers(0, 255), sigmas)
def test_conditional_prob_symmetric(a, b, s):
    assert conditional_prob(a, b, s) == conditional_prob(b, a, s)


def test_kernel_table_matches_scalar():
    K = kernel_table(7.0)
    assert K.shape == (256, 256)
    assert K[30, 41] == conditional_prob(30, 41, 7.0)


def test_table_samples():
    assert stable_value(SAMPLE_2, 10) == 128
    # regression value, computed once by the exhaustive oracle
    assert stable_value(SAMPLE_1, 10) == 55
    assert brute_force(np.ravel(SAMPLE_1).tolist(), 10)[1] == 55


def test_sample_1_argmax_is_not_the_centre():
    scores, _ = brute_force(np.ravel(SAMPLE_1).tolist(), 10)
    assert scores[55] > scores[58]


def test_constant_window():
    for s in (0.5, 10, 1e4):
        assert stable_value([47] * 25, s) == 47


def test_empty_and_invalid_windows():
    with pytest.raises(ValueError, match="empty"):
        stable_value([], 10)
    with pytest.raises(ValueError):
        stable_value([300], 10)


@given(windows, sigmas)
def test_matches_brute_force(window, sigma):
    assert stable_value(window, sigma) == brute_force(window, sigma)[1]


@given(windows, sigmas, st.randoms(use_true_random=False))
def test_permutation_invariant(window, sigma, r):
    shuffled = list(window)
    r.shuffle(shuffled)
    assert stable_value(shuffled, sigma) == stable_value(window, sigma)


@given(windows)
def test_huge_sigma_is_deterministic(window):
    # scores flatten; the smallest near-tied intensity wins, every time
    a = stable_value(window, 1e4)
    assert a == stable_value(list(reversed(window)), 1e4)
    scores = window_scores(window, 1e4)[0]
    assert scores[a] >= scores.max() * (1 - 1e-12)


def test_pool_frame_examples(rng):
    const = Frame(np.full((6, 7), 128, np.uint8))
    assert pool_frame(const, PoolingConfig(5, 3.0)) == const
    f = Frame(rng.integers(0, 256, (6, 7)))
    assert pool_frame(f, PoolingConfig(1, 10.0)) == f
    out = pool_frame(Frame(np.array(SAMPLE_2, np.uint8)), PoolingConfig(5, 10.0))
    assert out.data[2, 2] == 128


def test_pool_frame_replicates_edges():
    img = np.array([[0, 0, 200], [0, 0, 200], [0, 0, 200]], np.uint8)
    out = pool_frame(Frame(img), PoolingConfig(3, 5.0))
    # corner window (replicated) holds six 200s and three 0s
    assert out.data[0, 2] == 200
    assert out.data[0, 0] == 0


def test_pool_frame_matches_per_window_oracle(rng):
    img = rng.integers(60, 120, (7, 8)).astype(np.uint8)
    cfg = PoolingConfig(3, 6.0)
    out = pool_frame(Frame(img), cfg).data
    padded = np.pad(img, 1, mode="edge")
    for y in range(7):
        for x in range(8):
            assert out[y, x] == brute_force(padded[y:y + 3, x:x + 3].ravel().tolist(), 6.0)[1]


def test_pool_sequence(rng):
    frames = [Frame(rng.integers(0, 256, (5, 5))) for _ in range(4)]
    seq = FrameSequence(frames)
    cfg = PoolingConfig(3, 10.0)
    pooled = pool_sequence(seq, cfg)
    assert [p for p in pooled] == [pool_frame(f, cfg) for f in frames]
    perm = [2, 0, 3, 1]
    pooled_perm = pool_sequence(FrameSequence([frames[i] for i in perm]), cfg)
    assert list(pooled_perm) == [pooled[i] for i in perm]
    const = FrameSequence([Frame(np.full((4, 4), 9))] * 3)
    assert list(pool_sequence(const)) == list(const)


def test_pool_sequence_threads_match(rng, monkeypatch):
    seq = FrameSequence([Frame(rng.integers(0, 256, (9, 9))) for _ in range(5)])
    monkeypatch.setenv("DYNABG_THREADS", "3")
    assert list(pool_sequence(seq, workers=3)) == list(pool_sequence(seq, workers=1))


def test_idempotent_on_constant():
    f = Frame(np.full((5, 5), 77))
    once = pool_frame(f)
    assert pool_frame(once) == once == f
