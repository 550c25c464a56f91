import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from dynabg.imaging import (Frame, FrameSequence, ImagingError, downscale, load_sequence, read_frame,
                            stack, to_grayscale, unstack, upsample, write_frame)

u8 = st.integers(0, 255)


def frames_strategy(min_len=1, max_len=5):
    return st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(min_len, max_len)).flatmap(
        lambda s: hnp.arrays(np.uint8, (s[2], s[1], s[0]))
    )


# --- Frame / FrameSequence ---

def test_frame_is_read_only_copy():
    src = np.zeros((2, 3), np.uint8)
    f = Frame(src)
    src[0, 0] = 9
    assert f.data[0, 0] == 0
    with pytest.raises(ValueError):
        f.data[0, 0] = 1
    assert (f.width, f.height) == (3, 2)


@pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.zeros(4), np.array([[256]]), np.array([[-1]]),
                                 np.array([[1.5]])])
def test_frame_rejects_invalid(bad):
    with pytest.raises(ImagingError):
        Frame(bad)


def test_frame_accepts_integral_floats():
    assert Frame(np.array([[3.0, 255.0]])).data.dtype == np.uint8


def test_sequence_size_mismatch_names_both_sizes():
    with pytest.raises(ImagingError, match=r"2x2.*3x2|3x2.*2x2"):
        FrameSequence([Frame(np.zeros((2, 2))), Frame(np.zeros((2, 3)))])


def test_sequence_needs_two_frames():
    with pytest.raises(ImagingError):
        FrameSequence([Frame(np.zeros((2, 2)))])


# --- grayscale ---

@pytest.mark.parametrize("rgb, y", [((255, 255, 255), 255), ((0, 0, 0), 0), ((255, 0, 0), 76)])
def test_grayscale_examples(rgb, y):
    assert to_grayscale(*rgb) == y


@given(u8)
def test_grayscale_fixes_gray(v):
    assert to_grayscale(v, v, v) == v


@given(u8, u8, u8, st.integers(0, 2))
def test_grayscale_monotone(r, g, b, ch):
    rgb = [r, g, b]
    if rgb[ch] == 255:
        return
    up = list(rgb)
    up[ch] += 1
    assert to_grayscale(*up) >= to_grayscale(*rgb)


def test_grayscale_vectorized_matches_scalar(rng):
    r, g, b = rng.integers(0, 256, (3, 50))
    out = to_grayscale(r, g, b)
    assert out.dtype == np.uint8
    assert [to_grayscale(*t) for t in zip(r, g, b)] == out.tolist()


# --- stack / unstack ---

def test_stack_examples():
    seq = FrameSequence([Frame(np.array([[5], [9]])), Frame(np.array([[7], [3]]))])
    np.testing.assert_array_equal(stack(seq), [[5, 7], [9, 3]])
    one = FrameSequence([Frame(np.array([[4]]))] * 3)
    np.testing.assert_array_equal(stack(one), [[4, 4, 4]])
    assert stack(seq).dtype == np.float64


def test_stack_is_row_major():
    f = Frame(np.arange(6).reshape(2, 3))
    np.testing.assert_array_equal(stack(FrameSequence([f, f]))[:, 0], np.arange(6))


def test_unstack_examples():
    out = unstack(np.array([[5, 7], [9, 3]]), width=1, height=2)
    assert [f.data.ravel().tolist() for f in out] == [[5, 9], [7, 3]]
    clamped = unstack(np.array([[260.4], [-3.0]]), width=1, height=2)
    assert clamped[0].data.ravel().tolist() == [255, 0]


def test_unstack_dimension_mismatch():
    with pytest.raises(ImagingError):
        unstack(np.zeros((5, 2)), width=2, height=2)


@given(frames_strategy())
def test_stack_unstack_roundtrip(arr):
    seq = FrameSequence([Frame(a) for a in arr], min_length=1)
    back = unstack(stack(seq), seq.width, seq.height)
    assert [f.data.tolist() for f in back] == [f.data.tolist() for f in seq]


@given(frames_strategy().flatmap(lambda a: st.tuples(st.just(a), hnp.arrays(np.uint8, a.shape))))
def test_stack_linear(pair):
    a, b = pair
    a = a // 2
    b = b // 2
    sa = stack([Frame(x) for x in a])
    sb = stack([Frame(x) for x in b])
    ssum = stack([Frame(x) for x in a + b])
    np.testing.assert_array_equal(ssum, sa + sb)


# --- file IO ---

def _write_pngs(d, arrays, mode="L", names=None):
    d.mkdir(parents=True, exist_ok=True)
    for i, a in enumerate(arrays):
        name = names[i] if names else f"in{i + 1:06d}.png"
        Image.fromarray(a, mode=mode if a.ndim == 2 else "RGB").save(d / name)


def test_load_sequence_lexicographic(tmp_path):
    arrays = [np.full((4, 4), v, np.uint8) for v in (10, 20, 30)]
    _write_pngs(tmp_path, arrays, names=["in000002.png", "in000001.png", "in000003.png"])
    seq = load_sequence(tmp_path)
    assert (len(seq), seq.width, seq.height) == (3, 4, 4)
    assert [int(f.data[0, 0]) for f in seq] == [20, 10, 30]


def test_load_sequence_mixed_sizes(tmp_path):
    _write_pngs(tmp_path, [np.zeros((4, 4), np.uint8), np.zeros((5, 4), np.uint8)])
    with pytest.raises(ImagingError, match=r"in000002\.png.*4x5.*in000001\.png.*4x4"):
        load_sequence(tmp_path)


def test_load_sequence_empty(tmp_path):
    with pytest.raises(ImagingError, match="no frames"):
        load_sequence(tmp_path, "*.png")


def test_load_sequence_undecodable_names_file(tmp_path):
    _write_pngs(tmp_path, [np.zeros((2, 2), np.uint8)])
    (tmp_path / "in000002.png").write_text("not an image")
    with pytest.raises(ImagingError, match="in000002.png"):
        load_sequence(tmp_path)


def test_load_sequence_images_only_skips_reports(tmp_path):
    _write_pngs(tmp_path, [np.zeros((2, 2), np.uint8)] * 2)
    (tmp_path / "run.json").write_text("{}")
    assert len(load_sequence(tmp_path, images_only=True)) == 2


def test_rgb_input_converted(tmp_path):
    rgb = np.zeros((2, 2, 3), np.uint8)
    rgb[..., 0] = 255
    _write_pngs(tmp_path, [rgb])
    assert read_frame(tmp_path / "in000001.png").data.tolist() == [[76, 76], [76, 76]]


@pytest.mark.parametrize("suffix", [".png", ".pgm"])
def test_write_read_roundtrip(tmp_path, rng, suffix):
    f = Frame(rng.integers(0, 256, (5, 7)))
    write_frame(f, tmp_path / f"x{suffix}")
    assert read_frame(tmp_path / f"x{suffix}") == f


def test_downscale_box_filter():
    a = np.array([[0, 2, 9], [4, 6, 9], [9, 9, 9]], np.uint8)
    np.testing.assert_array_equal(downscale(a, 2), [[3]])
    np.testing.assert_array_equal(downscale(a, 1), a)
    with pytest.raises(ImagingError):
        downscale(a, 4)


def test_upsample_restores_size():
    f = Frame(np.array([[0, 255]], np.uint8))
    big = upsample(f, 2, width=5, height=3)
    assert big.shape == (3, 5)
    assert big.data[:, :2].max() == 0 and big.data[:, 2:].min() == 255
