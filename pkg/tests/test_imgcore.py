"""Tests for image buffers, codec I/O, color, resampling, blur and noise."""

import io
import math

import numpy as np
import pytest
from PIL import Image

from srfidelity.errors import ImageFormatError
from srfidelity.imgcore import (
    ImageBuffer,
    LumaPlane,
    add_gaussian_noise,
    blur_array,
    gaussian_blur,
    gaussian_kernel_1d,
    jpeg_roundtrip,
    load_image,
    noise_array,
    resample_array,
    resize,
    save_image,
    to_luma,
)

# ---------------------------------------------------------------- oracles


def direct_blur_oracle(arr, sigma):
    # Full 2-D kernel, explicit padding, no separability tricks.
    k = gaussian_kernel_1d(sigma)
    r = (len(k) - 1) // 2
    win = np.outer(k, k)
    padded = np.pad(arr, r, mode="symmetric")
    out = np.empty_like(arr, dtype=np.float64)
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            out[i, j] = np.sum(padded[i : i + 2 * r + 1, j : j + 2 * r + 1] * win)
    return out


def _cubic_w(t):
    # Catmull-Rom weight, a = -0.5.
    a = -0.5
    t = abs(t)
    if t < 1.0:
        return (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    if t < 2.0:
        return a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    return 0.0


def naive_resample_oracle(arr, new_w, new_h, kernel):
    # Per-output-pixel evaluation with clamped source indexing.
    h, w = arr.shape
    out = np.empty((new_h, new_w), dtype=np.float64)
    for oy in range(new_h):
        sy = (oy + 0.5) * (h / new_h) - 0.5
        for ox in range(new_w):
            sx = (ox + 0.5) * (w / new_w) - 0.5
            if kernel == "nearest":
                iy = min(max(math.ceil(sy - 0.5), 0), h - 1)
                ix = min(max(math.ceil(sx - 0.5), 0), w - 1)
                out[oy, ox] = arr[iy, ix]
            elif kernel == "bilinear":
                y0 = math.floor(sy)
                x0 = math.floor(sx)
                fy = sy - y0
                fx = sx - x0
                acc = 0.0
                for dy, wy in ((0, 1.0 - fy), (1, fy)):
                    for dx, wx in ((0, 1.0 - fx), (1, fx)):
                        yy = min(max(y0 + dy, 0), h - 1)
                        xx = min(max(x0 + dx, 0), w - 1)
                        acc += wy * wx * arr[yy, xx]
                out[oy, ox] = acc
            else:
                y0 = math.floor(sy)
                x0 = math.floor(sx)
                acc = 0.0
                for dy in range(-1, 3):
                    wy = _cubic_w(sy - (y0 + dy))
                    for dx in range(-1, 3):
                        wx = _cubic_w(sx - (x0 + dx))
                        yy = min(max(y0 + dy, 0), h - 1)
                        xx = min(max(x0 + dx, 0), w - 1)
                        acc += wy * wx * arr[yy, xx]
                out[oy, ox] = acc
    return np.clip(out, 0.0, 255.0)


# ---------------------------------------------------------------- buffers


def test_image_buffer_validation():
    ok = ImageBuffer.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
    assert (ok.width, ok.height, ok.channels) == (4, 4, 3)
    with pytest.raises(ValueError):
        ImageBuffer.from_array(np.zeros((4, 4, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        ImageBuffer.from_array(np.zeros((4, 4, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        ImageBuffer.from_array(np.zeros((0, 4, 3), dtype=np.uint8))


def test_image_buffer_readonly():
    img = ImageBuffer.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1


def test_luma_plane_validation():
    p = LumaPlane.from_array(np.zeros((3, 5)))
    assert (p.width, p.height) == (5, 3)
    with pytest.raises(ValueError):
        LumaPlane.from_array(np.zeros((3, 5, 1)))


# ---------------------------------------------------------------- codec


def test_png_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    for channels in (1, 3):
        arr = rng.integers(0, 256, size=(13, 17, channels), dtype=np.uint8)
        img = ImageBuffer.from_array(arr)
        path = tmp_path / f"c{channels}.png"
        save_image(img, path)
        back = load_image(path)
        assert back.channels == channels
        assert np.array_equal(back.data, img.data)


def test_16bit_png_shifted_down(tmp_path):
    arr16 = np.array([[0, 256, 65535], [513, 4097, 32768]], dtype=np.uint16)
    Image.fromarray(arr16).save(tmp_path / "deep.png")
    img = load_image(tmp_path / "deep.png")
    assert img.channels == 1
    assert np.array_equal(img.data[:, :, 0], (arr16 >> 8).astype(np.uint8))


def test_palette_and_alpha_converted_to_rgb(tmp_path):
    rng = np.random.default_rng(1)
    rgba = rng.integers(0, 256, size=(8, 8, 4), dtype=np.uint8)
    rgba[:, :, 3] = 255
    Image.fromarray(rgba, mode="RGBA").save(tmp_path / "a.png")
    img = load_image(tmp_path / "a.png")
    assert img.channels == 3
    assert np.array_equal(img.data, rgba[:, :, :3])

    pal = Image.fromarray(rgba[:, :, :3], mode="RGB").convert("P")
    pal.save(tmp_path / "p.png")
    assert load_image(tmp_path / "p.png").channels == 3


def test_jpeg_quality_validation(tmp_path):
    img = ImageBuffer.from_array(np.full((8, 8, 3), 128, dtype=np.uint8))
    with pytest.raises(ValueError):
        save_image(img, tmp_path / "x.jpg", fmt="jpeg", quality=0)
    with pytest.raises(ValueError):
        save_image(img, tmp_path / "x.jpg", fmt="jpeg", quality=101)
    with pytest.raises(ValueError):
        jpeg_roundtrip(img, quality=200)


def test_jpeg_roundtrip_matches_file_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    img = ImageBuffer.from_array(
        rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
    )
    mem = jpeg_roundtrip(img, quality=80)
    save_image(img, tmp_path / "x.jpg", fmt="jpeg", quality=80)
    disk = load_image(tmp_path / "x.jpg")
    assert np.array_equal(mem.data, disk.data)


def test_corrupt_file_raises_format_error(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"this is not an image")
    with pytest.raises(ImageFormatError):
        load_image(bad)


def test_missing_file_raises_io_error(tmp_path):
    with pytest.raises(OSError):
        load_image(tmp_path / "missing.png")


# ---------------------------------------------------------------- luma


def test_luma_uniform_gray():
    img = ImageBuffer.from_array(np.full((4, 4, 3), 100, dtype=np.uint8))
    assert np.allclose(to_luma(img).data, 100.0)


def test_luma_pure_red():
    arr = np.zeros((2, 2, 3), dtype=np.uint8)
    arr[:, :, 0] = 255
    lum = to_luma(ImageBuffer.from_array(arr))
    assert np.allclose(lum.data, 0.299 * 255, atol=1e-9)
    assert abs(lum.data[0, 0] - 76.245) < 1e-9


def test_luma_single_channel_identity():
    img = ImageBuffer.from_array(np.full((3, 3, 1), 42, dtype=np.uint8))
    assert np.allclose(to_luma(img).data, 42.0)


def test_luma_idempotent_on_one_channel():
    rng = np.random.default_rng(3)
    img = ImageBuffer.from_array(
        rng.integers(0, 256, size=(6, 6, 1), dtype=np.uint8)
    )
    once = to_luma(img)
    assert np.array_equal(once.data, img.data[:, :, 0].astype(np.float64))


# ---------------------------------------------------------------- resize


@pytest.mark.parametrize("kernel", ["nearest", "bilinear", "bicubic"])
def test_resize_identity(kernel):
    rng = np.random.default_rng(4)
    plane = LumaPlane.from_array(rng.uniform(0, 255, (12, 9)))
    out = resize(plane, 9, 12, kernel=kernel)
    assert np.abs(out.data - plane.data).max() < 1e-9


@pytest.mark.parametrize("kernel", ["nearest", "bilinear", "bicubic"])
def test_resize_uniform_stays_uniform(kernel):
    plane = LumaPlane.from_array(np.full((16, 16), 77.0))
    out = resize(plane, 5, 7, kernel=kernel)
    assert out.data.shape == (7, 5)
    assert np.abs(out.data - 77.0).max() < 1e-9


def test_nearest_tie_takes_upper_left_of_center():
    # 4x4 -> 1x1: source coord 1.5 ties between 1 and 2; rule picks 1.
    arr = np.arange(16, dtype=np.float64).reshape(4, 4)
    out = resample_array(arr, 1, 1, "nearest")
    assert out[0, 0] == arr[1, 1]


def test_bicubic_ramp_matches_oracle():
    arr = np.arange(64, dtype=np.float64).reshape(8, 8) * 4.0
    got = resample_array(arr, 2, 2, "bicubic")
    want = naive_resample_oracle(arr, 2, 2, "bicubic")
    assert np.abs(got - want).max() < 1e-9


@pytest.mark.parametrize("kernel", ["nearest", "bilinear", "bicubic"])
@pytest.mark.parametrize("shape", [(8, 8, 3, 5), (7, 11, 13, 6), (10, 6, 5, 12)])
def test_resample_matches_naive_oracle(kernel, shape):
    h, w, nw, nh = shape
    rng = np.random.default_rng(h * 100 + w)
    arr = rng.uniform(0, 255, (h, w))
    got = resample_array(arr, nw, nh, kernel)
    want = naive_resample_oracle(arr, nw, nh, kernel)
    assert np.abs(got - want).max() < 1e-9


def test_resize_image_buffer_rounds_to_uint8():
    rng = np.random.default_rng(5)
    img = ImageBuffer.from_array(
        rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
    )
    out = resize(img, 4, 4, kernel="bilinear")
    assert isinstance(out, ImageBuffer)
    assert out.data.dtype == np.uint8
    assert (out.width, out.height, out.channels) == (4, 4, 3)


def test_resize_rejects_bad_args():
    plane = LumaPlane.from_array(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        resize(plane, 0, 4)
    with pytest.raises(ValueError):
        resize(plane, 4, 4, kernel="lanczos")


# ---------------------------------------------------------------- blur


def test_gaussian_kernel_properties():
    for sigma in (0.2, 1.0, 2.5):
        k = gaussian_kernel_1d(sigma)
        assert len(k) == 2 * math.ceil(3 * sigma) + 1
        assert abs(k.sum() - 1.0) < 1e-12
        assert np.array_equal(k, k[::-1])
    with pytest.raises(ValueError):
        gaussian_kernel_1d(0.0)


def test_blur_uniform_unchanged():
    plane = LumaPlane.from_array(np.full((20, 20), 131.0))
    out = gaussian_blur(plane, 1.5)
    assert np.abs(out.data - 131.0).max() < 1e-9


def test_blur_impulse_center_weight():
    arr = np.zeros((15, 15))
    arr[7, 7] = 1.0
    k = gaussian_kernel_1d(1.0)
    mid = (len(k) - 1) // 2
    out = blur_array(arr, 1.0)
    assert abs(out[7, 7] - k[mid] ** 2) < 1e-12


def test_blur_preserves_sum_with_uniform_border():
    rng = np.random.default_rng(6)
    k = gaussian_kernel_1d(1.0)
    r = (len(k) - 1) // 2
    arr = np.full((32, 32), 90.0)
    arr[r:-r, r:-r] = rng.uniform(0, 255, (32 - 2 * r, 32 - 2 * r))
    out = blur_array(arr, 1.0)
    assert abs(out.sum() - arr.sum()) / arr.sum() < 1e-6


def test_blur_matches_direct_2d_oracle():
    rng = np.random.default_rng(7)
    arr = rng.uniform(0, 255, (21, 17))
    for sigma in (0.6, 1.0, 2.0):
        got = blur_array(arr, sigma)
        want = direct_blur_oracle(arr, sigma)
        assert np.abs(got - want).max() < 1e-9


def test_blur_commutes_with_shift():
    rng = np.random.default_rng(8)
    arr = rng.uniform(0, 200, (16, 16))
    a = blur_array(arr + 30.0, 1.2)
    b = blur_array(arr, 1.2) + 30.0
    assert np.abs(a - b).max() < 1e-6


def test_blur_rejects_nonpositive_sigma():
    plane = LumaPlane.from_array(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        gaussian_blur(plane, -1.0)


# ---------------------------------------------------------------- noise


def test_noise_law_of_large_numbers():
    rng = np.random.default_rng(9)
    arr = np.full((400, 400), 128.0)  # 160k samples, far from clip range
    out = noise_array(arr, 10.0, rng)
    sd = out.std()
    assert abs(sd - 10.0) / 10.0 < 0.05


def test_noise_zero_sigma_is_copy():
    rng = np.random.default_rng(10)
    arr = np.full((8, 8), 50.0)
    out = noise_array(arr, 0.0, rng)
    assert np.array_equal(out, arr)
    assert out is not arr


def test_noise_deterministic_per_seed():
    arr = np.full((16, 16), 128.0)
    a = noise_array(arr, 5.0, np.random.default_rng(11))
    b = noise_array(arr, 5.0, np.random.default_rng(11))
    c = noise_array(arr, 5.0, np.random.default_rng(12))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_clipped_to_range():
    out = noise_array(np.zeros((64, 64)), 30.0, np.random.default_rng(13))
    assert out.min() >= 0.0
    hi = noise_array(np.full((64, 64), 255.0), 30.0, np.random.default_rng(13))
    assert hi.max() <= 255.0


def test_noise_rejects_negative_sigma():
    plane = LumaPlane.from_array(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        add_gaussian_noise(plane, -2.0, np.random.default_rng(0))
