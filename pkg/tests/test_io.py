import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rainsim.io import (
    SceneLoadError,
    linear_to_srgb,
    linear_to_srgb_u8,
    png_bytes_srgb,
    read_kv_config,
    read_pfm,
    read_png_linear,
    srgb_to_linear,
    write_pfm,
    write_png_srgb,
)


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------

def test_pfm_gray_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(5, 7)).astype(np.float32).astype(np.float64)
    p = tmp_path / "a.pfm"
    write_pfm(p, data)
    back = read_pfm(p)
    assert back.shape == (5, 7)
    assert np.array_equal(back, data)


def test_pfm_color_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.random((4, 6, 3)).astype(np.float32).astype(np.float64)
    p = tmp_path / "c.pfm"
    write_pfm(p, data)
    back = read_pfm(p)
    assert back.shape == (4, 6, 3)
    assert np.array_equal(back, data)


def test_pfm_row_order_bottom_up(tmp_path):
    # distinct rows: the file stores the bottom row first
    data = np.array([[1.0, 1.0], [2.0, 2.0]])
    p = tmp_path / "r.pfm"
    write_pfm(p, data)
    raw = p.read_bytes()
    first_float = np.frombuffer(raw.split(b"-1.0\n", 1)[1], dtype="<f4", count=1)[0]
    assert first_float == 2.0  # bottom row of the in-memory image
    assert np.array_equal(read_pfm(p), data)


def test_pfm_big_endian_read(tmp_path):
    data = np.array([[1.5, -2.25]], dtype=">f4")
    p = tmp_path / "be.pfm"
    p.write_bytes(b"Pf\n2 1\n1.0\n" + data.tobytes())
    back = read_pfm(p)
    assert np.array_equal(back, [[1.5, -2.25]])


def test_pfm_scale_multiplies(tmp_path):
    data = np.array([[2.0]], dtype="<f4")
    p = tmp_path / "s.pfm"
    p.write_bytes(b"Pf\n1 1\n-0.5\n" + data.tobytes())
    assert read_pfm(p)[0, 0] == pytest.approx(1.0)


def test_pfm_bad_magic_cites_offset(tmp_path):
    p = tmp_path / "bad.pfm"
    p.write_bytes(b"XX\n2 1\n-1.0\n" + b"\x00" * 8)
    with pytest.raises(SceneLoadError, match=r"byte 0.*magic"):
        read_pfm(p)


def test_pfm_bad_width_cites_offset(tmp_path):
    p = tmp_path / "bad.pfm"
    p.write_bytes(b"Pf\nxx 1\n-1.0\n" + b"\x00" * 8)
    with pytest.raises(SceneLoadError, match=r"byte 3.*width"):
        read_pfm(p)


def test_pfm_bad_scale_cites_offset(tmp_path):
    p = tmp_path / "bad.pfm"
    body = b"Pf\n2 1\n"
    p.write_bytes(body + b"nope\n" + b"\x00" * 8)
    with pytest.raises(SceneLoadError, match=rf"byte {len(body)}.*scale"):
        read_pfm(p)


def test_pfm_truncated_data_cites_offset(tmp_path):
    p = tmp_path / "bad.pfm"
    p.write_bytes(b"Pf\n2 2\n-1.0\n" + b"\x00" * 7)  # needs 16
    with pytest.raises(SceneLoadError, match=r"need 16 data bytes.*has 7"):
        read_pfm(p)


def test_pfm_truncated_header(tmp_path):
    p = tmp_path / "bad.pfm"
    p.write_bytes(b"Pf\n2")
    with pytest.raises(SceneLoadError, match="end of header"):
        read_pfm(p)


def test_pfm_write_rejects_bad_shapes(tmp_path):
    with pytest.raises(ValueError):
        write_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 4)))


# ---------------------------------------------------------------------------
# sRGB
# ---------------------------------------------------------------------------

def test_srgb_curve_anchor_values():
    # breakpoints and endpoints of the piecewise curve
    assert srgb_to_linear(0.0) == 0.0
    assert srgb_to_linear(1.0) == pytest.approx(1.0, abs=1e-12)
    assert srgb_to_linear(0.04045) == pytest.approx(0.04045 / 12.92, rel=1e-12)
    assert linear_to_srgb(0.0031308) == pytest.approx(12.92 * 0.0031308, rel=1e-3)
    # mid-gray: 0.5 srgb -> about 0.2140 linear
    assert srgb_to_linear(0.5) == pytest.approx(0.21404114, rel=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_srgb_round_trip_is_identity(x):
    # the standard curve's decode/encode breakpoints (0.04045 / 0.0031308)
    # do not meet exactly; the seam leaves a ~3e-8 kink
    assert linear_to_srgb(srgb_to_linear(x)) == pytest.approx(x, abs=1e-7)


def test_srgb_u8_quantization_round_trip():
    # every 8-bit code survives linearize -> encode exactly
    codes = np.arange(256, dtype=np.float64) / 255.0
    lin = srgb_to_linear(codes)
    back = linear_to_srgb_u8(np.stack([lin] * 3, axis=-1)[None])
    assert np.array_equal(back[0, :, 0], np.arange(256, dtype=np.uint8))


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    lin = srgb_to_linear(rng.integers(0, 256, size=(8, 9, 3)) / 255.0)
    p = tmp_path / "img.png"
    write_png_srgb(p, lin)
    back = read_png_linear(p)
    assert back.shape == (8, 9, 3)
    assert np.allclose(back, lin, atol=1e-12)


def test_png_bytes_matches_file(tmp_path):
    lin = np.full((4, 4, 3), 0.5)
    p = tmp_path / "img.png"
    write_png_srgb(p, lin)
    assert png_bytes_srgb(lin) == p.read_bytes()


def test_png_decode_error(tmp_path):
    p = tmp_path / "borken.png"
    p.write_bytes(b"not a png at all")
    with pytest.raises(SceneLoadError, match="cannot decode PNG"):
        read_png_linear(p)


def test_png_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_png_linear(tmp_path / "missing.png")


# ---------------------------------------------------------------------------
# key = value config
# ---------------------------------------------------------------------------

def test_kv_config_parses_comments_and_blanks(tmp_path):
    p = tmp_path / "meta.cfg"
    p.write_text("# leading comment\ndx_meters = 0.05\n\nsun_dir = 0 0 1  # inline\n")
    out = read_kv_config(p)
    assert out == {"dx_meters": "0.05", "sun_dir": "0 0 1"}


def test_kv_config_line_numbers_in_errors(tmp_path):
    p = tmp_path / "meta.cfg"
    p.write_text("dx_meters = 0.05\nthis line is junk\n")
    with pytest.raises(SceneLoadError, match=r":2:"):
        read_kv_config(p)


def test_kv_config_equals_in_value(tmp_path):
    p = tmp_path / "meta.cfg"
    p.write_text("expr = a=b\n")
    assert read_kv_config(p) == {"expr": "a=b"}
