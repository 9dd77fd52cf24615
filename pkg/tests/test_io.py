import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from slef import InvariantError, ParseError, ScalarField, SizeError, load_field, save_field
from slef import io

f32 = st.floats(allow_nan=False, allow_infinity=False, width=32)


@given(arrays(np.float32, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=f32))
def test_pfm_round_trip_bit_exact_for_float32(a):
    f = ScalarField(a.astype(np.float64))
    back = io.decode_pfm(io.encode_pfm(f))
    assert back == f


def test_pfm_header_and_row_order():
    f = ScalarField([[1.0, 2.0], [3.0, 4.0]])
    buf = io.encode_pfm(f)
    assert buf.startswith(b"Pf\n2 2\n-1.0\n")
    raster = np.frombuffer(buf[len(b"Pf\n2 2\n-1.0\n"):], dtype="<f4")
    # bottom row first
    assert raster.tolist() == [3.0, 4.0, 1.0, 2.0]


def test_pfm_big_endian_and_rgb():
    header = b"PF\n1 1\n1.0\n"
    raster = struct.pack(">fff", 0.25, 9.0, 9.0)
    assert io.decode_pfm(header + raster).data[0, 0] == 0.25


@pytest.mark.parametrize("buf,offset", [
    (b"P6\n1 1\n-1\n", 0),
    (b"Pf\nx 1\n-1\n", 3),
    (b"Pf\n1 1\n0\n    ", 7),
    (b"Pf\n2 2\n-1.0\n\x00\x00", 14),
])
def test_pfm_parse_errors_carry_offsets(buf, offset):
    with pytest.raises(ParseError) as exc:
        io.decode_pfm(buf)
    assert exc.value.offset == offset
    assert f"byte offset {offset}" in str(exc.value)


def test_pfm_rejects_nan_raster():
    buf = b"Pf\n2 1\n-1.0\n" + struct.pack("<ff", 1.0, float("nan"))
    with pytest.raises(ParseError):
        io.decode_pfm(buf)


def test_pfm_oversize_header():
    with pytest.raises(SizeError):
        io.decode_pfm(b"Pf\n100000 100000\n-1.0\n")


def test_pfm_float32_overflow():
    with pytest.raises(InvariantError):
        io.encode_pfm(ScalarField([[1e300]]))


def test_png_quantization_round_trip(tmp_path):
    f = ScalarField(np.linspace(0, 1, 256).reshape(16, 16))
    p = tmp_path / "f.png"
    save_field(f, p)
    back = load_field(p)
    assert np.max(np.abs(back.data - f.data)) <= 0.5 / 255 + 1e-12


def test_png_clips_and_maps_range(tmp_path):
    f = ScalarField([[-5.0, 0.0, 5.0]])
    p = tmp_path / "f.png"
    save_field(f, p, value_range=(-1.0, 1.0))
    assert np.allclose(load_field(p).data, [[0.0, 128 / 255, 1.0]])


def test_png_garbage():
    with pytest.raises(ParseError):
        io.decode_png(b"not a png")


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(-1e300, 1e300, allow_nan=False)))
def test_csv_round_trip_exact(a):
    f = ScalarField(a)
    assert io.decode_csv(io.encode_csv(f)) == f


def test_csv_ragged_offset():
    with pytest.raises(ParseError) as exc:
        io.decode_csv(b"1,2\n3\n")
    assert exc.value.offset == 4


def test_csv_bad_cell():
    with pytest.raises(ParseError):
        io.decode_csv(b"1,abc\n")


def test_format_inference(tmp_path):
    with pytest.raises(ValueError):
        save_field(ScalarField([[0.0]]), tmp_path / "x.tiff")
    f = ScalarField([[0.5, 0.25]])
    for ext in ("pfm", "csv"):
        save_field(f, tmp_path / f"x.{ext}")
        assert load_field(tmp_path / f"x.{ext}") == f
    save_field(f, tmp_path / "raw", format="csv")
    assert load_field(tmp_path / "raw", format="csv") == f


def test_save_rejects_nan(tmp_path):
    with pytest.raises(InvariantError):
        save_field(np.array([[np.nan]]), tmp_path / "x.pfm")
