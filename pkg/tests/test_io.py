import numpy as np
import pytest
from PIL import Image as PILImage

from dudomar import io
from dudomar.grids import Image, ImageGrid, SinoKind, Sinogram, SinogramGrid, Unit


def test_image_round_trip(tmp_path):
    img = Image(ImageGrid(3, 5, 0.7), np.arange(15.0).reshape(3, 5) - 4.5, Unit.HU)
    io.save_image(tmp_path / "a", img)
    assert (tmp_path / "a.hdr").read_text().splitlines()[:3] == ["width 5", "height 3", "unit HU"]
    back = io.load_image(tmp_path / "a.raw")
    assert back.grid == img.grid and back.unit is Unit.HU
    assert np.array_equal(back.values, img.values)
    assert (tmp_path / "a.raw").stat().st_size == 15 * 4


def test_raw_is_little_endian_row_major(tmp_path):
    io.write_raw(tmp_path / "f", np.array([[1.0, 2.0], [3.0, 4.0]]), "HU")
    assert np.array_equal(np.fromfile(tmp_path / "f.raw", dtype="<f4"), [1, 2, 3, 4])


def test_sinogram_round_trip(tmp_path):
    s = Sinogram(SinogramGrid(4, 3, 0.25), (np.arange(12) % 3 == 0).reshape(4, 3), SinoKind.TRACE)
    io.save_sinogram(tmp_path / "s", s)
    back = io.load_sinogram(tmp_path / "s")
    assert back.kind is SinoKind.TRACE and back.grid == s.grid
    assert np.allclose(back.values, s.values, atol=1e-7)


def test_errors(tmp_path):
    with pytest.raises(io.FieldFileError):
        io.read_raw(tmp_path / "missing")
    io.write_raw(tmp_path / "f", np.zeros((2, 2)), "HU")
    (tmp_path / "f.raw").write_bytes(b"\0" * 12)
    with pytest.raises(io.FieldFileError, match="header says"):
        io.read_raw(tmp_path / "f")
    (tmp_path / "g.hdr").write_text("width 2\n")
    with pytest.raises(io.FieldFileError, match="height"):
        io.read_header(tmp_path / "g")
    assert not io.field_exists(tmp_path / "g")


def test_masks_from_png_and_raw(tmp_path):
    arr = np.zeros((4, 6), np.uint8)
    arr[1, 2] = 255
    arr[3, 5] = 1
    PILImage.fromarray(arr).save(tmp_path / "m.png")
    m = io.load_mask(tmp_path / "m.png", 0.5)
    assert m.unit is Unit.BINARY and m.grid.pixel_size == 0.5
    assert np.array_equal(m.values, (arr != 0).astype(float))
    io.write_raw(tmp_path / "r", arr * 0.5, "Binary")
    assert np.array_equal(io.load_mask(tmp_path / "r.raw").values, m.values)
    with pytest.raises(io.FieldFileError):
        io.load_mask(tmp_path / "none.png")


def test_png_preview_window(tmp_path):
    path = io.save_png16(tmp_path / "p" / "x.png", np.array([[-1000.0, -175.0, 50.0, 275.0, 3000.0]]))
    arr = np.asarray(PILImage.open(path))
    assert arr.dtype == np.uint16
    assert arr.tolist() == [[0, 0, 32768, 65535, 65535]]
