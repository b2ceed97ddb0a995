"""Raw float32 field files with a small text sidecar header.

A field ``name`` is stored as ``name.raw`` (little-endian float32,
row-major) next to ``name.hdr``::

    width 416
    height 416
    unit HU

For sinograms ``height`` is the bin count and ``width`` the view count.
Masks may also be read from 8-bit PNG files (nonzero = metal).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grids import Image, ImageGrid, SinoKind, Sinogram, SinogramGrid, Unit


class FieldFileError(OSError):
    pass


def _paths(path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix in (".raw", ".hdr"):
        path = path.with_suffix("")
    return path.with_suffix(".raw"), path.with_suffix(".hdr")


def field_exists(path) -> bool:
    raw, hdr = _paths(path)
    return raw.exists() and hdr.exists()


def write_raw(path, values: np.ndarray, unit: str, extra: dict | None = None) -> Path:
    raw, hdr = _paths(path)
    raw.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values)
    np.ascontiguousarray(values, dtype="<f4").tofile(raw)
    lines = [f"width {values.shape[1]}", f"height {values.shape[0]}", f"unit {unit}"]
    lines += [f"{k} {v!r}" if isinstance(v, float) else f"{k} {v}" for k, v in (extra or {}).items()]
    hdr.write_text("\n".join(lines) + "\n")
    return raw


def read_header(path) -> dict:
    _, hdr = _paths(path)
    if not hdr.exists():
        raise FieldFileError(f"missing header file {hdr}")
    out = {}
    for line in hdr.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        out[key] = value.strip()
    for key in ("width", "height", "unit"):
        if key not in out:
            raise FieldFileError(f"header {hdr} lacks '{key}'")
    return out


def read_raw(path) -> tuple[np.ndarray, dict]:
    raw, _ = _paths(path)
    header = read_header(path)
    if not raw.exists():
        raise FieldFileError(f"missing data file {raw}")
    h, w = int(header["height"]), int(header["width"])
    data = np.fromfile(raw, dtype="<f4")
    if data.size != h * w:
        raise FieldFileError(f"{raw} holds {data.size} values, header says {h}x{w}")
    return data.reshape(h, w).astype(np.float64), header


def save_image(path, img: Image) -> Path:
    return write_raw(path, img.values, img.unit.value, {"pixel_size": img.grid.pixel_size})


def load_image(path, unit: Unit | None = None, pixel_size: float | None = None) -> Image:
    values, header = read_raw(path)
    unit = unit or Unit(header["unit"])
    ps = pixel_size if pixel_size is not None else float(header.get("pixel_size", 1.0))
    return Image(ImageGrid(values.shape[0], values.shape[1], ps), values, unit)


def save_sinogram(path, sino: Sinogram) -> Path:
    return write_raw(path, sino.values, sino.kind.value, {"bin_spacing": sino.grid.bin_spacing})


def load_sinogram(path) -> Sinogram:
    values, header = read_raw(path)
    grid = SinogramGrid(values.shape[0], values.shape[1], float(header.get("bin_spacing", 1.0)))
    return Sinogram(grid, values, SinoKind(header["unit"]))


def load_mask(path, pixel_size: float = 1.0) -> Image:
    """Read a binary metal mask from a raw field or an 8-bit PNG."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        if not path.exists():
            raise FieldFileError(f"missing mask file {path}")
        from PIL import Image as PILImage

        arr = np.asarray(PILImage.open(path).convert("L"))
        values = (arr != 0).astype(np.float64)
    else:
        values, _ = read_raw(path)
        values = (values != 0).astype(np.float64)
    return Image(ImageGrid(values.shape[0], values.shape[1], pixel_size), values, Unit.BINARY)


def save_png16(path, hu: np.ndarray, window=(-175.0, 275.0)) -> Path:
    """16-bit grayscale preview of an HU image clipped to ``window``."""
    from PIL import Image as PILImage

    lo, hi = window
    scaled = np.clip((np.asarray(hu) - lo) / (hi - lo), 0.0, 1.0)
    arr = np.round(scaled * 65535).astype(np.uint16)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(arr).save(path)
    return path
