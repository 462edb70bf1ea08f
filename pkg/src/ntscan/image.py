"""Grayscale image type, PGM/PNG codecs, ROI cropping, feature-space conversion.

Images are 8-bit row-major rasters with an optional isotropic mm-per-pixel
calibration. All values are immutable after construction; the pixel buffer is
marked read-only so instances can be shared freely between workers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PilImage

# BT.601 luminance weights for RGB input, rounded half-up to the nearest level.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)

MIN_ROI_SIDE = 16


class ImageFormatError(ValueError):
    """Raised when a file is not an 8-bit grayscale PGM or 8-bit gray/RGB PNG."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GrayImage:
    """8-bit intensity raster with optional isotropic calibration."""

    data: np.ndarray
    mm_per_px: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"image data must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("image must contain at least one pixel")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("intensities must lie in [0, 255]")
            if not np.array_equal(arr, arr.astype(np.uint8)):
                raise ValueError("intensities must be integers in [0, 255]")
            arr = arr.astype(np.uint8)
        if self.mm_per_px is not None and not self.mm_per_px > 0:
            raise ValueError(f"mm_per_px must be > 0, got {self.mm_per_px}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "GrayImage":
        """New image with the same calibration but different pixels."""
        return GrayImage(data, mm_per_px=self.mm_per_px)


@dataclass(frozen=True)
class Roi:
    """Axis-aligned rectangle in pixel coordinates, at least 16 px per side."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"ROI origin must be non-negative, got ({self.x0}, {self.y0})")
        if self.w < MIN_ROI_SIDE or self.h < MIN_ROI_SIDE:
            raise ValueError(
                f"ROI must be at least {MIN_ROI_SIDE}x{MIN_ROI_SIDE} px, got {self.w}x{self.h}"
            )

    def validate_inside(self, img: GrayImage) -> None:
        if self.x0 + self.w > img.width or self.y0 + self.h > img.height:
            raise ValueError(
                f"ROI ({self.x0},{self.y0},{self.w},{self.h}) exceeds "
                f"{img.width}x{img.height} image"
            )


@dataclass(frozen=True)
class FeaturePointSet:
    """Per-pixel joint spatial-range points (row/h_s, col/h_s, intensity/h_r).

    With this scaling the mode-seeking hypersphere radius is 1 in all three
    coordinates, so a single bandwidth covers the mixed feature space.
    """

    points: np.ndarray
    origin_shape: tuple[int, int]
    h_s: float
    h_r: float
    origin: Roi | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be n x 3, got shape {pts.shape}")
        if pts.shape[0] != self.origin_shape[0] * self.origin_shape[1]:
            raise ValueError("point count must equal origin pixel count")
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]


def load_image(path: str | Path) -> GrayImage:
    """Read an 8-bit grayscale PGM (P5) or 8-bit gray/RGB PNG.

    RGB is converted by BT.601 luminance, rounded half-up. Calibration is
    never read from the file; supply mm_per_px separately.
    """
    path = Path(path)
    return decode_image(path.read_bytes(), name=str(path))


def decode_image(raw: bytes, name: str = "<bytes>") -> GrayImage:
    """Dispatch on magic bytes; `name` labels errors for uploads and files."""
    if raw[:2] == b"P5":
        return GrayImage(_parse_pgm(raw, name))
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return GrayImage(_parse_png(raw, name))
    raise ImageFormatError(f"{name}: unrecognized format (expected PGM P5 or PNG)")


def _parse_pgm(raw: bytes, name: str) -> np.ndarray:
    # Header: magic, width, height, maxval, each separated by whitespace,
    # with '#' comments allowed between tokens.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{name}: truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"{name}: malformed PGM header") from exc
    if maxval > 255:
        raise ImageFormatError(f"{name}: PGM maxval {maxval} exceeds 8-bit range")
    if maxval <= 0 or width <= 0 or height <= 0:
        raise ImageFormatError(f"{name}: invalid PGM dimensions or maxval")
    payload = raw[pos : pos + width * height]
    if len(payload) != width * height:
        raise ImageFormatError(f"{name}: PGM payload shorter than {width}x{height}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def _parse_png(raw: bytes, name: str) -> np.ndarray:
    try:
        pil = PilImage.open(io.BytesIO(raw))
        pil.load()
    except Exception as exc:
        raise ImageFormatError(f"{name}: unreadable PNG ({exc})") from exc
    if pil.mode == "L":
        return np.asarray(pil, dtype=np.uint8)
    if pil.mode == "RGB":
        rgb = np.asarray(pil, dtype=np.float64)
        luma = (
            _LUMA_WEIGHTS[0] * rgb[..., 0]
            + _LUMA_WEIGHTS[1] * rgb[..., 1]
            + _LUMA_WEIGHTS[2] * rgb[..., 2]
        )
        return np.floor(luma + 0.5).astype(np.uint8)
    raise ImageFormatError(
        f"{name}: unsupported PNG mode {pil.mode!r} (8-bit grayscale or RGB required)"
    )


def save_image(img: GrayImage, path: str | Path) -> None:
    """Write PGM (bit-exact round trip) or 8-bit grayscale PNG, by extension."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        buf = io.BytesIO()
        PilImage.fromarray(img.data, mode="L").save(buf, format="PNG")
        path.write_bytes(buf.getvalue())
        return
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    path.write_bytes(header + img.data.tobytes())


def save_rgb(rgb: np.ndarray, path: str | Path) -> None:
    """Write an (h, w, 3) uint8 raster as RGB8 PNG."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) RGB raster, got shape {rgb.shape}")
    buf = io.BytesIO()
    PilImage.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    Path(path).write_bytes(buf.getvalue())


def encode_rgb_png(rgb: np.ndarray) -> bytes:
    """PNG-encode an (h, w, 3) uint8 raster; deterministic for fixed pixels."""
    buf = io.BytesIO()
    PilImage.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def crop(img: GrayImage, roi: Roi) -> GrayImage:
    """Extract the ROI window; calibration propagates."""
    roi.validate_inside(img)
    window = img.data[roi.y0 : roi.y0 + roi.h, roi.x0 : roi.x0 + roi.w]
    return GrayImage(window.copy(), mm_per_px=img.mm_per_px)


def to_feature_points(
    img: GrayImage, h_s: float, h_r: float, origin: Roi | None = None
) -> FeaturePointSet:
    """One point per pixel: (row/h_s, col/h_s, intensity/h_r)."""
    if not h_s > 0:
        raise ValueError(f"spatial bandwidth must be > 0, got {h_s}")
    if not h_r > 0:
        raise ValueError(f"range bandwidth must be > 0, got {h_r}")
    h, w = img.shape
    rows, cols = np.mgrid[0:h, 0:w]
    pts = np.stack(
        [
            rows.ravel() / h_s,
            cols.ravel() / h_s,
            img.data.ravel().astype(np.float64) / h_r,
        ],
        axis=1,
    )
    return FeaturePointSet(pts, origin_shape=(h, w), h_s=h_s, h_r=h_r, origin=origin)


def overlay_mask(
    img: GrayImage, mask: np.ndarray, color: tuple[int, int, int] = (255, 0, 0)
) -> np.ndarray:
    """Replicate gray into RGB and paint mask-1 pixels with `color`."""
    mask = np.asarray(mask)
    if mask.shape != img.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {img.shape}")
    rgb = np.repeat(img.data[:, :, None], 3, axis=2).astype(np.uint8)
    on = mask.astype(bool)
    rgb[on] = np.asarray(color, dtype=np.uint8)
    return rgb


def psnr(a: GrayImage | np.ndarray, b: GrayImage | np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between two 8-bit rasters."""
    pa = a.data if isinstance(a, GrayImage) else np.asarray(a)
    pb = b.data if isinstance(b, GrayImage) else np.asarray(b)
    if pa.shape != pb.shape:
        raise ValueError("psnr operands must share a shape")
    mse = np.mean((pa.astype(np.float64) - pb.astype(np.float64)) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(255.0**2 / mse))
