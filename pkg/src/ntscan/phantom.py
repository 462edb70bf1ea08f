"""Synthetic speckled translucency phantoms with exact ground truth.

A phantom layers three echo analogs: mid-gray soft tissue, a dark
fluid band of exactly known perpendicular thickness (straight or gently
arced), and a bright skin stripe on the band's far side. Multiplicative
L-look gamma speckle is applied on top. The band geometry is defined by a
signed distance field with a small lattice offset so an integer-thickness
horizontal band rasterizes to exactly that many pixel rows.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ntscan.image import GrayImage, save_image

# Keeps band borders off the integer lattice at the stock orientations so
# open-interval row counts are exact and rasterization is unambiguous.
_LATTICE_OFFSET = 0.13

# Skin stripe thicker than half the despeckle window so majority-vote
# median filtering cannot erase it.
_SKIN_PX = 8
_MARGIN_PX = 2


@dataclass(frozen=True)
class PhantomSpec:
    width: int = 96
    height: int = 96
    mm_per_px: float = 0.1
    band_thickness_mm: float = 2.0
    band_orientation_deg: float = 0.0
    band_curvature_px: float | None = None  # arc radius; None = straight
    tissue_intensity: int = 160
    fluid_intensity: int = 10
    skin_intensity: int = 220
    speckle_looks: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("phantom must be at least 32x32")
        if not self.mm_per_px > 0:
            raise ValueError(f"mm_per_px must be > 0, got {self.mm_per_px}")
        if self.thickness_px < 4:
            raise ValueError(
                f"band of {self.thickness_px:.1f} px is below the 4 px measurable "
                "minimum"
            )
        if not self.fluid_intensity < min(self.tissue_intensity, self.skin_intensity):
            raise ValueError("fluid must be darker than tissue and skin")
        for name in ("tissue_intensity", "fluid_intensity", "skin_intensity"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"{name} must be in [0,255], got {v}")
        if self.speckle_looks < 1:
            raise ValueError(f"speckle_looks must be >= 1, got {self.speckle_looks}")
        half_extent = min(self.width, self.height) / 2
        if self.thickness_px / 2 + _SKIN_PX + _MARGIN_PX > half_extent:
            raise ValueError("band plus skin stripe exceeds image bounds")
        if self.band_curvature_px is not None and self.band_curvature_px < max(
            self.width, self.height
        ):
            raise ValueError(
                "arc radius below the image size bends the band out of frame"
            )

    @property
    def thickness_px(self) -> float:
        return self.band_thickness_mm / self.mm_per_px


@dataclass(frozen=True)
class Phantom:
    spec: PhantomSpec
    image: GrayImage
    clean: GrayImage
    truth_mask: np.ndarray  # uint8 0/1
    truth_thickness_mm: float
    saturation_frac: float  # pixels clipped at 255 by speckle


def _speckle_field(shape, looks: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean multiplicative gamma field: shape L, scale 1/L."""
    return rng.gamma(shape=looks, scale=1.0 / looks, size=shape)


def apply_speckle(img: GrayImage, looks: float, seed: int) -> GrayImage:
    """Per-pixel multiplicative L-look gamma noise, rounded and clamped."""
    if looks < 1:
        raise ValueError(f"looks must be >= 1, got {looks}")
    rng = np.random.default_rng(seed)
    noisy = img.data.astype(np.float64) * _speckle_field(img.shape, looks, rng)
    out = np.clip(np.floor(noisy + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(data=out, mm_per_px=img.mm_per_px)


def _signed_distance(spec: PhantomSpec) -> np.ndarray:
    """Perpendicular distance from each pixel center to the band center line."""
    rr, cc = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    cr = (spec.height - 1) / 2.0
    ccol = (spec.width - 1) / 2.0
    theta = np.deg2rad(spec.band_orientation_deg)
    nr, nc = np.cos(theta), np.sin(theta)
    if spec.band_curvature_px is None:
        s = (rr - cr) * nr + (cc - ccol) * nc
    else:
        radius = spec.band_curvature_px
        center_r = cr - radius * nr
        center_c = ccol - radius * nc
        s = np.hypot(rr - center_r, cc - center_c) - radius
    return s - _LATTICE_OFFSET


def generate_phantom(spec: PhantomSpec) -> Phantom:
    """Render tissue, exact-thickness dark band, skin stripe; add speckle."""
    s = _signed_distance(spec)
    half = spec.thickness_px / 2.0
    band = np.abs(s) < half
    skin = (s >= half) & (s < half + _SKIN_PX)
    clean = np.full((spec.height, spec.width), spec.tissue_intensity, dtype=np.uint8)
    clean[band] = spec.fluid_intensity
    clean[skin] = spec.skin_intensity

    rng = np.random.default_rng(spec.seed)
    g = _speckle_field(clean.shape, spec.speckle_looks, rng)
    raw = clean.astype(np.float64) * g
    saturated = float(np.mean(raw > 255.0))
    noisy = np.clip(np.floor(raw + 0.5), 0, 255).astype(np.uint8)

    return Phantom(
        spec=spec,
        image=GrayImage(data=noisy, mm_per_px=spec.mm_per_px),
        clean=GrayImage(data=clean, mm_per_px=spec.mm_per_px),
        truth_mask=band.astype(np.uint8),
        truth_thickness_mm=spec.band_thickness_mm,
        saturation_frac=saturated,
    )


def write_bundle(phantom: Phantom, out_dir: str | Path) -> Path:
    """Write image.pgm, clean.pgm, truth.pgm, truth.json into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image(phantom.image, out / "image.pgm")
    save_image(phantom.clean, out / "clean.pgm")
    save_image(
        GrayImage(data=phantom.truth_mask * np.uint8(255)), out / "truth.pgm"
    )
    payload = {
        "truth_thickness_mm": phantom.truth_thickness_mm,
        "truth_thickness_px": phantom.spec.thickness_px,
        "saturation_frac": phantom.saturation_frac,
        "spec": asdict(phantom.spec),
    }
    (out / "truth.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    return out


def spec_from_dict(d: dict) -> PhantomSpec:
    """Build a spec from JSON-ish keys, rejecting unknown fields."""
    known = {f for f in PhantomSpec.__dataclass_fields__}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown phantom spec fields: {sorted(unknown)}")
    return PhantomSpec(**d)
