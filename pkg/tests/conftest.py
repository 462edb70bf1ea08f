import numpy as np
import pytest

from ntscan.image import GrayImage, Roi
from ntscan.phantom import PhantomSpec, generate_phantom
from ntscan.pipeline import PipelineConfig


def pgm_bytes(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.data.tobytes()


@pytest.fixture(scope="session")
def cfg() -> PipelineConfig:
    return PipelineConfig()


@pytest.fixture(scope="session")
def band_phantom():
    """One slanted-band phantom plus a ROI that covers band and surround."""
    spec = PhantomSpec(
        width=64, height=64, band_thickness_mm=2.0, band_orientation_deg=30.0, seed=7
    )
    return generate_phantom(spec), Roi(8, 8, 48, 48)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260823)
