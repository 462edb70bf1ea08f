"""Iterative median-based speckle detection and removal.

A pixel is flagged speckle-corrupted when it deviates from its window median
by at least the detection threshold. Each pass replaces only the corrupted
pixels with their window medians (computed from the pre-pass image, so the
update is order-independent), then re-tests just those pixels. Pixels flagged
good at any pass are never touched again, which makes the corrupted count
non-increasing by construction. The loop stops when the corrupted set is
empty or the pass cap is reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ntscan.image import GrayImage


@dataclass(frozen=True)
class DespeckleParams:
    window: int = 3
    threshold: float = 20.0
    max_iters: int = 10

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if not 0 < self.threshold <= 255:
            raise ValueError(f"threshold must be in (0, 255], got {self.threshold}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class FlagMap:
    """Per-pixel flags: 1 = good, 0 = speckle-corrupted."""

    flags: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.flags, dtype=np.uint8)
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("flags must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "flags", arr)

    @property
    def corrupted_count(self) -> int:
        return int(self.flags.size - self.flags.sum())


@dataclass(frozen=True)
class DespeckleReport:
    iterations_run: int
    flags_per_iteration: tuple[int, ...]
    terminated_by: str  # "all-clean" | "max-iters"

    def __post_init__(self):
        counts = tuple(int(c) for c in self.flags_per_iteration)
        if any(a < b for a, b in zip(counts, counts[1:])):
            raise ValueError("corrupted-pixel counts must be non-increasing")
        if self.terminated_by not in ("all-clean", "max-iters"):
            raise ValueError(f"unknown termination reason {self.terminated_by!r}")
        object.__setattr__(self, "flags_per_iteration", counts)


def window_median(img: GrayImage, center: tuple[int, int], window: int = 3) -> int:
    """Median of the window x window neighborhood, borders edge-replicated.

    The neighborhood count is always window**2 (odd), so the median is an
    exact pixel value.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd, got {window}")
    r, c = center
    if not (0 <= r < img.height and 0 <= c < img.width):
        raise ValueError(f"center {center} outside {img.width}x{img.height} image")
    k = window // 2
    rows = np.clip(np.arange(r - k, r + k + 1), 0, img.height - 1)
    cols = np.clip(np.arange(c - k, c + k + 1), 0, img.width - 1)
    return int(np.median(img.data[np.ix_(rows, cols)]))


def _median_image(data: np.ndarray, window: int) -> np.ndarray:
    # mode="nearest" replicates the edge pixel, matching window_median.
    return ndimage.median_filter(data, size=window, mode="nearest")


def speckle_flags(img: GrayImage, params: DespeckleParams = DespeckleParams()) -> FlagMap:
    """Flag each pixel: 1 iff |window median - pixel| < threshold."""
    med = _median_image(img.data, params.window)
    gamma = np.abs(med.astype(np.int16) - img.data.astype(np.int16))
    return FlagMap((gamma < params.threshold).astype(np.uint8))


def despeckle(
    img: GrayImage, params: DespeckleParams = DespeckleParams()
) -> tuple[GrayImage, DespeckleReport]:
    """Replace corrupted pixels by window medians until all flags are good.

    Returns the enhanced image and a report of the corrupted count at every
    flag evaluation. max_iters caps the number of replacement passes.
    """
    data = img.data.copy()
    med = _median_image(data, params.window)
    gamma = np.abs(med.astype(np.int16) - data.astype(np.int16))
    bad = gamma >= params.threshold
    counts = [int(bad.sum())]
    passes = 0
    while counts[-1] > 0 and passes < params.max_iters:
        data[bad] = med[bad]
        passes += 1
        med = _median_image(data, params.window)
        gamma = np.abs(med.astype(np.int16) - data.astype(np.int16))
        bad &= gamma >= params.threshold  # good pixels stay good
        counts.append(int(bad.sum()))
    report = DespeckleReport(
        iterations_run=len(counts),
        flags_per_iteration=tuple(counts),
        terminated_by="all-clean" if counts[-1] == 0 else "max-iters",
    )
    return img.with_data(data), report
