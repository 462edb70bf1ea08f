"""Canny edge detection: smoothed gradients, 4-direction NMS, hysteresis.

The smoothing and gradient stages are written to be exactly equivariant under
quarter-turn rotations: the separable Gaussian pass pairs mirrored taps
before summing (reversal-safe), the two axis orders are averaged
(transpose-safe), and direction bins come from sign/ratio comparisons rather
than atan2. Non-maximum suppression breaks ties toward the gradient
direction, so a symmetric two-column step keeps exactly one column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ntscan.image import GrayImage

_TAN_22_5 = math.sqrt(2.0) - 1.0  # tan(22.5 deg)

# direction bin -> (drow, dcol) axis along which NMS compares
_BIN_AXIS = {0: (0, 1), 45: (1, 1), 90: (1, 0), 135: (1, -1)}
_EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class CannyParams:
    """Smoothing width and hysteresis thresholds.

    With relative=True (default) the thresholds are fractions of the image's
    maximum gradient magnitude; otherwise they are absolute magnitudes.
    """

    sigma: float = 1.0
    t_low: float = 0.1
    t_high: float = 0.3
    relative: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not 0 < self.t_low < self.t_high:
            raise ValueError(
                f"thresholds must satisfy 0 < t_low < t_high, got {self.t_low}, {self.t_high}"
            )


@dataclass(frozen=True)
class EdgeMap:
    edges: np.ndarray  # binary flags
    magnitude: np.ndarray
    direction: np.ndarray  # degrees in {0, 45, 90, 135}

    def __post_init__(self):
        if not np.isin(np.asarray(self.edges), (0, 1)).all():
            raise ValueError("edge flags must be 0 or 1")
        if not np.isin(np.unique(self.direction), (0, 45, 90, 135)).all():
            raise ValueError("directions must be quantized to 0/45/90/135")

    @property
    def count(self) -> int:
        return int(np.asarray(self.edges).sum())


def _gauss_taps(sigma: float) -> np.ndarray:
    radius = max(1, int(3.0 * sigma + 0.5))
    taps = np.exp(-0.5 * (np.arange(radius + 1) / sigma) ** 2)
    return taps / (taps[0] + 2.0 * taps[1:].sum())


def _smooth_axis(arr: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    """Gaussian pass along one axis, pairing the +j and -j taps before adding.

    Pairing makes the sum bitwise invariant under reversal of that axis.
    Borders replicate.
    """
    radius = len(taps) - 1
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    ext = np.pad(arr, pad, mode="edge")
    n = arr.shape[axis]
    sl = lambda off: np.take(ext, np.arange(off + radius, off + radius + n), axis=axis)
    out = taps[0] * sl(0)
    for j in range(1, radius + 1):
        out = out + taps[j] * (sl(-j) + sl(j))
    return out


def _smooth(arr: np.ndarray, sigma: float) -> np.ndarray:
    taps = _gauss_taps(sigma)
    rows_first = _smooth_axis(_smooth_axis(arr, taps, 0), taps, 1)
    cols_first = _smooth_axis(_smooth_axis(arr, taps, 1), taps, 0)
    return 0.5 * (rows_first + cols_first)


def _quantize_direction(gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Nearest of 0/45/90/135 degrees for each gradient, by exact ratio tests."""
    ay = np.abs(gy)
    ax = np.abs(gx)
    direction = np.zeros(gy.shape, dtype=np.int16)
    diag = (ay > _TAN_22_5 * ax) & (ax > _TAN_22_5 * ay)
    direction[~diag & (ay > ax)] = 90
    same_sign = gy * gx > 0
    direction[diag & same_sign] = 45
    direction[diag & ~same_sign] = 135
    return direction


def smooth_and_gradient(
    img: GrayImage, sigma: float = 1.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian-smoothed central-difference gradients.

    Returns (magnitude, direction, gy, gx); direction is quantized to
    0/45/90/135 degrees, where 0 means the gradient points along columns.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    smoothed = _smooth(img.data.astype(np.float64), sigma)
    gy, gx = np.gradient(smoothed)
    magnitude = np.sqrt(gx * gx + gy * gy)
    return magnitude, _quantize_direction(gy, gx), gy, gx


def _nms(magnitude: np.ndarray, direction: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Keep local maxima along the gradient axis.

    Ties break toward where the gradient points: the comparison is strict
    against the forward neighbor and non-strict against the backward one, so
    an exactly tied pair keeps a single pixel. Off-image neighbors count as 0.
    """
    h, w = magnitude.shape
    keep = np.zeros((h, w), dtype=bool)
    rows, cols = np.mgrid[0:h, 0:w]
    for bin_deg, (ur, uc) in _BIN_AXIS.items():
        sel = direction == bin_deg
        if not sel.any():
            continue
        # sign of (gradient . axis) decides which neighbor is "forward"
        s = np.where(gy[sel] * ur + gx[sel] * uc >= 0, 1, -1)
        r = rows[sel]
        c = cols[sel]

        def neighbor_mag(rr, cc):
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            vals = np.zeros(len(rr))
            vals[ok] = magnitude[rr[ok], cc[ok]]
            return vals

        fwd = neighbor_mag(r + s * ur, c + s * uc)
        bwd = neighbor_mag(r - s * ur, c - s * uc)
        m = magnitude[sel]
        keep[r, c] = (m > fwd) & (m >= bwd)
    return keep


def canny(img: GrayImage, params: CannyParams = CannyParams()) -> EdgeMap:
    """Full detector: gradients, NMS, then two-threshold hysteresis.

    Weak pixels (>= t_low) survive only in 8-connected components that
    contain at least one strong pixel (>= t_high).
    """
    magnitude, direction, gy, gx = smooth_and_gradient(img, params.sigma)
    peak = float(magnitude.max())
    if params.relative:
        t_low, t_high = params.t_low * peak, params.t_high * peak
    else:
        t_low, t_high = params.t_low, params.t_high
    edges = np.zeros(img.shape, dtype=np.uint8)
    if peak > 0.0 and t_high > 0.0:
        thin = _nms(magnitude, direction, gy, gx)
        weak = thin & (magnitude >= t_low)
        strong = thin & (magnitude >= t_high)
        comp, count = ndimage.label(weak, structure=_EIGHT_CONN)
        if count:
            seeded = np.zeros(count + 1, dtype=bool)
            seeded[np.unique(comp[strong])] = True
            seeded[0] = False
            edges = (seeded[comp] & weak).astype(np.uint8)
    return EdgeMap(edges=edges, magnitude=magnitude, direction=direction)
