"""Binary masking, blob morphometry, thickness in mm, and norm classification.

The translucent band is the lowest-mean-intensity cluster of the segmented
ROI. Its thickness is the maximum extent perpendicular to the blob's own
principal axis, scanned along unit-width axis bins; the winning perpendicular
chord doubles as the caliper pair. Classification fires on a global cutoff or
on the per-week mean + sigma rule from the norm table, whichever applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from ntscan.image import GrayImage
from ntscan.meanshift import LabelMap

_EIGHT_CONN = np.ones((3, 3), dtype=bool)

# Per-week normal thickness (mm): mean and the spread quoted with it.
# Weeks 11-14; cutoff applies across the 10-14 week screening window.
DEFAULT_NORMS: dict[int, tuple[float, float]] = {
    11: (1.35, 0.41),
    12: (1.45, 0.43),
    13: (1.11, 0.62),
    14: (1.87, 0.25),
}
DEFAULT_CUTOFF_MM = 2.5


class NoTranslucencyError(ValueError):
    """Segmentation produced no candidate translucent region."""


class AxisUndefinedError(ValueError):
    """Blob second moments are isotropic; no principal axis exists."""


class CalibrationError(ValueError):
    """mm-per-pixel calibration missing or invalid."""


@dataclass(frozen=True)
class Blob:
    """8-connected component with area, centroid, and central second moments.

    Moments use the square-pixel convention: point covariance plus I/12,
    the exact covariance of unit-square pixels. The isotropic term leaves
    eigenvectors (the axis) untouched and keeps elongation finite for
    collinear blobs, so one stray 2-px fragment cannot out-score the band.
    """

    pixels: np.ndarray  # (area, 2) row/col coordinates
    area: int
    centroid: tuple[float, float]
    moments: np.ndarray  # 2x2 central second-moment (covariance) matrix
    bbox: tuple[int, int, int, int]  # row0, col0, row1, col1 inclusive

    @property
    def elongation(self) -> float:
        """Ratio of principal second-moment eigenvalues (>= 1)."""
        lo, hi = np.linalg.eigvalsh(self.moments)
        return float(hi / lo)


@dataclass(frozen=True)
class NtMeasurement:
    thickness_mm: float
    thickness_px: float
    chord: tuple[tuple[float, float], tuple[float, float]]
    blob_area_px: int
    mm_per_px: float
    gestation_weeks: float | None = None


@dataclass(frozen=True)
class WeekStats:
    week: int
    n: int
    mean_mm: float
    std_mm: float
    var_mm: float
    degenerate: bool = False  # single measurement; spread reported as 0


@dataclass(frozen=True)
class CohortStats:
    rows: tuple[WeekStats, ...]

    def row(self, week: int) -> WeekStats | None:
        for r in self.rows:
            if r.week == week:
                return r
        return None


@dataclass(frozen=True)
class NormTable:
    weeks: dict[int, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_NORMS)
    )
    cutoff_mm: float | None = DEFAULT_CUTOFF_MM

    def __post_init__(self):
        if self.cutoff_mm is not None and not self.cutoff_mm > 0:
            raise ValueError(f"cutoff_mm must be > 0, got {self.cutoff_mm}")


@dataclass(frozen=True)
class Classification:
    status: str  # "normal" | "increased"
    rule_fired: str | None
    threshold_mm: float | None


def binarize(label_map: LabelMap, roi_img: GrayImage) -> np.ndarray:
    """Mask of the cluster with the lowest mean intensity (the anechoic band)."""
    if label_map.shape != roi_img.shape:
        raise ValueError("label map and ROI image shapes differ")
    if label_map.cluster_count < 2:
        raise NoTranslucencyError(
            "segmentation found a single cluster; no translucent region to isolate"
        )
    labels = label_map.labels.ravel()
    values = roi_img.data.ravel().astype(np.float64)
    sums = np.bincount(labels, weights=values, minlength=label_map.cluster_count)
    counts = np.bincount(labels, minlength=label_map.cluster_count)
    means = sums / counts
    darkest = int(np.argmin(means))
    return (label_map.labels == darkest).astype(np.uint8)


def _blob_from_pixels(pixels: np.ndarray) -> Blob:
    rows = pixels[:, 0].astype(np.float64)
    cols = pixels[:, 1].astype(np.float64)
    cr, cc = rows.mean(), cols.mean()
    dr, dc = rows - cr, cols - cc
    moments = np.array(
        [[np.mean(dr * dr), np.mean(dr * dc)], [np.mean(dr * dc), np.mean(dc * dc)]]
    ) + np.eye(2) / 12.0
    return Blob(
        pixels=pixels,
        area=len(pixels),
        centroid=(float(cr), float(cc)),
        moments=moments,
        bbox=(
            int(pixels[:, 0].min()),
            int(pixels[:, 1].min()),
            int(pixels[:, 0].max()),
            int(pixels[:, 1].max()),
        ),
    )


def connected_components(mask: np.ndarray) -> list[Blob]:
    """8-connected blobs, largest first; ties by earliest pixel in scan order."""
    mask = np.asarray(mask).astype(bool)
    comp, count = ndimage.label(mask, structure=_EIGHT_CONN)
    blobs = []
    first_seen = {}
    flat = comp.ravel()
    for pos in np.flatnonzero(flat):
        lab = flat[pos]
        if lab not in first_seen:
            first_seen[lab] = pos
    for lab in range(1, count + 1):
        pixels = np.argwhere(comp == lab)
        blobs.append((first_seen[lab], _blob_from_pixels(pixels)))
    blobs.sort(key=lambda item: (-item[1].area, item[0]))
    return [b for _, b in blobs]


def select_nt_blob(blobs: list[Blob]) -> Blob:
    """Blob maximizing area x elongation; the band is thin and long."""
    if not blobs:
        raise NoTranslucencyError("no blobs in mask")
    best = blobs[0]
    best_score = best.area * best.elongation
    for blob in blobs[1:]:
        score = blob.area * blob.elongation
        if score > best_score:
            best, best_score = blob, score
    return best


def blob_axis(blob: Blob) -> tuple[np.ndarray, tuple[float, float]]:
    """Principal (long) axis unit vector and centroid.

    Sign convention: positive row component, ties broken toward positive
    column. Isotropic blobs have no principal direction and are rejected.
    """
    if blob.area < 3:
        raise AxisUndefinedError(f"blob of {blob.area} px too small for an axis")
    evals, evecs = np.linalg.eigh(blob.moments)
    lo, hi = float(evals[0]), float(evals[1])
    if hi - lo <= 1e-9 * max(hi, 1e-12):
        raise AxisUndefinedError("second moments are isotropic; axis ill-defined")
    axis = evecs[:, 1]
    if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
        axis = -axis
    return axis, blob.centroid


def nt_thickness(
    blob: Blob, axis: np.ndarray, mm_per_px: float | None
) -> NtMeasurement:
    """Maximum width perpendicular to the axis, scanned in unit axis bins.

    The chord endpoints sit at the winning bin's center on the axis, offset to
    the extreme perpendicular coordinates, so the chord is exactly
    perpendicular to the axis and its ends lie on boundary pixels.
    """
    if mm_per_px is None:
        raise CalibrationError("mm-per-pixel calibration required for thickness")
    if not mm_per_px > 0:
        raise CalibrationError(f"mm_per_px must be > 0, got {mm_per_px}")
    axis = np.asarray(axis, dtype=np.float64)
    perp = np.array([-axis[1], axis[0]])
    center = np.asarray(blob.centroid)
    rel = blob.pixels.astype(np.float64) - center
    t = rel @ axis
    s = rel @ perp
    bins = np.floor(t - t.min()).astype(np.int64)
    best_width = -1.0
    best = None
    for b in np.unique(bins):
        sel = s[bins == b]
        width = float(sel.max() - sel.min())
        if width > best_width:
            t_mid = float(t[bins == b].mean())
            best_width = width
            best = (t_mid, float(sel.min()), float(sel.max()))
    t_mid, s_lo, s_hi = best
    thickness_px = best_width + 1.0  # pixel footprint: one-pixel band has width 1
    p0 = center + t_mid * axis + s_lo * perp
    p1 = center + t_mid * axis + s_hi * perp
    return NtMeasurement(
        thickness_mm=thickness_px * mm_per_px,
        thickness_px=thickness_px,
        chord=((float(p0[0]), float(p0[1])), (float(p1[0]), float(p1[1]))),
        blob_area_px=blob.area,
        mm_per_px=mm_per_px,
    )


def classify(m: NtMeasurement, norms: NormTable = NormTable()) -> Classification:
    """Increased if above the global cutoff or above the week's mean + sigma."""
    if m.gestation_weeks is None or not 10 <= m.gestation_weeks < 15:
        raise ValueError(
            f"gestation weeks must lie in [10, 15), got {m.gestation_weeks}"
        )
    week = int(np.floor(m.gestation_weeks))
    week_row = norms.weeks.get(week)
    if norms.cutoff_mm is None and week_row is None:
        raise ValueError(f"no norm available for week {week} and no global cutoff")
    if norms.cutoff_mm is not None and m.thickness_mm > norms.cutoff_mm:
        return Classification("increased", "global_cutoff", norms.cutoff_mm)
    if week_row is not None:
        limit = week_row[0] + week_row[1]
        if m.thickness_mm > limit:
            return Classification("increased", "week_mean_plus_sigma", limit)
        return Classification("normal", None, limit)
    return Classification("normal", None, norms.cutoff_mm)


def aggregate_cohort(measurements: list[NtMeasurement]) -> CohortStats:
    """Bucket by integer week: n, mean, sample (n-1) std dev, variance."""
    buckets: dict[int, list[float]] = {}
    for m in measurements:
        if m.gestation_weeks is None:
            raise ValueError("every measurement needs gestation weeks")
        buckets.setdefault(int(np.floor(m.gestation_weeks)), []).append(m.thickness_mm)
    rows = []
    for week in sorted(buckets):
        vals = np.asarray(buckets[week], dtype=np.float64)
        n = len(vals)
        mean = float(vals.mean())
        if n > 1:
            std = float(vals.std(ddof=1))
            rows.append(WeekStats(week, n, mean, std, std * std))
        else:
            rows.append(WeekStats(week, n, mean, 0.0, 0.0, degenerate=True))
    return CohortStats(rows=tuple(rows))


def with_weeks(m: NtMeasurement, weeks: float) -> NtMeasurement:
    return replace(m, gestation_weeks=weeks)
