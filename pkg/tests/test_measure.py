import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
import hypothesis.extra.numpy as nph

from ntscan.image import GrayImage
from ntscan.meanshift import LabelMap
from ntscan.measure import (
    AxisUndefinedError,
    CalibrationError,
    NoTranslucencyError,
    NormTable,
    NtMeasurement,
    aggregate_cohort,
    binarize,
    blob_axis,
    classify,
    connected_components,
    nt_thickness,
    select_nt_blob,
    with_weeks,
)

random_masks = nph.arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)),
                          elements=st.integers(0, 1))


def _label_map(labels, count):
    return LabelMap(np.asarray(labels), count, np.zeros((count, 3)))


def _measurement(mm, weeks=None):
    return NtMeasurement(
        thickness_mm=mm, thickness_px=mm / 0.1, chord=((0.0, 0.0), (0.0, 1.0)),
        blob_area_px=100, mm_per_px=0.1, gestation_weeks=weeks,
    )


def test_binarize_picks_lowest_mean_cluster():
    labels = np.repeat([0, 1], 8).reshape(4, 4)
    img = GrayImage(np.repeat([200, 30], 8).reshape(4, 4).astype(np.uint8))
    mask = binarize(_label_map(labels, 2), img)
    assert np.array_equal(mask, (labels == 1).astype(np.uint8))


def test_binarize_three_clusters():
    labels = np.tile([0, 1, 2], (3, 1))
    img = GrayImage(np.tile([100, 10, 200], (3, 1)).astype(np.uint8))
    mask = binarize(_label_map(labels, 3), img)
    assert np.array_equal(mask, (labels == 1).astype(np.uint8))


def test_binarize_single_cluster_is_error():
    with pytest.raises(NoTranslucencyError):
        binarize(_label_map(np.zeros((3, 3), int), 1), GrayImage(np.zeros((3, 3), np.uint8)))
    with pytest.raises(ValueError):
        binarize(_label_map(np.zeros((3, 3), int), 1), GrayImage(np.zeros((2, 2), np.uint8)))


def test_components_full_square():
    blobs = connected_components(np.ones((4, 4), np.uint8))
    assert len(blobs) == 1
    assert blobs[0].area == 16
    assert blobs[0].centroid == (1.5, 1.5)
    assert blobs[0].bbox == (0, 0, 3, 3)


def test_components_diagonal_touch_is_one_blob():
    mask = np.zeros((4, 4), np.uint8)
    mask[0, 0] = mask[1, 1] = 1
    assert len(connected_components(mask)) == 1


def test_components_ordering():
    mask = np.zeros((8, 8), np.uint8)
    mask[0, 6:8] = 1          # small, early in scan order
    mask[4:7, 0:3] = 1        # large
    mask[0, 0:2] = 1          # small, earliest
    blobs = connected_components(mask)
    assert [b.area for b in blobs] == [9, 2, 2]
    assert blobs[1].bbox[1] == 0  # earliest-seen tie first
    assert blobs[2].bbox[1] == 6


def _flood_oracle(mask):
    mask = mask.astype(bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            stack, pix = [(r, c)], []
            seen[r, c] = True
            while stack:
                rr, cc = stack.pop()
                pix.append((rr, cc))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        nr, nc = rr + dr, cc + dc
                        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            stack.append((nr, nc))
            comps.append(sorted(pix))
    comps.sort(key=lambda p: (-len(p), p[0]))
    return comps


@settings(deadline=None, max_examples=60)
@given(random_masks)
def test_components_match_flood_fill_oracle(mask):
    got = [sorted(map(tuple, b.pixels.tolist())) for b in connected_components(mask)]
    assert got == _flood_oracle(mask)


def test_moments_square_pixel_convention():
    single = connected_components(np.array([[1]], np.uint8))[0]
    np.testing.assert_allclose(single.moments, np.eye(2) / 12.0, atol=0)
    domino = connected_components(np.array([[1, 1]], np.uint8))[0]
    np.testing.assert_allclose(
        domino.moments, np.array([[1 / 12.0, 0.0], [0.0, 0.25 + 1 / 12.0]]), atol=1e-15
    )


def test_select_prefers_elongated_band():
    mask = np.zeros((60, 60), np.uint8)
    mask[2:6, 5:45] = 1     # 4x40 band, area 160
    mask[20:32, 20:32] = 1  # 12x12 square, area 144
    blobs = connected_components(mask)
    chosen = select_nt_blob(blobs)
    assert chosen.bbox == (2, 5, 5, 44)
    with pytest.raises(NoTranslucencyError):
        select_nt_blob([])


def test_select_tie_keeps_first():
    mask = np.zeros((10, 10), np.uint8)
    mask[1, 1:4] = 1
    mask[5, 1:4] = 1
    blobs = connected_components(mask)
    assert select_nt_blob(blobs) is blobs[0]
    assert blobs[0].bbox[0] == 1


def test_blob_axis_lines():
    horiz = connected_components(np.ones((1, 50), np.uint8))[0]
    axis, centroid = blob_axis(horiz)
    np.testing.assert_allclose(axis, [0.0, 1.0], atol=0)
    assert centroid == (0.0, 24.5)

    vert = connected_components(np.ones((50, 1), np.uint8))[0]
    np.testing.assert_allclose(blob_axis(vert)[0], [1.0, 0.0], atol=0)

    diag = np.zeros((30, 30), np.uint8)
    diag[np.arange(30), np.arange(30)] = 1
    axis, _ = blob_axis(connected_components(diag)[0])
    np.testing.assert_allclose(axis, [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-12)


def test_blob_axis_errors():
    square = connected_components(np.ones((6, 6), np.uint8))[0]
    with pytest.raises(AxisUndefinedError):
        blob_axis(square)
    tiny = connected_components(np.array([[1, 1]], np.uint8))[0]
    with pytest.raises(AxisUndefinedError):
        blob_axis(tiny)


def test_blob_axis_sign_convention():
    down_right = np.zeros((20, 20), np.uint8)
    down_right[np.arange(15), np.arange(15)] = 1
    axis, _ = blob_axis(connected_components(down_right)[0])
    assert axis[0] > 0
    down_left = np.zeros((20, 20), np.uint8)
    down_left[np.arange(15), 14 - np.arange(15)] = 1
    axis, _ = blob_axis(connected_components(down_left)[0])
    assert axis[0] > 0 and axis[1] < 0


def test_thickness_axis_aligned_rect():
    rect = np.zeros((40, 70), np.uint8)
    rect[10:30, 10:60] = 1  # 20 px thick, 50 px long
    blob = connected_components(rect)[0]
    axis, _ = blob_axis(blob)
    m = nt_thickness(blob, axis, 0.1)
    assert m.thickness_px == pytest.approx(20.0)
    assert m.thickness_mm == pytest.approx(2.0)
    assert m.blob_area_px == 1000
    (r0, c0), (r1, c1) = m.chord
    chord_vec = np.array([r1 - r0, c1 - c0])
    assert abs(chord_vec @ axis) < 1e-9  # chord perpendicular to the axis
    assert np.linalg.norm(chord_vec) == pytest.approx(19.0)


def test_thickness_rotated_rect_within_quantization():
    theta = np.radians(30.0)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    rr, cc = np.mgrid[0:90, 0:90]
    rel = np.stack([rr - 45.0, cc - 45.0], axis=-1) @ rot
    mask = ((np.abs(rel[..., 0]) <= 9.5) & (np.abs(rel[..., 1]) <= 24.5)).astype(np.uint8)
    blob = connected_components(mask)[0]
    axis, _ = blob_axis(blob)
    m = nt_thickness(blob, axis, 0.1)
    assert m.thickness_mm == pytest.approx(2.0, abs=0.1)


def test_thickness_requires_calibration():
    rect = np.zeros((20, 40), np.uint8)
    rect[5:10, 5:35] = 1
    blob = connected_components(rect)[0]
    axis, _ = blob_axis(blob)
    with pytest.raises(CalibrationError):
        nt_thickness(blob, axis, None)
    with pytest.raises(CalibrationError):
        nt_thickness(blob, axis, -0.1)


def test_classification_decision_points():
    c = classify(_measurement(2.6, weeks=12))
    assert (c.status, c.rule_fired, c.threshold_mm) == ("increased", "global_cutoff", 2.5)
    c = classify(_measurement(1.87, weeks=14))
    assert (c.status, c.rule_fired) == ("normal", None)
    assert c.threshold_mm == pytest.approx(2.12)
    c = classify(_measurement(2.13, weeks=14))
    assert (c.status, c.rule_fired) == ("increased", "week_mean_plus_sigma")
    assert c.threshold_mm == pytest.approx(2.12)


def test_classification_boundaries_and_errors():
    # exactly at the cutoff is not above it; the week rule then applies
    c = classify(_measurement(2.5, weeks=12))
    assert (c.status, c.rule_fired) == ("increased", "week_mean_plus_sigma")
    # week 10 has no table row: only the global cutoff applies
    assert classify(_measurement(2.4, weeks=10.5)).status == "normal"
    assert classify(_measurement(2.6, weeks=10.5)).status == "increased"
    with pytest.raises(ValueError):
        classify(_measurement(1.0, weeks=None))
    with pytest.raises(ValueError):
        classify(_measurement(1.0, weeks=15.0))
    with pytest.raises(ValueError):
        classify(_measurement(1.0, weeks=10.5), NormTable(weeks={}, cutoff_mm=None))


def test_norm_table_validation():
    with pytest.raises(ValueError):
        NormTable(cutoff_mm=0.0)


def test_cohort_degenerate_single():
    stats = aggregate_cohort([_measurement(1.5, weeks=12)])
    row = stats.row(12)
    assert (row.n, row.mean_mm, row.std_mm, row.var_mm) == (1, 1.5, 0.0, 0.0)
    assert row.degenerate


def test_cohort_textbook_triple():
    stats = aggregate_cohort([_measurement(v, weeks=13.2) for v in (1.0, 2.0, 3.0)])
    row = stats.row(13)
    assert row.n == 3
    assert row.mean_mm == pytest.approx(2.0)
    assert row.std_mm == pytest.approx(1.0)
    assert row.var_mm == pytest.approx(1.0)
    assert not row.degenerate


def test_cohort_requires_weeks():
    with pytest.raises(ValueError):
        aggregate_cohort([_measurement(1.0)])


@settings(deadline=None, max_examples=50)
@given(st.lists(st.floats(0.2, 6.0, allow_nan=False), min_size=2, max_size=20))
def test_cohort_matches_two_pass_oracle(values):
    stats = aggregate_cohort([_measurement(v, weeks=11.0) for v in values])
    row = stats.row(11)
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    assert row.mean_mm == pytest.approx(mean, abs=1e-12)
    assert row.var_mm == pytest.approx(var, abs=1e-12)
    assert row.std_mm == pytest.approx(var**0.5, abs=1e-12)


def test_with_weeks():
    m = with_weeks(_measurement(1.0), 12.5)
    assert m.gestation_weeks == 12.5
    assert m.thickness_mm == 1.0
