"""Mean-shift segmentation over the joint spatial-range feature space.

Each pixel's feature point ascends the Epanechnikov kernel density estimate by
repeatedly stepping to the mean of the points inside its unit hypersphere
(coordinates are pre-scaled by the bandwidths, so the sphere radius is 1).
Convergence points closer than the linking radius are chained into clusters,
pixels take their trajectory's cluster label, and spatial regions smaller
than the pruning threshold are absorbed into their longest-boundary neighbor.

The batch converger groups live trajectories by grid cell and answers all
ball queries for a cell against the 27-cell neighborhood of the static point
set, which keeps every sweep a handful of dense numpy operations. It is an
exact ball scan, only reordered; tests pin it against the brute-force
single-point path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ntscan.image import FeaturePointSet, GrayImage, to_feature_points

# Volume of the unit d-sphere, d = 1..3.
_UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}

_EIGHT_CONN = np.ones((3, 3), dtype=bool)


class EmptyBallError(ValueError):
    """No points inside the query hypersphere."""


@dataclass(frozen=True)
class MeanShiftParams:
    h_s: float
    h_r: float
    tol: float = 1e-3
    max_iter: int = 100
    link_radius: float = 0.5
    min_region: int = 20

    def __post_init__(self):
        for name in ("h_s", "h_r", "tol", "link_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.max_iter < 1 or self.min_region < 1:
            raise ValueError("max_iter and min_region must be >= 1")


@dataclass(frozen=True)
class ConvergenceResult:
    """Convergence point, iteration count, and cap flag per input point."""

    z: np.ndarray
    iters: np.ndarray
    hit_max: np.ndarray
    history: np.ndarray | None = None  # (sweeps+1, n, d) when recorded

    def __post_init__(self):
        if len(self.z) != len(self.iters) or len(self.z) != len(self.hit_max):
            raise ValueError("per-point arrays must share a length")


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel cluster ids forming a partition, with per-cluster modes."""

    labels: np.ndarray
    cluster_count: int
    cluster_modes: np.ndarray
    pruning_note: str | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError("labels must be a 2-D raster")
        if labels.min() < 0 or labels.max() >= self.cluster_count:
            raise ValueError("labels must lie in [0, cluster_count)")
        if len(self.cluster_modes) != self.cluster_count:
            raise ValueError("one mode per cluster required")

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


def _as_points(points) -> np.ndarray:
    if isinstance(points, FeaturePointSet):
        return points.points
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be an (n, d) array, got shape {pts.shape}")
    return pts


def epanechnikov_kernel(x) -> float:
    """Compact quadratic kernel: 0.5 * (d+2)/c_d * (1 - |x|^2) inside the unit ball."""
    x = np.asarray(x, dtype=np.float64).ravel()
    d = x.size
    if d not in _UNIT_BALL_VOLUME:
        raise ValueError(f"kernel defined for d in (1, 2, 3), got d={d}")
    sq = float(x @ x)
    if sq >= 1.0:
        return 0.0
    return 0.5 * (d + 2) * (1.0 - sq) / _UNIT_BALL_VOLUME[d]


def density_estimate(x, points, h: float = 1.0) -> float:
    """Kernel density at x: (1 / (n h^d)) * sum K((x - x_i) / h)."""
    pts = _as_points(points)
    n, d = pts.shape
    if n == 0:
        raise ValueError("density estimate needs at least one point")
    if d not in _UNIT_BALL_VOLUME:
        raise ValueError(f"kernel defined for d in (1, 2, 3), got d={d}")
    if not h > 0:
        raise ValueError(f"bandwidth must be > 0, got {h}")
    u = (np.asarray(x, dtype=np.float64) - pts) / h
    sq = np.einsum("ij,ij->i", u, u)
    inside = sq < 1.0
    total = 0.5 * (d + 2) / _UNIT_BALL_VOLUME[d] * np.sum(1.0 - sq[inside])
    return float(total / (n * h**d))


def mean_shift_vector(x, points, h: float = 1.0) -> np.ndarray:
    """Sample mean of the in-ball points minus x; the density-ascent step.

    The sum is an einsum over 0/1 weights so the accumulation order is the
    ascending point order; the batched grid path reproduces it bit for bit.
    """
    pts = _as_points(points)
    x = np.asarray(x, dtype=np.float64)
    diff = pts - x
    sq = np.einsum("ij,ij->i", diff, diff)
    mask = sq < h * h
    cnt = int(np.count_nonzero(mask))
    if cnt == 0:
        raise EmptyBallError(f"no points within {h} of {x}")
    total = np.einsum("c,cd->d", mask.astype(np.float64), pts)
    return total / cnt - x


def converge_point(
    x0,
    points,
    tol: float = 1e-3,
    max_iter: int = 100,
    h: float = 1.0,
    record: bool = False,
):
    """Iterate x <- x + M(x) until the step is below tol or the cap is hit.

    Returns (z, iters) or (z, iters, trajectory) when recording. A start with
    no in-ball neighbors is its own mode (0 iterations).
    """
    pts = _as_points(points)
    x = np.asarray(x0, dtype=np.float64).copy()
    traj = [x.copy()]
    iters = 0
    while True:
        try:
            m = mean_shift_vector(x, pts, h)
        except EmptyBallError:
            break
        if float(m @ m) < tol * tol:
            break
        if iters >= max_iter:
            break
        x = x + m
        traj.append(x.copy())
        iters += 1
    if record:
        return x, iters, np.array(traj)
    return x, iters


class _GridIndex:
    """Unit-cell binning of a static point set for exact ball-mean queries."""

    def __init__(self, points: np.ndarray):
        self.points = points
        self._d = points.shape[1]
        cells = np.floor(points).astype(np.int64)
        uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
        self._members = {
            tuple(uniq[i]): order[bounds[i] : bounds[i + 1]] for i in range(len(uniq))
        }
        self._offsets = np.array(
            np.meshgrid(*([[-1, 0, 1]] * self._d), indexing="ij")
        ).reshape(self._d, -1).T
        self._cand_cache: dict[tuple, np.ndarray] = {}
        self._pts_cache: dict[tuple, np.ndarray] = {}

    def candidates(self, cell: tuple) -> np.ndarray:
        """Indices of points in the 3^d cell neighborhood (covers any unit ball)."""
        cached = self._cand_cache.get(cell)
        if cached is None:
            parts = [
                self._members[key]
                for off in self._offsets
                if (key := tuple(np.asarray(cell) + off)) in self._members
            ]
            cached = np.sort(np.concatenate(parts)) if parts else np.empty(0, np.int64)
            self._cand_cache[cell] = cached
        return cached

    def _neighborhood(self, cell: tuple) -> np.ndarray:
        pts = self._pts_cache.get(cell)
        if pts is None:
            pts = self.points[self.candidates(cell)]
            self._pts_cache[cell] = pts
        return pts

    def ball_means(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Mean of in-ball (radius 1) points per query, and the in-ball counts."""
        means = queries.copy()
        counts = np.zeros(len(queries), dtype=np.int64)
        qcells = np.floor(queries).astype(np.int64)
        uniq, inverse = np.unique(qcells, axis=0, return_inverse=True)
        for u in range(len(uniq)):
            rows = np.flatnonzero(inverse == u)
            cpts = self._neighborhood(tuple(uniq[u]))
            if cpts.size == 0:
                continue
            # these einsums reproduce mean_shift_vector's arithmetic bit for
            # bit (candidates are in ascending point order, and zero-weight
            # terms leave sequential sums unchanged), so batch and
            # single-point ascent follow identical trajectories
            diff = queries[rows, None, :] - cpts[None, :, :]
            inball = np.einsum("qcd,qcd->qc", diff, diff) < 1.0
            cnt = inball.sum(axis=1)
            hit = cnt > 0
            if hit.any():
                sums = np.einsum("qc,cd->qd", inball[hit].astype(np.float64), cpts)
                means[rows[hit]] = sums / cnt[hit, None]
            counts[rows] = cnt
        return means, counts


def converge_points(
    points,
    tol: float = 1e-3,
    max_iter: int = 100,
    record: bool = False,
) -> ConvergenceResult:
    """Run the mean-shift procedure from every point of the set (radius 1)."""
    pts = _as_points(points)
    n = len(pts)
    pos = pts.copy()
    iters = np.zeros(n, dtype=np.int64)
    hit_max = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    index = _GridIndex(pts)
    tol_sq = tol * tol
    history = [pos.copy()] if record else None
    sweeps = 0
    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        # points whose trajectories have merged share one ball query: the mean
        # is a pure function of position, so collapsing exact duplicates is free
        upos, inv = np.unique(pos[idx], axis=0, return_inverse=True)
        umeans, ucounts = index.ball_means(upos)
        means, counts = umeans[inv], ucounts[inv]
        step = means - pos[idx]
        step_sq = np.einsum("ij,ij->i", step, step)
        done = (counts == 0) | (step_sq < tol_sq)
        active[idx[done]] = False
        movers = idx[~done]
        if movers.size == 0:
            break
        if sweeps >= max_iter:
            hit_max[movers] = True
            active[movers] = False
            break
        pos[movers] = pos[movers] + step[~done]
        iters[movers] += 1
        sweeps += 1
        if record:
            history.append(pos.copy())
    return ConvergenceResult(
        z=pos,
        iters=iters,
        hit_max=hit_max,
        history=np.array(history) if record else None,
    )


def link_clusters(z, link_radius: float = 0.5) -> np.ndarray:
    """Labels of the connected components of the closer-than-radius graph.

    Components are computed exactly: points are binned at radius/2 (cell
    diameter < radius, so same-cell points always link), then nearby cells are
    tested pair-by-pair. Labels are renumbered by first occurrence.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or len(z) == 0:
        raise ValueError("need a non-empty (n, d) array of convergence points")
    if not link_radius > 0:
        raise ValueError(f"link_radius must be > 0, got {link_radius}")
    d = z.shape[1]
    # cell diagonal = (radius/2) * sqrt(d) < radius for d <= 3, so same-cell
    # points always satisfy the strict distance test
    cell = link_radius / 2.0
    cells = np.floor(z / cell).astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    ncells = len(uniq)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(ncells + 1))
    members = [order[bounds[i] : bounds[i + 1]] for i in range(ncells)]
    cell_of = {tuple(uniq[i]): i for i in range(ncells)}

    parent = list(range(ncells))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    reach = int(math.ceil(link_radius / cell))
    span = range(-reach, reach + 1)
    offsets = [
        off
        for off in np.array(np.meshgrid(*([list(span)] * d), indexing="ij")).reshape(d, -1).T
        if tuple(off) > (0,) * d  # strict upper half; symmetric pairs once
    ]
    r_sq = link_radius * link_radius
    for i in range(ncells):
        zi = z[members[i]]
        for off in offsets:
            j = cell_of.get(tuple(uniq[i] + off))
            if j is None or find(i) == find(j):
                continue
            zj = z[members[j]]
            diff = zi[:, None, :] - zj[None, :, :]
            if (np.einsum("abd,abd->ab", diff, diff) < r_sq).any():
                union(i, j)

    roots = np.array([find(i) for i in range(ncells)])
    point_roots = roots[inverse]
    _, first_order = np.unique(point_roots, return_index=True)
    lut = np.empty(ncells, dtype=np.int64)
    lut[point_roots[np.sort(first_order)]] = np.arange(len(first_order))
    return lut[point_roots]


def _spatial_regions(labels: np.ndarray) -> np.ndarray:
    """8-connected regions of constant label, ids 0..R-1 in scan order."""
    regions = np.full(labels.shape, -1, dtype=np.int64)
    nxt = 0
    for lab in np.unique(labels):
        comp, count = ndimage.label(labels == lab, structure=_EIGHT_CONN)
        regions[comp > 0] = comp[comp > 0] + nxt - 1
        nxt += count
    # renumber in first-occurrence scan order for determinism
    flat = regions.ravel()
    _, first = np.unique(flat, return_index=True)
    lut = np.empty(nxt, dtype=np.int64)
    lut[flat[np.sort(first)]] = np.arange(nxt)
    return lut[flat].reshape(labels.shape)


def _boundary_neighbors(regions: np.ndarray, region_id: int) -> dict[int, int]:
    """Shared-boundary pair counts between one region and each 8-neighbor region."""
    mask = regions == region_id
    rows, cols = np.nonzero(mask)
    h, w = regions.shape
    counts: dict[int, int] = {}
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            rr = rows + dr
            cc = cols + dc
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            neigh = regions[rr[ok], cc[ok]]
            vals, cnts = np.unique(neigh[neigh != region_id], return_counts=True)
            for rid, c in zip(vals, cnts):
                counts[int(rid)] = counts.get(int(rid), 0) + int(c)
    return counts


def prune_regions(label_map: LabelMap, min_region: int) -> LabelMap:
    """Absorb spatial regions below min_region into their longest-boundary neighbor.

    Merging repeats until every 8-connected region holds at least min_region
    pixels. If the raster collapses to a single undersized region it is kept
    and the condition is noted.
    """
    if min_region < 1:
        raise ValueError(f"min_region must be >= 1, got {min_region}")
    labels = np.asarray(label_map.labels).copy()
    regions = _spatial_regions(labels)
    sizes = {int(r): int(c) for r, c in zip(*np.unique(regions, return_counts=True))}
    note = None
    while True:
        small = [r for r, c in sizes.items() if c < min_region]
        if not small:
            break
        if len(sizes) == 1:
            note = f"single region of {next(iter(sizes.values()))} px below min_region"
            break
        target = min(small, key=lambda r: (sizes[r], r))
        neighbors = _boundary_neighbors(regions, target)
        if not neighbors:
            # isolated undersized raster component; keep it
            note = f"region {target} has no neighbor to absorb it"
            break
        absorb = max(neighbors.items(), key=lambda kv: (kv[1], -kv[0]))[0]
        absorb_label = labels[regions == absorb].flat[0]
        mask = regions == target
        regions[mask] = absorb
        labels[mask] = absorb_label
        sizes[absorb] += sizes.pop(target)

    # canonical relabel by first occurrence; surviving clusters keep their modes
    flat = labels.ravel()
    _, first = np.unique(flat, return_index=True)
    ordered = flat[np.sort(first)]
    lut = np.empty(label_map.cluster_count, dtype=np.int64)
    lut[ordered] = np.arange(len(ordered))
    new_labels = lut[flat].reshape(labels.shape)
    modes = np.array([label_map.cluster_modes[int(old)] for old in ordered])
    return LabelMap(
        labels=new_labels,
        cluster_count=len(ordered),
        cluster_modes=modes,
        pruning_note=note,
    )


def segment(img: GrayImage, params: MeanShiftParams) -> LabelMap:
    """Full segmentation: feature conversion, convergence, linking, pruning.

    Intensities are taken relative to the image minimum before scaling. A
    global brightness shift then feeds bit-identical features to the
    mode-seeking stage, so the partition is exactly invariant to it; the
    offset is added back to the reported mode intensities.
    """
    lo = int(img.data.min())
    rel = img.with_data(img.data - np.uint8(lo))
    fps = to_feature_points(rel, params.h_s, params.h_r)
    conv = converge_points(fps.points, tol=params.tol, max_iter=params.max_iter)
    point_labels = link_clusters(conv.z, params.link_radius)
    m = int(point_labels.max()) + 1
    modes = np.stack([conv.z[point_labels == p].mean(axis=0) for p in range(m)])
    modes[:, 2] += lo / params.h_r
    pre = LabelMap(
        labels=point_labels.reshape(img.shape),
        cluster_count=m,
        cluster_modes=modes,
    )
    return prune_regions(pre, params.min_region)


def mode_image(label_map: LabelMap, img: GrayImage) -> GrayImage:
    """Each pixel replaced by its cluster's mean intensity (rounded half up)."""
    if label_map.shape != img.shape:
        raise ValueError("label map and image shapes differ")
    labels = label_map.labels.ravel()
    values = img.data.ravel().astype(np.float64)
    sums = np.bincount(labels, weights=values, minlength=label_map.cluster_count)
    counts = np.bincount(labels, minlength=label_map.cluster_count)
    means = np.floor(sums / counts + 0.5).astype(np.uint8)
    return img.with_data(means[labels].reshape(img.shape))
