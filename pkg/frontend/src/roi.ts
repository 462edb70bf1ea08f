/**
 * ROI geometry: pointer drags on a zoomed canvas become rectangles in image
 * pixel coordinates. Submission math is integer (floor after the inverse
 * transform), so the ROI the service receives never depends on the display
 * zoom or pan — drawing at 2x and at 1x submit identical rectangles.
 */

export interface Point {
  x: number;
  y: number;
}

/** Rectangle in image pixel coordinates; keys match the service ROI body. */
export interface Rect {
  x0: number;
  y0: number;
  w: number;
  h: number;
}

export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

/** Service-side minimum ROI side length, mirrored for the early hint. */
export const MIN_ROI_SIDE = 16;

export function imagePointToCanvas(p: Point, t: ViewTransform): Point {
  return { x: p.x * t.zoom + t.panX, y: p.y * t.zoom + t.panY };
}

export function canvasPointToImage(p: Point, t: ViewTransform): Point {
  return {
    x: Math.floor((p.x - t.panX) / t.zoom),
    y: Math.floor((p.y - t.panY) / t.zoom),
  };
}

/** Normalize a drag with any corner order; image coordinates in and out. */
export function normalizeDrag(a: Point, b: Point): Rect {
  return {
    x0: Math.min(a.x, b.x),
    y0: Math.min(a.y, b.y),
    w: Math.abs(a.x - b.x),
    h: Math.abs(a.y - b.y),
  };
}

/** Clip a rectangle to the image bounds, keeping the inside portion. */
export function clampToImage(r: Rect, width: number, height: number): Rect {
  const x0 = Math.min(Math.max(r.x0, 0), width);
  const y0 = Math.min(Math.max(r.y0, 0), height);
  const x1 = Math.min(Math.max(r.x0 + r.w, 0), width);
  const y1 = Math.min(Math.max(r.y0 + r.h, 0), height);
  return { x0, y0, w: x1 - x0, h: y1 - y0 };
}

/** Full drag-to-ROI path: canvas corners -> image rect clipped to bounds. */
export function roiFromDrag(
  a: Point,
  b: Point,
  t: ViewTransform,
  width: number,
  height: number,
): Rect {
  const rect = normalizeDrag(canvasPointToImage(a, t), canvasPointToImage(b, t));
  return clampToImage(rect, width, height);
}

/** Sub-minimum drags are rejected with a hint instead of being submitted. */
export function rectTooSmall(r: Rect): boolean {
  return r.w < MIN_ROI_SIDE || r.h < MIN_ROI_SIDE;
}

/** Canvas-space rectangle for rendering the ROI box or rubber band. */
export function rectToCanvas(
  r: Rect,
  t: ViewTransform,
): { x: number; y: number; w: number; h: number } {
  const p = imagePointToCanvas({ x: r.x0, y: r.y0 }, t);
  return { x: p.x, y: p.y, w: r.w * t.zoom, h: r.h * t.zoom };
}

/**
 * Caliper chord endpoints — reported as (row, col) pairs relative to the ROI —
 * mapped to canvas points for drawing. Rendering only; fractional output is
 * fine here, unlike the integer submission path above.
 */
export function chordToCanvas(
  chord: ReadonlyArray<readonly [number, number]>,
  roi: Rect,
  t: ViewTransform,
): Point[] {
  return chord.map(([row, col]) =>
    imagePointToCanvas({ x: roi.x0 + col, y: roi.y0 + row }, t),
  );
}
