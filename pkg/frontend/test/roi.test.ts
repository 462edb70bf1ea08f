import { describe, expect, it } from 'vitest';

import {
  MIN_ROI_SIDE,
  Point,
  ViewTransform,
  canvasPointToImage,
  chordToCanvas,
  clampToImage,
  imagePointToCanvas,
  normalizeDrag,
  rectToCanvas,
  rectTooSmall,
  roiFromDrag,
} from '../src/roi';

// small deterministic generator so the property runs are reproducible
function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

describe('view transform', () => {
  it('round-trips integer image points exactly at any zoom and pan', () => {
    const rand = lcg(1);
    for (let k = 0; k < 2000; k++) {
      const t: ViewTransform = {
        zoom: 1 + Math.floor(rand() * 4),
        panX: Math.floor(rand() * 400) - 200,
        panY: Math.floor(rand() * 400) - 200,
      };
      const p: Point = {
        x: Math.floor(rand() * 1024),
        y: Math.floor(rand() * 1024),
      };
      expect(canvasPointToImage(imagePointToCanvas(p, t), t)).toEqual(p);
    }
  });

  it('zoom and pan never change the submitted ROI pixel coordinates', () => {
    // the same drag re-expressed under other view transforms maps back to
    // the identical image-coordinate rectangle
    const rand = lcg(2);
    const identity: ViewTransform = { zoom: 1, panX: 0, panY: 0 };
    const others: ViewTransform[] = [
      { zoom: 2, panX: 0, panY: 0 },
      { zoom: 4, panX: -64, panY: 32 },
      { zoom: 3, panX: 7, panY: -7 },
    ];
    for (let k = 0; k < 500; k++) {
      const a: Point = { x: Math.floor(rand() * 256), y: Math.floor(rand() * 256) };
      const b: Point = { x: Math.floor(rand() * 256), y: Math.floor(rand() * 256) };
      const reference = roiFromDrag(a, b, identity, 256, 256);
      for (const t of others) {
        const a2 = imagePointToCanvas(a, t);
        const b2 = imagePointToCanvas(b, t);
        expect(roiFromDrag(a2, b2, t, 256, 256)).toEqual(reference);
      }
    }
  });
});

describe('drag to ROI', () => {
  const zoom2: ViewTransform = { zoom: 2, panX: 0, panY: 0 };

  it('covers the whole image when the drag does, at 2x zoom', () => {
    const roi = roiFromDrag({ x: 0, y: 0 }, { x: 256, y: 256 }, zoom2, 128, 128);
    expect(roi).toEqual({ x0: 0, y0: 0, w: 128, h: 128 });
  });

  it('normalizes reversed drag corners', () => {
    expect(normalizeDrag({ x: 30, y: 40 }, { x: 10, y: 20 })).toEqual({
      x0: 10,
      y0: 20,
      w: 20,
      h: 20,
    });
    // all four corner orders give the same rectangle
    const corners: [Point, Point][] = [
      [{ x: 10, y: 20 }, { x: 30, y: 40 }],
      [{ x: 30, y: 20 }, { x: 10, y: 40 }],
      [{ x: 10, y: 40 }, { x: 30, y: 20 }],
    ];
    for (const [a, b] of corners) {
      expect(normalizeDrag(a, b)).toEqual({ x0: 10, y0: 20, w: 20, h: 20 });
    }
  });

  it('clips drags that leave the image', () => {
    expect(clampToImage({ x0: -10, y0: 50, w: 40, h: 100 }, 64, 64)).toEqual({
      x0: 0,
      y0: 50,
      w: 30,
      h: 14,
    });
    const roi = roiFromDrag({ x: -20, y: -20 }, { x: 500, y: 500 }, zoom2, 64, 64);
    expect(roi).toEqual({ x0: 0, y0: 0, w: 64, h: 64 });
  });

  it('flags sub-minimum rectangles instead of submitting them', () => {
    expect(rectTooSmall({ x0: 0, y0: 0, w: 5, h: 5 })).toBe(true);
    expect(rectTooSmall({ x0: 0, y0: 0, w: MIN_ROI_SIDE - 1, h: 64 })).toBe(true);
    expect(rectTooSmall({ x0: 0, y0: 0, w: MIN_ROI_SIDE, h: MIN_ROI_SIDE })).toBe(false);
  });
});

describe('canvas rendering', () => {
  it('renders the ROI box where the drag happened', () => {
    const t: ViewTransform = { zoom: 2, panX: 0, panY: 0 };
    expect(rectToCanvas({ x0: 16, y0: 16, w: 64, h: 64 }, t)).toEqual({
      x: 32,
      y: 32,
      w: 128,
      h: 128,
    });
  });

  it('maps chord endpoints through the ROI offset and zoom', () => {
    const t: ViewTransform = { zoom: 2, panX: 5, panY: -3 };
    const roi = { x0: 20, y0: 16, w: 32, h: 32 };
    const points = chordToCanvas(
      [
        [2, 3],
        [10, 11],
      ],
      roi,
      t,
    );
    expect(points).toEqual([
      { x: (20 + 3) * 2 + 5, y: (16 + 2) * 2 - 3 },
      { x: (20 + 11) * 2 + 5, y: (16 + 10) * 2 - 3 },
    ]);
  });
});
