import { describe, expect, it } from 'vitest';

import { decodePgm, isPgm } from '../src/pgm';

function pgmBytes(header: string, raster: number[]): Uint8Array {
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + raster.length);
  out.set(head);
  out.set(raster, head.length);
  return out;
}

describe('decodePgm', () => {
  it('reads a plain binary header', () => {
    const img = decodePgm(pgmBytes('P5\n4 2\n255\n', [0, 64, 128, 255, 1, 2, 3, 4]));
    expect(img.width).toBe(4);
    expect(img.height).toBe(2);
    expect(Array.from(img.pixels)).toEqual([0, 64, 128, 255, 1, 2, 3, 4]);
  });

  it('skips comment lines in the header', () => {
    const img = decodePgm(pgmBytes('P5\n# made by a scanner\n2 2\n# 8-bit\n255\n', [9, 8, 7, 6]));
    expect(img.width).toBe(2);
    expect(Array.from(img.pixels)).toEqual([9, 8, 7, 6]);
  });

  it('rejects truncated rasters, wide maxval, and other formats', () => {
    expect(() => decodePgm(pgmBytes('P5\n4 2\n255\n', [1, 2, 3]))).toThrow('truncated');
    expect(() => decodePgm(pgmBytes('P5\n2 2\n65535\n', [0, 0, 0, 0]))).toThrow('maxval');
    expect(() => decodePgm(pgmBytes('P6\n2 2\n255\n', [0, 0, 0, 0]))).toThrow('P5');
  });

  it('detects the magic', () => {
    expect(isPgm(pgmBytes('P5\n1 1\n255\n', [0]))).toBe(true);
    expect(isPgm(new TextEncoder().encode('\x89PNG'))).toBe(false);
    expect(isPgm(new Uint8Array(0))).toBe(false);
  });
});
