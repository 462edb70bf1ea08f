/**
 * Minimal binary PGM (P5) reader. Browsers cannot display PGM, and the
 * service has no endpoint for the original frame, so uploads are decoded
 * client-side purely for the pre-run preview the operator draws the ROI on.
 */

export interface PgmImage {
  width: number;
  height: number;
  pixels: Uint8Array;
}

export function isPgm(bytes: Uint8Array): boolean {
  return bytes.length >= 2 && bytes[0] === 0x50 && bytes[1] === 0x35; // "P5"
}

export function decodePgm(bytes: Uint8Array): PgmImage {
  if (!isPgm(bytes)) throw new Error('not a binary PGM (missing P5 magic)');
  // header: "P5" <ws> width <ws> height <ws> maxval <one ws byte> raster
  let pos = 2;
  const tokens: number[] = [];
  while (tokens.length < 3) {
    while (pos < bytes.length) {
      const b = bytes[pos];
      if (b === 0x23) {
        // "#" comment runs to end of line
        while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      } else if (b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d) {
        pos++;
      } else {
        break;
      }
    }
    const start = pos;
    let value = 0;
    while (pos < bytes.length && bytes[pos] >= 0x30 && bytes[pos] <= 0x39) {
      value = value * 10 + (bytes[pos] - 0x30);
      pos++;
    }
    if (pos === start) throw new Error('bad PGM header');
    tokens.push(value);
  }
  const [width, height, maxval] = tokens;
  if (maxval !== 255) throw new Error(`unsupported PGM maxval ${maxval}`);
  pos++; // the single whitespace byte separating maxval from the raster
  const pixels = bytes.slice(pos, pos + width * height);
  if (pixels.length !== width * height) throw new Error('truncated PGM raster');
  return { width, height, pixels };
}
