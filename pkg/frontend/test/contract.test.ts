/**
 * End-to-end contract against a live service with one phantom session: the
 * ROI drawn at 2x zoom round-trips exactly, the displayed thickness equals
 * the result JSON, the state machine rejects run-before-ROI, and re-ROI plus
 * re-run updates the overlay.
 *
 * By default this spawns `ntscan serve` (and `ntscan phantom`) from the
 * sibling Python package; set NTSCAN_API to target an already-running
 * service instead. Skipped when the ntscan CLI is not on PATH.
 */

import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { ChildProcess, execFileSync, spawn, spawnSync } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { createServer } from 'node:net';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { NtscanClient } from '../src/api';
import { decodePgm } from '../src/pgm';
import { ViewTransform, rectToCanvas, roiFromDrag } from '../src/roi';
import { Report, banner, bannerThickness } from '../src/view';

const haveCli = spawnSync('ntscan', ['--help']).status === 0;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, '127.0.0.1', () => {
      const addr = srv.address();
      if (addr === null || typeof addr === 'string') {
        reject(new Error('could not reserve a port'));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
  });
}

async function waitReady(base: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${base}/sessions/none`);
      if (res.status === 404) return;
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service at ${base} not ready after ${timeoutMs} ms`);
}

describe.skipIf(!haveCli)('live service contract', () => {
  let proc: ChildProcess | null = null;
  let base: string;
  let image: Uint8Array<ArrayBuffer>;
  let workDir: string;

  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), 'ntscan-ui-'));
    execFileSync('ntscan', ['phantom', '--seed', '7', '--size', '96', '--out', workDir]);
    image = new Uint8Array(readFileSync(join(workDir, 'image.pgm')));
    const external = process.env.NTSCAN_API;
    if (external) {
      base = external;
    } else {
      const port = await freePort();
      base = `http://127.0.0.1:${port}`;
      proc = spawn('ntscan', ['serve', '--bind', `127.0.0.1:${port}`], {
        stdio: 'ignore',
      });
    }
    await waitReady(base);
  });

  afterAll(() => {
    proc?.kill();
    rmSync(workDir, { recursive: true, force: true });
  });

  it('walks the operator loop on one phantom session', async () => {
    const client = new NtscanClient(base);

    const created = await client.createSession(image);
    expect(created.status).toBe('awaiting-roi');
    expect(created.roi).toBeNull();
    // the preview decoder agrees with the service about the frame size
    const pgm = decodePgm(image);
    expect([created.width, created.height]).toEqual([pgm.width, pgm.height]);

    // the state machine rejects run-before-ROI
    await expect(client.run(created.id)).rejects.toMatchObject({ status: 409 });

    // a ROI drawn at 2x zoom round-trips exactly
    const view: ViewTransform = { zoom: 2, panX: 0, panY: 0 };
    const roi = roiFromDrag(
      { x: 32, y: 32 },
      { x: 160, y: 160 },
      view,
      created.width,
      created.height,
    );
    expect(roi).toEqual({ x0: 16, y0: 16, w: 64, h: 64 });
    const echoed = (await client.putRoi(created.id, roi)).roi;
    expect(echoed).toEqual(roi);
    expect(rectToCanvas(echoed!, view)).toEqual({ x: 32, y: 32, w: 128, h: 128 });

    // run; the displayed thickness equals the result JSON
    const ran = await client.run(created.id, { mm_per_px: 0.1, weeks: 12.0 });
    expect(ran.status).toBe('ran');
    const result: Report = await client.result(created.id);
    expect(result).toEqual(ran.report);
    expect(result.measurement).not.toBeNull();
    expect(bannerThickness(banner(result))).toBe(result.measurement!.thickness_mm);

    // re-ROI + re-run updates the overlay
    const before = await client.overlayBytes(created.id);
    const roi2 = roiFromDrag(
      { x: 16, y: 16 },
      { x: 176, y: 176 },
      view,
      created.width,
      created.height,
    );
    expect(roi2).toEqual({ x0: 8, y0: 8, w: 80, h: 80 });
    await client.putRoi(created.id, roi2);
    await client.run(created.id, { mm_per_px: 0.1, weeks: 12.0 });
    const after = await client.overlayBytes(created.id);
    expect(Buffer.compare(Buffer.from(before), Buffer.from(after))).not.toBe(0);

    // accept freezes the session but keeps the result readable
    const accepted = await client.accept(created.id);
    expect(accepted.status).toBe('accepted');
    await expect(client.run(created.id)).rejects.toMatchObject({ status: 409 });
    expect((await client.result(created.id)).roi).toEqual(roi2);
  });
});
