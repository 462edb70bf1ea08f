/**
 * Page wiring for the operator loop: upload a frame, draw the ROI on the
 * zoomed canvas, run the pipeline, inspect the overlay and banner, accept or
 * re-steer. All measurement work happens server-side; this file only moves
 * bytes and draws.
 */

import { ApiError, NtscanClient } from './api';
import { decodePgm, isPgm } from './pgm';
import {
  MIN_ROI_SIDE,
  Point,
  ViewTransform,
  chordToCanvas,
  rectToCanvas,
  rectTooSmall,
  roiFromDrag,
} from './roi';
import { Report, SessionState, banner } from './view';

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const fileInput = $<HTMLInputElement>('frame-file');
const zoomSelect = $<HTMLSelectElement>('zoom');
const mmInput = $<HTMLInputElement>('mm-per-px');
const weeksInput = $<HTMLInputElement>('weeks');
const runButton = $<HTMLButtonElement>('run');
const acceptButton = $<HTMLButtonElement>('accept');
const statusEl = $<HTMLDivElement>('status');
const bannerEl = $<HTMLDivElement>('banner');
const reportEl = $<HTMLPreElement>('report');
const canvas = $<HTMLCanvasElement>('frame-canvas');
const ctx = canvas.getContext('2d')!;

// served same-origin by `ntscan serve --ui`, or pointed elsewhere via ?api=
const apiBase = new URLSearchParams(location.search).get('api') ?? '';
const client = new NtscanClient(apiBase);

let session: SessionState | null = null;
let report: Report | null = null;
let frame: ImageBitmap | null = null;
let overlay: ImageBitmap | null = null;
let dragStart: Point | null = null;
let dragEnd: Point | null = null;

function transform(): ViewTransform {
  return { zoom: Number(zoomSelect.value), panX: 0, panY: 0 };
}

function setStatus(text: string, isError = false): void {
  statusEl.textContent = text;
  statusEl.className = isError ? 'error' : '';
}

function showError(err: unknown): void {
  if (err instanceof ApiError) {
    setStatus(`service error ${err.status}: ${err.message}`, true);
  } else {
    setStatus(`service unreachable (${String(err)}) — ROI preserved`, true);
  }
}

function redraw(): void {
  const t = transform();
  const width = session?.width ?? frame?.width ?? 0;
  const height = session?.height ?? frame?.height ?? 0;
  canvas.width = Math.max(1, width * t.zoom);
  canvas.height = Math.max(1, height * t.zoom);
  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = '#14181f';
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  const base = overlay ?? frame;
  if (base !== null) {
    ctx.drawImage(base, 0, 0, width * t.zoom, height * t.zoom);
  }

  if (session?.roi) {
    const r = rectToCanvas(session.roi, t);
    ctx.strokeStyle = '#50b4ff';
    ctx.lineWidth = 1;
    ctx.strokeRect(r.x + 0.5, r.y + 0.5, r.w - 1, r.h - 1);
  }

  if (dragStart !== null && dragEnd !== null) {
    ctx.strokeStyle = '#ffffff';
    ctx.setLineDash([4, 3]);
    ctx.strokeRect(
      Math.min(dragStart.x, dragEnd.x) + 0.5,
      Math.min(dragStart.y, dragEnd.y) + 0.5,
      Math.abs(dragEnd.x - dragStart.x),
      Math.abs(dragEnd.y - dragStart.y),
    );
    ctx.setLineDash([]);
  }

  if (report?.measurement && session?.roi) {
    drawCalipers(chordToCanvas(report.measurement.chord, session.roi, t));
  }
}

/** Two cross markers joined by a line over the measured chord. */
function drawCalipers(points: Point[]): void {
  const [p0, p1] = points;
  ctx.strokeStyle = '#ffe14a';
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(p0.x, p0.y);
  ctx.lineTo(p1.x, p1.y);
  ctx.stroke();
  for (const p of points) {
    ctx.beginPath();
    ctx.moveTo(p.x - 6, p.y);
    ctx.lineTo(p.x + 6, p.y);
    ctx.moveTo(p.x, p.y - 6);
    ctx.lineTo(p.x, p.y + 6);
    ctx.stroke();
  }
}

async function bitmapFromUpload(bytes: Uint8Array, file: File): Promise<ImageBitmap> {
  if (isPgm(bytes)) {
    const pgm = decodePgm(bytes);
    const rgba = new Uint8ClampedArray(pgm.width * pgm.height * 4);
    for (let i = 0; i < pgm.pixels.length; i++) {
      const v = pgm.pixels[i];
      rgba[i * 4] = v;
      rgba[i * 4 + 1] = v;
      rgba[i * 4 + 2] = v;
      rgba[i * 4 + 3] = 255;
    }
    return createImageBitmap(new ImageData(rgba, pgm.width, pgm.height));
  }
  return createImageBitmap(file);
}

fileInput.addEventListener('change', async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  try {
    session = await client.createSession(bytes);
    frame = await bitmapFromUpload(bytes, file);
    overlay = null;
    report = null;
    bannerEl.textContent = banner(null);
    reportEl.textContent = '';
    setStatus(
      `session ${session.id}: ${session.width}×${session.height}, ${session.status}`,
    );
  } catch (err) {
    showError(err);
  }
  redraw();
});

zoomSelect.addEventListener('change', redraw);

canvas.addEventListener('pointerdown', (e) => {
  if (session === null) return;
  canvas.setPointerCapture(e.pointerId);
  dragStart = { x: e.offsetX, y: e.offsetY };
  dragEnd = dragStart;
});

canvas.addEventListener('pointermove', (e) => {
  if (dragStart === null) return;
  dragEnd = { x: e.offsetX, y: e.offsetY };
  redraw();
});

canvas.addEventListener('pointerup', async (e) => {
  if (dragStart === null || session === null) return;
  const end: Point = { x: e.offsetX, y: e.offsetY };
  const roi = roiFromDrag(dragStart, end, transform(), session.width, session.height);
  dragStart = null;
  dragEnd = null;
  if (rectTooSmall(roi)) {
    setStatus(
      `ROI ${roi.w}×${roi.h} px is below the ${MIN_ROI_SIDE} px minimum — draw a larger box`,
      true,
    );
    redraw();
    return;
  }
  try {
    session = await client.putRoi(session.id, roi);
    setStatus(`ROI set to (${roi.x0}, ${roi.y0}) ${roi.w}×${roi.h}`);
  } catch (err) {
    showError(err);
  }
  redraw();
});

runButton.addEventListener('click', async () => {
  if (session === null) {
    setStatus('upload a frame first', true);
    return;
  }
  const opts: { mm_per_px?: number; weeks?: number } = {};
  if (mmInput.value !== '') opts.mm_per_px = Number(mmInput.value);
  if (weeksInput.value !== '') opts.weeks = Number(weeksInput.value);
  try {
    const ran = await client.run(session.id, opts);
    session = ran;
    report = ran.report;
    const res = await fetch(client.overlayUrl(session.id, Date.now()));
    overlay = await createImageBitmap(await res.blob());
    bannerEl.textContent = banner(report);
    reportEl.textContent = JSON.stringify(report, null, 2);
    setStatus(`ran session ${session.id}`);
  } catch (err) {
    showError(err);
  }
  redraw();
});

acceptButton.addEventListener('click', async () => {
  if (session === null) {
    setStatus('upload a frame first', true);
    return;
  }
  try {
    const accepted = await client.accept(session.id);
    session = accepted;
    setStatus(
      accepted.snapshot === null
        ? 'accepted (no snapshot directory configured)'
        : `accepted — snapshot ${accepted.snapshot}`,
    );
  } catch (err) {
    showError(err);
  }
  redraw();
});

bannerEl.textContent = banner(null);
redraw();
