/**
 * Typed client for the session service. JSON in, JSON out; the client does no
 * processing of its own, so everything shown in the UI is traceable to a
 * response body.
 */

import type { Rect } from './roi';
import type { Report, SessionState } from './view';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function toError(res: Response): Promise<ApiError> {
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(res.status, detail);
}

export class NtscanClient {
  constructor(readonly base: string) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    if (!res.ok) throw await toError(res);
    return res.json() as Promise<T>;
  }

  createSession(image: Uint8Array<ArrayBuffer> | Blob): Promise<SessionState> {
    return this.json('/sessions', {
      method: 'POST',
      body: image,
      headers: { 'content-type': 'application/octet-stream' },
    });
  }

  getSession(id: string): Promise<SessionState> {
    return this.json(`/sessions/${id}`);
  }

  putRoi(id: string, roi: Rect): Promise<SessionState> {
    return this.json(`/sessions/${id}/roi`, {
      method: 'PUT',
      body: JSON.stringify(roi),
      headers: { 'content-type': 'application/json' },
    });
  }

  run(
    id: string,
    opts: { mm_per_px?: number; weeks?: number } = {},
  ): Promise<SessionState & { report: Report }> {
    return this.json(`/sessions/${id}/run`, {
      method: 'POST',
      body: JSON.stringify(opts),
      headers: { 'content-type': 'application/json' },
    });
  }

  result(id: string): Promise<Report> {
    return this.json(`/sessions/${id}/result`);
  }

  accept(id: string): Promise<SessionState & { snapshot: string | null }> {
    return this.json(`/sessions/${id}/accept`, { method: 'POST' });
  }

  /** Overlay URL with an optional cache-buster so re-runs refresh the image. */
  overlayUrl(id: string, bust?: number): string {
    const query = bust === undefined ? '' : `?t=${bust}`;
    return `${this.base}/sessions/${id}/overlay.png${query}`;
  }

  async overlayBytes(id: string): Promise<Uint8Array> {
    const res = await fetch(`${this.base}/sessions/${id}/overlay.png`);
    if (!res.ok) throw await toError(res);
    return new Uint8Array(await res.arrayBuffer());
  }
}
