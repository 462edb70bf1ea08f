/**
 * Pure assembly of what the page displays from service payloads. Numbers are
 * passed through unchanged — the banner thickness is the exact float from the
 * result JSON, never recomputed or rounded client-side.
 */

import type { Rect } from './roi';

export interface Finding {
  code: string;
  detail: string;
}

export interface Measurement {
  thickness_mm: number;
  thickness_px: number;
  chord: [number, number][];
  blob_area_px: number;
  mm_per_px: number;
  gestation_weeks: number | null;
}

export interface Classification {
  status: string;
  rule_fired: string | null;
  threshold_mm: number | null;
}

export interface Report {
  roi: Rect;
  despeckle: {
    iterations_run: number;
    flags_per_iteration: number[];
    terminated_by: string;
  };
  segmentation: { cluster_count: number; pruning_note: string | null };
  edges: { count: number };
  measurement: Measurement | null;
  classification: Classification | null;
  findings: Finding[];
  axis_note: string;
}

/** Session body returned by every state-changing endpoint. */
export interface SessionState {
  id: string;
  status: string;
  width: number;
  height: number;
  roi: Rect | null;
  has_result: boolean;
}

export interface ResultSummary {
  thickness_mm: number | null;
  classification: string | null;
  rule_fired: string | null;
}

export interface UiSessionView {
  id: string;
  status: string;
  width: number;
  height: number;
  roi: Rect | null;
  imageUrl: string;
  overlayUrl: string | null;
  summary: ResultSummary | null;
  banner: string;
  report: Report | null;
}

export function sessionView(
  state: SessionState,
  imageUrl: string,
  overlayUrl: string | null,
  report: Report | null,
): UiSessionView {
  return {
    id: state.id,
    status: state.status,
    width: state.width,
    height: state.height,
    roi: state.roi,
    imageUrl,
    overlayUrl,
    summary:
      report === null
        ? null
        : {
            thickness_mm: report.measurement?.thickness_mm ?? null,
            classification: report.classification?.status ?? null,
            rule_fired: report.classification?.rule_fired ?? null,
          },
    banner: banner(report),
    report,
  };
}

/** One-line headline under the frame; details live in the findings panel. */
export function banner(report: Report | null): string {
  if (report === null) return 'draw a ROI and run';
  const codes = report.findings.map((f) => f.code);
  if (codes.includes('no-translucency')) {
    return 'no NT region found — draw a new ROI and run again';
  }
  const m = report.measurement;
  if (m === null) {
    if (codes.includes('calibration-required')) {
      return 'band isolated — set mm/px to measure thickness';
    }
    if (codes.includes('axis-undefined')) {
      return 'band axis undefined — adjust the ROI and run again';
    }
    return 'no measurement';
  }
  let text = `NT ${m.thickness_mm} mm`;
  const c = report.classification;
  if (c !== null) {
    text += ` — ${c.status}`;
    if (c.rule_fired !== null) text += ` (${c.rule_fired})`;
  } else if (codes.includes('gestation-weeks-missing')) {
    text += ' — gestation weeks missing, not classified';
  }
  return text;
}

/** The thickness shown in a banner, recovered for traceability checks. */
export function bannerThickness(text: string): number | null {
  const match = /^NT (\S+) mm/.exec(text);
  return match ? Number(match[1]) : null;
}
