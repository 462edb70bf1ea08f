import { describe, expect, it } from 'vitest';

import {
  Report,
  SessionState,
  banner,
  bannerThickness,
  sessionView,
} from '../src/view';

function reportWith(overrides: Partial<Report>): Report {
  return {
    roi: { x0: 16, y0: 16, w: 64, h: 64 },
    despeckle: { iterations_run: 2, flags_per_iteration: [40, 3], terminated_by: 'all-clean' },
    segmentation: { cluster_count: 5, pruning_note: null },
    edges: { count: 120 },
    measurement: {
      thickness_mm: 2.07,
      thickness_px: 20.7,
      chord: [
        [4, 10],
        [24, 10],
      ],
      blob_area_px: 800,
      mm_per_px: 0.1,
      gestation_weeks: 12,
    },
    classification: { status: 'normal', rule_fired: null, threshold_mm: null },
    findings: [],
    axis_note: 'chord measured perpendicular to the principal axis',
    ...overrides,
  };
}

describe('banner', () => {
  it('shows thickness and status for a measured frame', () => {
    expect(banner(reportWith({}))).toBe('NT 2.07 mm — normal');
    const increased = reportWith({
      classification: { status: 'increased', rule_fired: 'global_cutoff', threshold_mm: 2.5 },
    });
    expect(banner(increased)).toBe('NT 2.07 mm — increased (global_cutoff)');
  });

  it('carries the service thickness through without arithmetic', () => {
    // adversarial floats survive the display round-trip bit for bit
    const values = [2.07, 2.0, 1 / 3, 2.0700000000000003, 0.1 + 0.2, 1e-9];
    for (const v of values) {
      const r = reportWith({});
      r.measurement!.thickness_mm = v;
      expect(bannerThickness(banner(r))).toBe(v);
    }
  });

  it('prompts for a new ROI when no region was found', () => {
    const r = reportWith({
      measurement: null,
      classification: null,
      findings: [{ code: 'no-translucency', detail: 'no dark band inside the ROI' }],
    });
    expect(banner(r)).toContain('no NT region found');
    expect(banner(r)).toContain('draw a new ROI');
  });

  it('explains missing calibration and missing weeks', () => {
    const uncalibrated = reportWith({
      measurement: null,
      classification: null,
      findings: [{ code: 'calibration-required', detail: 'mm_per_px not supplied' }],
    });
    expect(banner(uncalibrated)).toContain('set mm/px');

    const noWeeks = reportWith({
      classification: null,
      findings: [{ code: 'gestation-weeks-missing', detail: 'no gestational age' }],
    });
    expect(banner(noWeeks)).toBe('NT 2.07 mm — gestation weeks missing, not classified');
  });

  it('prompts to start when there is no report yet', () => {
    expect(banner(null)).toBe('draw a ROI and run');
    expect(bannerThickness(banner(null))).toBeNull();
  });
});

describe('sessionView', () => {
  const state: SessionState = {
    id: 'abc123',
    status: 'ran',
    width: 96,
    height: 96,
    roi: { x0: 16, y0: 16, w: 64, h: 64 },
    has_result: true,
  };

  it('copies result numbers into the summary unchanged', () => {
    const report = reportWith({});
    const view = sessionView(state, 'blob:frame', '/sessions/abc123/overlay.png', report);
    expect(view.summary).toEqual({
      thickness_mm: report.measurement!.thickness_mm,
      classification: 'normal',
      rule_fired: null,
    });
    expect(view.summary!.thickness_mm).toBe(report.measurement!.thickness_mm);
    expect(view.roi).toEqual(state.roi);
    expect(view.banner).toBe(banner(report));
  });

  it('has no summary before the first run', () => {
    const view = sessionView({ ...state, status: 'awaiting-roi', has_result: false }, 'blob:frame', null, null);
    expect(view.summary).toBeNull();
    expect(view.overlayUrl).toBeNull();
    expect(view.banner).toBe('draw a ROI and run');
  });
});
