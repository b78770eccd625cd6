// The renderers must surface server labels verbatim. The sharpest check:
// hand them deliberately "wrong" labels for the parameters and confirm
// they display them anyway — any client-side classification would leak.

import { describe, expect, it } from "vitest";

import {
  renderDistributionBars,
  renderPhaseStrip,
  renderPlateauTable,
  renderSegmentsOverlay,
} from "../src/render.js";
import type { ClassifyResponse, SegmentsResponse } from "../src/types.js";

function fakeClassify(labels: string[]): ClassifyResponse {
  const months = labels.map((_, i) => `2020-${String((i % 12) + 1).padStart(2, "0")}`);
  const dist: ClassifyResponse["segment_distribution"] = {};
  for (const label of labels) {
    dist[label] ??= { months: 0, pct: 0 };
    dist[label].months += 1;
  }
  for (const row of Object.values(dist)) row.pct = (100 * row.months) / labels.length;
  return {
    run_id: "r",
    theta_low: 99.0, // absurd thresholds on purpose
    theta_high: 100.0,
    framework: "three",
    months,
    labels,
    distribution: dist,
    segment_phases: [...new Set(labels)],
    segment_month_labels: labels,
    segment_distribution: dist,
    invariant_zone: null,
  };
}

describe("renderPhaseStrip", () => {
  it("displays exactly the server's labels, one cell per month", () => {
    const labels = ["DormantBaseline", "DormantBaseline", "EndemicUnmitigated"];
    const html = renderPhaseStrip(fakeClassify(labels));
    expect(html.match(/strip-cell/g)).toHaveLength(3);
    expect(html.match(/data-phase="DormantBaseline"/g)).toHaveLength(2);
    expect(html.match(/data-phase="EndemicUnmitigated"/g)).toHaveLength(1);
  });

  it("renders server labels verbatim even when they contradict thresholds", () => {
    // thresholds say 99..100 sigma, yet the server labeled months Endemic:
    // the strip must show Endemic, proving no client-side rule runs
    const html = renderPhaseStrip(fakeClassify(["EndemicUnmitigated"]));
    expect(html).toContain("EndemicUnmitigated");
    expect(html).not.toContain("DormantBaseline");
  });

  it("escapes hostile label text", () => {
    const html = renderPhaseStrip(fakeClassify(['<img src="x">']));
    expect(html).not.toContain("<img");
  });
});

describe("renderDistributionBars", () => {
  it("uses response months and percentages verbatim", () => {
    const html = renderDistributionBars(
      fakeClassify(["DormantBaseline", "DormantBaseline", "EndemicUnmitigated", "EndemicUnmitigated"]),
    );
    expect(html).toContain("2 mo (50.0%)");
    expect(html.match(/dist-row/g)).toHaveLength(2);
  });
});

describe("renderSegmentsOverlay", () => {
  it("draws one changepoint line per server changepoint", () => {
    const resp: SegmentsResponse = {
      penalty: 3,
      changepoints: [60],
      changepoint_months: ["2022-03"],
      total_cost: 1,
      segments: [
        { start: 0, end: 60, n_months: 60, start_month: "2017-03",
          end_month: "2022-02", mean: -0.7, within_slope: 0.01, mean_count: 0.2 },
        { start: 60, end: 103, n_months: 43, start_month: "2022-03",
          end_month: "2025-09", mean: 0.43, within_slope: -0.009, mean_count: 6.5 },
      ],
    };
    const html = renderSegmentsOverlay(resp);
    expect(html.match(/class="cp-line"/g)).toHaveLength(1);
    expect(html).toContain("2022-03");
    expect(html).toContain("0.43");
  });
});

describe("renderPlateauTable", () => {
  it("lists every plateau row", () => {
    const html = renderPlateauTable({
      grid: [1, 2, 3],
      segment_counts: [3, 3, 2],
      plateaus: [
        { n_segments: 3, appearances: 2, rho_lo: 1, rho_hi: 2 },
        { n_segments: 2, appearances: 1, rho_lo: 3, rho_hi: 3 },
      ],
      selected_penalty: 1.5,
      penalty_source: "plateau-stability",
    });
    expect(html.match(/<tr data-segments=/g)).toHaveLength(2);
  });
});
