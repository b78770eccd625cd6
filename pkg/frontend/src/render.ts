// HTML-string renderers. These are pure functions of server payloads:
// every label, percentage, and month string on screen is copied from a
// response field, never derived client-side.

import type { SessionState } from "./session.js";
import type {
  ClassifyResponse,
  Declaration,
  PeltSweepArtifact,
  SegmentsResponse,
  Card,
} from "./types.js";

export const PHASE_COLORS: Record<string, string> = {
  NoEvidencedOccurrence: "#d9d9d9",
  RareMitigated: "#74c476",
  RareOccurrence: "#fdd0a2",
  EndemicMitigated: "#6baed6",
  RapidExpansion: "#fb6a4a",
  EndemicUnmitigated: "#a50f15",
  DormantBaseline: "#bdbdbd",
  ActiveOutbreak: "#fb6a4a",
};

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Per-month phase strip; one cell per month, colored + labeled by the
 * server's segment-expanded labels. */
export function renderPhaseStrip(resp: ClassifyResponse): string {
  const cells = resp.segment_month_labels
    .map((label, i) => {
      const color = PHASE_COLORS[label] ?? "#ffffff";
      const month = resp.months[i] ?? "";
      return (
        `<span class="strip-cell" data-month="${esc(month)}" ` +
        `data-phase="${esc(label)}" style="background:${color}" ` +
        `title="${esc(month)}: ${esc(label)}"></span>`
      );
    })
    .join("");
  return `<div class="phase-strip" data-n="${resp.segment_month_labels.length}">${cells}</div>`;
}

export function renderDistributionBars(resp: ClassifyResponse): string {
  const rows = Object.entries(resp.segment_distribution)
    .map(([phase, row]) => {
      const color = PHASE_COLORS[phase] ?? "#cccccc";
      return (
        `<div class="dist-row" data-phase="${esc(phase)}">` +
        `<span class="dist-name">${esc(phase)}</span>` +
        `<span class="dist-bar" style="width:${row.pct.toFixed(1)}%;background:${color}"></span>` +
        `<span class="dist-pct">${row.months} mo (${row.pct.toFixed(1)}%)</span>` +
        `</div>`
      );
    })
    .join("");
  return `<div class="distribution">${rows}</div>`;
}

export function renderZoneBadge(state: SessionState): string {
  if (state.zone) {
    const [lo, hi] = state.zone;
    return (
      `<span class="zone-badge inside" data-zone="${lo},${hi}">` +
      `inside invariant zone (${lo.toFixed(2)}, ${hi.toFixed(2)})</span>`
    );
  }
  return `<span class="zone-badge outside">outside any invariant zone</span>`;
}

export function renderSegmentsOverlay(resp: SegmentsResponse): string {
  const lines = resp.changepoint_months
    .map((m) => `<div class="cp-line" data-month="${esc(m)}">${esc(m)}</div>`)
    .join("");
  const rows = resp.segments
    .map(
      (s) =>
        `<tr><td>${esc(s.start_month)} .. ${esc(s.end_month)}</td>` +
        `<td>${s.n_months}</td><td>${s.mean.toFixed(2)}</td>` +
        `<td>${s.within_slope.toFixed(3)}</td></tr>`,
    )
    .join("");
  return (
    `<div class="segments" data-penalty="${resp.penalty}">` +
    `<div class="cp-lines">${lines}</div>` +
    `<table class="segment-table"><thead><tr><th>period</th><th>months</th>` +
    `<th>mean</th><th>slope</th></tr></thead><tbody>${rows}</tbody></table></div>`
  );
}

export function renderPlateauTable(sweep: PeltSweepArtifact): string {
  const rows = sweep.plateaus
    .map(
      (p) =>
        `<tr data-segments="${p.n_segments}"><td>${p.n_segments}</td>` +
        `<td>${p.appearances}</td><td>[${p.rho_lo}, ${p.rho_hi}]</td></tr>`,
    )
    .join("");
  return (
    `<table class="plateau-table"><thead><tr><th>segments</th>` +
    `<th>appearances</th><th>penalty range</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderCard(card: Card, declarations: Declaration[]): string {
  const flags = card.data_quality_flags
    .map((f) => `<li>${esc(f)}</li>`)
    .join("");
  const decls = declarations
    .map(
      (d) =>
        `<li class="declaration" data-analyst="${esc(d.analyst)}">` +
        `<b>${esc(d.phase)}</b> by ${esc(d.analyst)} at ${esc(d.timestamp)}: ` +
        `${esc(d.rationale)}</li>`,
    )
    .join("");
  return (
    `<div class="card" data-domain="${esc(card.domain)}">` +
    `<h2>${esc(card.domain)} — as of ${esc(card.as_of)}</h2>` +
    `<p class="current">current: <b>${esc(card.current_phase.six)}</b> / ` +
    `<b>${esc(card.current_phase.three)}</b></p>` +
    `<p class="risk">risk ${card.risk.level_sigma.toFixed(2)} sigma, ` +
    `trend ${card.risk.trend_per_month.toFixed(3)}/mo (${esc(card.risk.signal)})</p>` +
    `<ul class="flags">${flags}</ul>` +
    `<h3>declarations</h3><ul class="declarations">${decls}</ul></div>`
  );
}

export function renderInlineError(state: SessionState): string {
  return state.inlineError
    ? `<div class="inline-error">${esc(state.inlineError)}</div>`
    : `<div class="inline-error empty"></div>`;
}
