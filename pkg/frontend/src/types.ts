// Wire types for the phasekit run service. Months are "YYYY-MM" strings
// and every payload is plain JSON.

export type Framework = "six" | "three";

export interface DistributionRow {
  months: number;
  pct: number;
}

/** GET /runs/{id}/classify — carries the request's parameter echo. */
export interface ClassifyResponse {
  run_id: string;
  theta_low: number;
  theta_high: number;
  framework: Framework;
  months: string[];
  labels: string[];
  distribution: Record<string, DistributionRow>;
  segment_phases: string[];
  segment_month_labels: string[];
  segment_distribution: Record<string, DistributionRow>;
  invariant_zone: [number, number] | null;
}

export interface SegmentRow {
  start: number;
  end: number;
  n_months: number;
  start_month: string;
  end_month: string;
  mean: number;
  within_slope: number;
  mean_count: number | null;
}

/** GET /runs/{id}/segments — echoes the requested penalty. */
export interface SegmentsResponse {
  penalty: number;
  changepoints: number[];
  changepoint_months: string[];
  total_cost: number;
  segments: SegmentRow[];
}

export interface PlateauRow {
  n_segments: number;
  appearances: number;
  rho_lo: number;
  rho_hi: number;
}

export interface PeltSweepArtifact {
  grid: number[];
  segment_counts: number[];
  plateaus: PlateauRow[];
  selected_penalty: number;
  penalty_source: string;
}

export interface ThresholdSweepArtifact {
  axis: string;
  grid: number[];
  invariant_zones: [number, number][];
  outcomes: { theta_low: number; dormant_pct: number; endemic_pct: number }[];
}

export interface Declaration {
  analyst: string;
  domain: string;
  phase: string;
  parameters: Record<string, unknown>;
  rationale: string;
  timestamp: string;
}

export interface Card {
  domain: string;
  as_of: string;
  current_phase: { six: string; three: string };
  risk: { level_sigma: number; trend_per_month: number; signal: string };
  phase_distribution: {
    six: Record<string, DistributionRow>;
    three: Record<string, DistributionRow>;
  };
  data_quality_flags: string[];
  declarations: Declaration[];
}

export interface RunManifest {
  run_id: string;
  domain: string;
  status: string;
  artifacts: Record<string, { path: string; sha256: string }>;
}

export interface ApiErrorBody {
  error: string;
}
