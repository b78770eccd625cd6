// Workbench session state machine.
//
// Two invariants hold by construction here:
//  - no phase label is ever computed client-side: the view holds whole
//    server responses and rendering reads labels straight out of them;
//  - slider moves are debounced and every response carries its request's
//    parameter echo; a response is applied only while its echo still
//    matches the current parameters, so a slow early response can never
//    overwrite the state for a newer slider position.

import { ApiError, RunClient } from "./api.js";
import type {
  Card,
  ClassifyResponse,
  Declaration,
  Framework,
  PeltSweepArtifact,
  SegmentsResponse,
  ThresholdSweepArtifact,
} from "./types.js";

export interface SessionParams {
  thetaLow: number;
  thetaHigh: number;
  penalty: number;
  framework: Framework;
}

export interface SessionState {
  params: SessionParams;
  classification: ClassifyResponse | null;
  segments: SegmentsResponse | null;
  card: Card | null;
  declarations: Declaration[];
  /** (lo, hi) when the current thetaLow sits inside a server-reported zone. */
  zone: [number, number] | null;
  inlineError: string | null;
  pending: number;
  draft: { analyst: string; phase: string; rationale: string };
}

export interface SessionOptions {
  debounceMs?: number;
  setTimeoutImpl?: typeof setTimeout;
  clearTimeoutImpl?: typeof clearTimeout;
}

const EPS = 1e-12;

function sameNumber(a: number, b: number): boolean {
  return Math.abs(a - b) <= EPS;
}

export class WorkbenchSession {
  readonly state: SessionState;
  private listeners: Array<(state: SessionState) => void> = [];
  private classifyTimer: ReturnType<typeof setTimeout> | null = null;
  private segmentsTimer: ReturnType<typeof setTimeout> | null = null;
  private readonly debounceMs: number;
  private readonly setT: typeof setTimeout;
  private readonly clearT: typeof clearTimeout;
  private sweepCache: { pelt?: PeltSweepArtifact; threshold?: ThresholdSweepArtifact } = {};

  constructor(
    private readonly client: RunClient,
    readonly runId: string,
    initial: SessionParams,
    options: SessionOptions = {},
  ) {
    this.debounceMs = options.debounceMs ?? 150;
    this.setT = options.setTimeoutImpl ?? setTimeout;
    this.clearT = options.clearTimeoutImpl ?? clearTimeout;
    this.state = {
      params: { ...initial },
      classification: null,
      segments: null,
      card: null,
      declarations: [],
      zone: null,
      inlineError: null,
      pending: 0,
      draft: { analyst: "", phase: "", rationale: "" },
    };
  }

  onChange(listener: (state: SessionState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** Initial load: classification + segments at current params, card, sweeps. */
  async load(): Promise<void> {
    await Promise.all([
      this.requestClassify(),
      this.requestSegments(),
      this.refreshCard(),
    ]);
  }

  // -- threshold exploration ------------------------------------------

  setThresholds(thetaLow: number, thetaHigh: number): void {
    if (!(thetaLow < thetaHigh)) {
      // inline validation only; no request leaves the client
      this.state.inlineError = "theta_low must stay below theta_high";
      this.emit();
      return;
    }
    this.state.inlineError = null;
    this.state.params.thetaLow = thetaLow;
    this.state.params.thetaHigh = thetaHigh;
    this.emit();
    if (this.classifyTimer !== null) this.clearT(this.classifyTimer);
    this.classifyTimer = this.setT(() => {
      this.classifyTimer = null;
      void this.requestClassify();
    }, this.debounceMs);
  }

  setFramework(framework: Framework): void {
    this.state.params.framework = framework;
    this.emit();
    void this.requestClassify();
  }

  async requestClassify(): Promise<void> {
    const { thetaLow, thetaHigh, framework } = this.state.params;
    this.state.pending += 1;
    this.emit();
    try {
      const resp = await this.client.classify(
        this.runId,
        thetaLow,
        thetaHigh,
        framework,
      );
      // apply only if the echoed parameters still match the sliders
      const current = this.state.params;
      if (
        sameNumber(resp.theta_low, current.thetaLow) &&
        sameNumber(resp.theta_high, current.thetaHigh) &&
        resp.framework === current.framework
      ) {
        this.state.classification = resp;
        this.state.zone = resp.invariant_zone;
        this.state.inlineError = null;
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.state.inlineError = err.message;
      } else {
        this.state.inlineError = `request failed: ${String(err)}`;
      }
    } finally {
      this.state.pending -= 1;
      this.emit();
    }
  }

  // -- penalty exploration --------------------------------------------

  setPenalty(penalty: number): void {
    if (!(penalty > 0)) {
      this.state.inlineError = "penalty must be positive";
      this.emit();
      return;
    }
    this.state.inlineError = null;
    this.state.params.penalty = penalty;
    this.emit();
    if (this.segmentsTimer !== null) this.clearT(this.segmentsTimer);
    this.segmentsTimer = this.setT(() => {
      this.segmentsTimer = null;
      void this.requestSegments();
    }, this.debounceMs);
  }

  async requestSegments(): Promise<void> {
    const { penalty } = this.state.params;
    this.state.pending += 1;
    this.emit();
    try {
      const resp = await this.client.segments(this.runId, penalty);
      if (sameNumber(resp.penalty, this.state.params.penalty)) {
        this.state.segments = resp;
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.state.inlineError = err.message;
      }
    } finally {
      this.state.pending -= 1;
      this.emit();
    }
  }

  // -- cached sweep artifacts -----------------------------------------

  async peltSweep(): Promise<PeltSweepArtifact> {
    this.sweepCache.pelt ??= await this.client.peltSweep(this.runId);
    return this.sweepCache.pelt;
  }

  async thresholdSweep(): Promise<ThresholdSweepArtifact> {
    this.sweepCache.threshold ??= await this.client.thresholdSweep(this.runId);
    return this.sweepCache.threshold;
  }

  // -- declarations -----------------------------------------------------

  updateDraft(patch: Partial<SessionState["draft"]>): void {
    Object.assign(this.state.draft, patch);
    this.emit();
  }

  async declarePhase(): Promise<Declaration | null> {
    const { analyst, phase, rationale } = this.state.draft;
    if (!rationale.trim()) {
      this.state.inlineError = "a declaration needs a rationale";
      this.emit();
      return null;
    }
    if (!analyst.trim() || !phase.trim()) {
      this.state.inlineError = "analyst and phase are required";
      this.emit();
      return null;
    }
    const { thetaLow, thetaHigh, penalty, framework } = this.state.params;
    try {
      const entry = await this.client.declare(this.runId, {
        analyst,
        phase,
        rationale,
        parameters: {
          theta_low: thetaLow,
          theta_high: thetaHigh,
          penalty,
          framework,
        },
      });
      this.state.draft = { analyst: "", phase: "", rationale: "" };
      this.state.inlineError = null;
      await this.refreshCard();
      return entry;
    } catch (err) {
      this.state.inlineError =
        err instanceof ApiError ? err.message : `declaration failed: ${String(err)}`;
      this.emit();
      return null;
    }
  }

  async refreshCard(): Promise<void> {
    const [card, declarations] = await Promise.all([
      this.client.card(this.runId),
      this.client.declarations(this.runId),
    ]);
    this.state.card = card;
    this.state.declarations = declarations;
    this.emit();
  }
}
