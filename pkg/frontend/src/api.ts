// Thin typed client over the run service. The fetch implementation is
// injected so tests can drive the workbench against a stub server.

import type {
  Card,
  ClassifyResponse,
  Declaration,
  Framework,
  PeltSweepArtifact,
  RunManifest,
  SegmentsResponse,
  ThresholdSweepArtifact,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function readJson<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const message =
      typeof body === "object" && body !== null && "error" in body
        ? String((body as { error: unknown }).error)
        : `HTTP ${resp.status}`;
    throw new ApiError(resp.status, message);
  }
  return body as T;
}

export class RunClient {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  manifest(runId: string): Promise<RunManifest> {
    return this.fetchImpl(this.url(`/runs/${runId}`)).then((r) =>
      readJson<RunManifest>(r),
    );
  }

  classify(
    runId: string,
    thetaLow: number,
    thetaHigh: number,
    framework: Framework,
  ): Promise<ClassifyResponse> {
    const query =
      `theta_low=${encodeURIComponent(thetaLow)}` +
      `&theta_high=${encodeURIComponent(thetaHigh)}` +
      `&framework=${framework}`;
    return this.fetchImpl(this.url(`/runs/${runId}/classify?${query}`)).then(
      (r) => readJson<ClassifyResponse>(r),
    );
  }

  segments(runId: string, penalty: number): Promise<SegmentsResponse> {
    return this.fetchImpl(
      this.url(`/runs/${runId}/segments?penalty=${encodeURIComponent(penalty)}`),
    ).then((r) => readJson<SegmentsResponse>(r));
  }

  peltSweep(runId: string): Promise<PeltSweepArtifact> {
    return this.fetchImpl(
      this.url(`/runs/${runId}/artifacts/pelt_sweep`),
    ).then((r) => readJson<PeltSweepArtifact>(r));
  }

  thresholdSweep(runId: string): Promise<ThresholdSweepArtifact> {
    return this.fetchImpl(
      this.url(`/runs/${runId}/artifacts/sweeps/threshold`),
    ).then((r) => readJson<ThresholdSweepArtifact>(r));
  }

  card(runId: string): Promise<Card> {
    return this.fetchImpl(this.url(`/runs/${runId}/card`)).then((r) =>
      readJson<Card>(r),
    );
  }

  declarations(runId: string): Promise<Declaration[]> {
    return this.fetchImpl(this.url(`/runs/${runId}/declarations`)).then((r) =>
      readJson<Declaration[]>(r),
    );
  }

  declare(
    runId: string,
    body: {
      analyst: string;
      phase: string;
      rationale: string;
      parameters: Record<string, unknown>;
    },
  ): Promise<Declaration> {
    return this.fetchImpl(this.url(`/runs/${runId}/declarations`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => readJson<Declaration>(r));
  }
}
