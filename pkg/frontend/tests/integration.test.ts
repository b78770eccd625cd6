// Live integration against a real run service. Skipped unless
// PHASEKIT_API and PHASEKIT_RUN point at a server and a sealed run:
//
//   PHASEKIT_API=http://127.0.0.1:8765 PHASEKIT_RUN=<run_id> vitest run

import { describe, expect, it } from "vitest";

import { RunClient } from "../src/api.js";
import { renderPhaseStrip } from "../src/render.js";
import { WorkbenchSession } from "../src/session.js";

const API = process.env.PHASEKIT_API;
const RUN = process.env.PHASEKIT_RUN;

describe.skipIf(!API || !RUN)("live service integration", () => {
  function makeSession() {
    const client = new RunClient(API!, (url, init) => fetch(url, init));
    return new WorkbenchSession(
      client,
      RUN!,
      { thetaLow: 0.1, thetaHigh: 0.6, penalty: 3.0, framework: "three" },
      { debounceMs: 0 },
    );
  }

  async function classifyAt(session: WorkbenchSession, thetaLow: number) {
    session.setThresholds(thetaLow, thetaLow + 0.5);
    await new Promise((resolve) => setTimeout(resolve, 5));
    while (session.state.pending > 0) {
      await new Promise((resolve) => setTimeout(resolve, 5));
    }
  }

  it("strip stable inside the server's widest zone, flips past it", async () => {
    const session = makeSession();
    const sweep = await session.thresholdSweep();
    const zone = sweep.invariant_zones.reduce((a, b) =>
      b[1] - b[0] > a[1] - a[0] ? b : a,
    );
    const [lo, hi] = zone;
    const strips: string[] = [];
    for (const f of [0.2, 0.5, 0.8]) {
      await classifyAt(session, lo + f * (hi - lo));
      expect(session.state.zone).toEqual([lo, hi]);
      strips.push(renderPhaseStrip(session.state.classification!));
    }
    expect(new Set(strips).size).toBe(1);

    await classifyAt(session, hi + 0.02);
    expect(renderPhaseStrip(session.state.classification!)).not.toBe(strips[0]);
  });

  it("declarations persist across a reload", async () => {
    const first = makeSession();
    await first.load();
    const marker = `integration-${Date.now()}`;
    first.updateDraft({
      analyst: "integration-test",
      phase: "EndemicUnmitigated",
      rationale: marker,
    });
    const entry = await first.declarePhase();
    expect(entry).not.toBeNull();

    const reloaded = makeSession();
    await reloaded.load();
    expect(
      reloaded.state.declarations.some((d) => d.rationale === marker),
    ).toBe(true);
  });
});
