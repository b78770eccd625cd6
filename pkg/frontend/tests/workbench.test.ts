// End-to-end workbench behavior against the stubbed server: invariant-zone
// stability of the rendered strip, boundary crossing, and declaration
// persistence across a page reload.

import { describe, expect, it } from "vitest";

import { RunClient } from "../src/api.js";
import { renderCard, renderPhaseStrip, renderZoneBadge } from "../src/render.js";
import { WorkbenchSession } from "../src/session.js";
import { StubServer } from "./stub-server.js";

function makeSession(stub: StubServer) {
  const client = new RunClient("", stub.fetch);
  return new WorkbenchSession(
    client,
    stub.runId,
    { thetaLow: 0.14, thetaHigh: 0.54, penalty: 3.0, framework: "three" },
    { debounceMs: 0 },
  );
}

async function classifyAt(session: WorkbenchSession, thetaLow: number) {
  session.setThresholds(thetaLow, thetaLow + 0.4);
  // debounce 0: the request fires on the next macrotask
  await new Promise((resolve) => setTimeout(resolve, 1));
  while (session.state.pending > 0) {
    await new Promise((resolve) => setTimeout(resolve, 1));
  }
}

describe("invariant-zone exploration", () => {
  it("strip is unchanged across the zone and flips past its boundary", async () => {
    const stub = new StubServer();
    const session = makeSession(stub);
    const sweep = await session.thresholdSweep();
    const zone = sweep.invariant_zones.find(
      ([lo, hi]) => lo < 0.14 && 0.14 < hi,
    )!;
    expect(zone).toEqual([-0.7, 0.43]);

    // walk theta_low across the interior of the server-reported zone
    const [lo, hi] = zone;
    const interior = [0.25, 0.5, 0.75].map((f) => lo + f * (hi - lo));
    const strips: string[] = [];
    const badges: string[] = [];
    for (const theta of interior) {
      await classifyAt(session, theta);
      strips.push(renderPhaseStrip(session.state.classification!));
      badges.push(renderZoneBadge(session.state));
    }
    expect(new Set(strips).size).toBe(1); // rendered strip identical inside
    for (const badge of badges) {
      expect(badge).toContain("inside invariant zone");
    }

    // crossing the upper boundary changes the strip on the next response
    await classifyAt(session, hi + 0.05);
    const outside = renderPhaseStrip(session.state.classification!);
    expect(outside).not.toBe(strips[0]);
    // beyond the top segment mean everything reads dormant
    expect(outside).not.toContain("EndemicUnmitigated");
  });

  it("distribution matches the fixture's 60/43 structure inside the zone", async () => {
    const stub = new StubServer();
    const session = makeSession(stub);
    await classifyAt(session, 0.14);
    const dist = session.state.classification!.segment_distribution;
    expect(dist.DormantBaseline.months).toBe(60);
    expect(dist.EndemicUnmitigated.months).toBe(43);
    expect(dist.DormantBaseline.pct).toBeCloseTo(58.3, 1);
    expect(dist.EndemicUnmitigated.pct).toBeCloseTo(41.7, 1);
  });
});

describe("declaration persistence", () => {
  it("a posted declaration reappears after a page reload", async () => {
    const stub = new StubServer();
    const first = makeSession(stub);
    await first.load();
    first.updateDraft({
      analyst: "expert-1",
      phase: "EndemicUnmitigated",
      rationale: "43-month plateau with no recovery path",
    });
    const entry = await first.declarePhase();
    expect(entry).not.toBeNull();
    expect(renderCard(first.state.card!, first.state.declarations)).toContain(
      "43-month plateau",
    );

    // a reload constructs a brand-new client and session over the same server
    const reloaded = makeSession(stub);
    await reloaded.load();
    expect(reloaded.state.declarations).toHaveLength(1);
    expect(reloaded.state.declarations[0].analyst).toBe("expert-1");
    const html = renderCard(reloaded.state.card!, reloaded.state.declarations);
    expect(html).toContain("expert-1");
    expect(html).toContain("43-month plateau");
  });
});
