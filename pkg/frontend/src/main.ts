// Browser entry point: bind the session to the DOM. All analysis state
// flows through WorkbenchSession; this file only moves strings around.

import { RunClient } from "./api.js";
import {
  renderCard,
  renderDistributionBars,
  renderInlineError,
  renderPhaseStrip,
  renderPlateauTable,
  renderSegmentsOverlay,
  renderZoneBadge,
} from "./render.js";
import { WorkbenchSession } from "./session.js";
import type { Framework } from "./types.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "http://127.0.0.1:8765";
  const runId = params.get("run") ?? "";
  if (!runId) {
    byId("app").innerHTML =
      "<p>open as ?run=&lt;run_id&gt;&amp;api=http://host:port</p>";
    return;
  }

  const client = new RunClient(base, (url, init) => fetch(url, init));
  const manifest = await client.manifest(runId);
  const phases = await fetch(`${base}/runs/${runId}/artifacts/phases`).then(
    (r) => r.json(),
  );
  const th = phases.thresholds;
  const session = new WorkbenchSession(client, runId, {
    thetaLow: th.theta_low,
    thetaHigh: th.theta_high,
    penalty: 3.0,
    framework: "three",
  });

  byId<HTMLHeadingElement>("title").textContent =
    `${manifest.domain} — run ${runId}`;

  const lowSlider = byId<HTMLInputElement>("theta-low");
  const highSlider = byId<HTMLInputElement>("theta-high");
  const penaltySlider = byId<HTMLInputElement>("penalty");
  const frameworkSelect = byId<HTMLSelectElement>("framework");
  lowSlider.value = String(th.theta_low);
  highSlider.value = String(th.theta_high);

  session.onChange((state) => {
    byId("error").innerHTML = renderInlineError(state);
    byId("zone").innerHTML = renderZoneBadge(state);
    if (state.classification) {
      byId("strip").innerHTML = renderPhaseStrip(state.classification);
      byId("distribution").innerHTML = renderDistributionBars(
        state.classification,
      );
    }
    if (state.segments) {
      byId("segments").innerHTML = renderSegmentsOverlay(state.segments);
    }
    if (state.card) {
      byId("card").innerHTML = renderCard(state.card, state.declarations);
    }
    byId("pending").textContent = state.pending > 0 ? "…" : "";
  });

  lowSlider.addEventListener("input", () =>
    session.setThresholds(Number(lowSlider.value), Number(highSlider.value)),
  );
  highSlider.addEventListener("input", () =>
    session.setThresholds(Number(lowSlider.value), Number(highSlider.value)),
  );
  penaltySlider.addEventListener("input", () =>
    session.setPenalty(Number(penaltySlider.value)),
  );
  frameworkSelect.addEventListener("change", () =>
    session.setFramework(frameworkSelect.value as Framework),
  );

  byId<HTMLButtonElement>("declare").addEventListener("click", () => {
    session.updateDraft({
      analyst: byId<HTMLInputElement>("analyst").value,
      phase: byId<HTMLSelectElement>("declared-phase").value,
      rationale: byId<HTMLTextAreaElement>("rationale").value,
    });
    void session.declarePhase();
  });

  session.peltSweep().then((sweep) => {
    byId("plateaus").innerHTML = renderPlateauTable(sweep);
  });

  await session.load();
}

boot().catch((err) => {
  document.body.insertAdjacentHTML(
    "beforeend",
    `<pre class="boot-error">${String(err)}</pre>`,
  );
});
