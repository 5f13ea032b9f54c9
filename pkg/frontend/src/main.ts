// DOM glue: polling loop, session controls, and label submission.

import { ApiError, SessionClient } from "./api.js";
import { buildViewModel, formatCredence, renderDashboard, renderError } from "./view.js";

const POLL_INTERVAL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

let client = new SessionClient("http://localhost:8000");
let sessionId: string | null = null;
let mutationInFlight = false; // at most one mutation per session at a time

function setBanner(kind: "info" | "error", html: string) {
  const banner = el<HTMLDivElement>("banner");
  banner.className = kind;
  banner.innerHTML = html;
}

async function refresh() {
  if (!sessionId) return;
  try {
    const state = await client.getState(sessionId);
    el<HTMLDivElement>("dashboard").innerHTML = renderDashboard(buildViewModel(state));
  } catch (err) {
    if (err instanceof ApiError) setBanner("error", renderError(err.body));
    else setBanner("error", `service unreachable: ${String(err)}`);
  }
}

async function mutate(action: () => Promise<void>) {
  if (mutationInFlight) return;
  mutationInFlight = true;
  try {
    await action();
    await refresh();
  } catch (err) {
    if (err instanceof ApiError) setBanner("error", renderError(err.body));
    else setBanner("error", String(err));
  } finally {
    mutationInFlight = false;
  }
}

function wireControls() {
  el<HTMLButtonElement>("connect").addEventListener("click", () => {
    client = new SessionClient(el<HTMLInputElement>("service-url").value.replace(/\/$/, ""));
    const existing = el<HTMLInputElement>("session-id").value.trim();
    if (existing) {
      sessionId = existing;
      setBanner("info", `watching session ${sessionId}`);
      void refresh();
    }
  });

  el<HTMLButtonElement>("create").addEventListener("click", () =>
    mutate(async () => {
      const fpRate = Number(el<HTMLInputElement>("fp-rate").value);
      const reply = await client.createSession({ fp_rate: fpRate });
      sessionId = reply.id;
      el<HTMLInputElement>("session-id").value = reply.id;
      setBanner("info", `created session ${reply.id}`);
    }),
  );

  el<HTMLButtonElement>("advance").addEventListener("click", () =>
    mutate(async () => {
      if (!sessionId) throw new Error("no session");
      const steps = Number(el<HTMLInputElement>("advance-steps").value) || 1;
      await client.advance(sessionId, steps);
      setBanner("info", `advanced ${steps} step(s)`);
    }),
  );

  // submission buttons are re-rendered each poll; delegate from the root
  el<HTMLDivElement>("dashboard").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (!target.classList.contains("submit-label") || target.hasAttribute("disabled")) {
      return;
    }
    const option = Number(target.getAttribute("data-option"));
    const select = document.querySelector<HTMLSelectElement>(
      `select.label-pick[data-option="${option}"]`,
    );
    const label = Number(select?.value ?? 1);
    void mutate(async () => {
      if (!sessionId) throw new Error("no session");
      const reply = await client.submitObservation(sessionId, option, label);
      setBanner(
        "info",
        `site ${option}, label ${label}: ${formatCredence(reply.gamma1)} ` +
          `<span class="gamma-exact">(&gamma;&#8321;=${String(reply.gamma1)})</span>`,
      );
    });
  });
}

window.addEventListener("DOMContentLoaded", () => {
  wireControls();
  setBanner("info", "connect to a service and create or watch a session");
  window.setInterval(() => void refresh(), POLL_INTERVAL_MS);
});
