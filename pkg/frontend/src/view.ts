// Pure view layer: service payload in, HTML strings out.
//
// Every number shown comes straight from the payload. The console never
// recomputes an inference quantity; the only arithmetic below is summing
// the served per-outcome terms into the displayed risk/ambiguity split and
// scaling chart coordinates.

import type {
  EfeScore,
  ObservationRecord,
  PendingDownlink,
  SessionState,
} from "./api.js";

export interface OptionRow {
  option: number;
  successProb: number;
  components: number;
  pending: boolean;
  efeTotal: number | null;
  risk: number | null;
  ambiguity: number | null;
}

export interface ViewModel {
  id: string;
  step: number;
  labelCount: number;
  options: OptionRow[];
  regret: number[];
  pending: PendingDownlink[];
  log: ObservationRecord[];
}

export function pendingOptions(pending: PendingDownlink[]): Set<number> {
  return new Set(pending.map((p) => p.option));
}

function efeByOption(scores: EfeScore[]): Map<number, EfeScore> {
  return new Map(scores.map((s) => [s.option, s]));
}

export function buildViewModel(state: SessionState): ViewModel {
  const pending = pendingOptions(state.pending);
  const scores = efeByOption(state.efe);
  const options = state.options.map((entry) => {
    const score = scores.get(entry.option);
    return {
      option: entry.option,
      successProb: entry.success_prob,
      components: entry.components,
      pending: pending.has(entry.option),
      efeTotal: score ? score.total : null,
      risk: score ? score.per_outcome.reduce((acc, t) => acc + t.term1, 0) : null,
      ambiguity: score
        ? score.per_outcome.reduce((acc, t) => acc - t.term2, 0)
        : null,
    };
  });
  return {
    id: state.id,
    step: state.step,
    labelCount: Number(state.config.f),
    options,
    regret: state.regret,
    pending: state.pending,
    log: state.observations,
  };
}

export function formatCredence(gamma1: number): string {
  return `your report was weighted ${gamma1.toFixed(2)} credible`;
}

function labelSelector(option: number, labelCount: number, enabled: boolean): string {
  const choices = Array.from(
    { length: labelCount },
    (_, i) => `<option value="${i + 1}">label ${i + 1}</option>`,
  ).join("");
  const disabled = enabled ? "" : " disabled";
  return (
    `<select data-option="${option}" class="label-pick"${disabled}>${choices}</select>` +
    `<button data-option="${option}" class="submit-label"${disabled}>submit</button>`
  );
}

export function renderOptionsTable(vm: ViewModel): string {
  const rows = vm.options
    .map((row) => {
      const pendingBadge = row.pending
        ? '<span class="pending-badge">awaiting label</span>'
        : "";
      return (
        `<tr data-option="${row.option}" class="${row.pending ? "pending" : ""}">` +
        `<td>site ${row.option} ${pendingBadge}</td>` +
        `<td class="num" title="${row.successProb}">${String(row.successProb)}</td>` +
        `<td class="num">${row.components}</td>` +
        `<td class="num">${row.efeTotal === null ? "-" : String(row.efeTotal)}</td>` +
        `<td class="num">${row.risk === null ? "-" : String(row.risk)}</td>` +
        `<td class="num">${row.ambiguity === null ? "-" : String(row.ambiguity)}</td>` +
        `<td>${labelSelector(row.option, vm.labelCount, row.pending)}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    "<table><thead><tr>" +
    "<th>option</th><th>p(preferred)</th><th>mixands</th>" +
    "<th>EFE</th><th>risk</th><th>ambiguity</th><th>report</th>" +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderRegretChart(
  series: number[],
  width = 560,
  height = 120,
): string {
  // raw series, no smoothing; exact values ride along for verification
  const payload = JSON.stringify(series);
  if (series.length === 0) {
    return `<svg class="regret-chart" data-values="[]" width="${width}" height="${height}"></svg>`;
  }
  const maxY = Math.max(...series, 1e-9);
  const stepX = series.length > 1 ? width / (series.length - 1) : 0;
  const points = series
    .map((value, i) => `${(i * stepX).toFixed(2)},${(height - (value / maxY) * height).toFixed(2)}`)
    .join(" ");
  return (
    `<svg class="regret-chart" data-values='${payload}' width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" preserveAspectRatio="none">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${points}"/>` +
    `</svg>`
  );
}

export function renderObservationLog(log: ObservationRecord[]): string {
  if (log.length === 0) {
    return '<p class="empty">no observations fused yet</p>';
  }
  const rows = log
    .slice()
    .reverse()
    .map((rec) => {
      const gamma =
        rec.gamma1 === null
          ? '<span class="trusted">trusted</span>'
          : `<span class="gamma" title="gamma0=${rec.gamma0}">&gamma;&#8321;=${String(rec.gamma1)}</span>`;
      return (
        `<tr><td>${rec.step}</td><td>site ${rec.option}</td>` +
        `<td>${rec.source}</td><td>label ${rec.label}</td><td>${gamma}</td></tr>`
      );
    })
    .join("");
  return (
    "<table><thead><tr><th>step</th><th>option</th><th>source</th>" +
    `<th>label</th><th>credence</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderPendingList(pending: PendingDownlink[]): string {
  if (pending.length === 0) {
    return '<p class="empty">no pending downlinks</p>';
  }
  const items = pending
    .map((p) => `<li>site ${p.option} (downlinked at step ${p.emitted_step})</li>`)
    .join("");
  return `<ul class="pending-list">${items}</ul>`;
}

export function renderError(error: { error: string; code: string }): string {
  // surfaced verbatim: the service's message is the source of truth
  return `<span class="error-code">[${error.code}]</span> ${error.error}`;
}

export function renderDashboard(vm: ViewModel): string {
  return (
    `<section class="status"><h2>session ${vm.id} &mdash; step ${vm.step}</h2></section>` +
    `<section class="options"><h3>sites</h3>${renderOptionsTable(vm)}</section>` +
    `<section class="pending"><h3>pending downlinks</h3>${renderPendingList(vm.pending)}</section>` +
    `<section class="regret"><h3>cumulative regret</h3>${renderRegretChart(vm.regret)}</section>` +
    `<section class="log"><h3>observation log</h3>${renderObservationLog(vm.log)}</section>`
  );
}
