/**
 * Pure HTML builders for the chat view. Keeping these as string
 * functions means every visual state is testable without a DOM.
 */

import type { DegreeName } from "./protocol.js";
import { DEGREE_NAMES } from "./protocol.js";
import type { DiagnosisState, TranscriptEntry, WatchState } from "./state.js";

export const DEGREE_LABELS: Record<DegreeName, string> = {
  non_ad: "no indication",
  mild: "mild",
  moderate: "moderate",
  severe: "severe",
};

const DEGREE_COLORS: Record<DegreeName, string> = {
  non_ad: "#2b8a3e",
  mild: "#e8b93e",
  moderate: "#e8733e",
  severe: "#d64545",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function transcriptHtml(entries: readonly TranscriptEntry[]): string {
  return entries
    .map((entry) => {
      const side = entry.who === "user" ? "user" : "robot";
      const tag =
        entry.responseType !== undefined
          ? `<span class="tag">${escapeHtml(entry.responseType)}</span>`
          : "";
      return `<div class="turn ${side}">${tag}<span class="text">${escapeHtml(entry.text)}</span></div>`;
    })
    .join("");
}

export function countdownHtml(remainingS: number | null, watch: WatchState | null): string {
  if (remainingS === null || watch === null) {
    return `<div class="countdown off">listening</div>`;
  }
  const label = watch.stage >= 2 ? "new topic in" : "follow-up in";
  return (
    `<div class="countdown stage-${watch.stage}">` +
    `${label} <b>${remainingS.toFixed(1)}s</b></div>`
  );
}

function barRow(label: string, probs: readonly number[]): string {
  const cells = probs
    .map((p, i) => {
      const pct = Math.round(p * 100);
      const color = DEGREE_COLORS[DEGREE_NAMES[i] as DegreeName];
      return (
        `<div class="cell"><div class="bar" ` +
        `style="width:${pct}%;background:${color}"></div>` +
        `<span class="pct">${pct}%</span></div>`
      );
    })
    .join("");
  return `<div class="row"><div class="label">${escapeHtml(label)}</div>${cells}</div>`;
}

/** One row of four degree bars per classifier, sorted by classifier name. */
export function classifierBarsHtml(
  perClassifier: Record<string, readonly number[]>,
): string {
  return Object.keys(perClassifier)
    .sort()
    .map((name) => barRow(name, perClassifier[name] as readonly number[]))
    .join("");
}

export function degreeBannerHtml(final: DegreeName, tieBroken: boolean): string {
  const note = tieBroken ? ` <span class="tie">(tie broken)</span>` : "";
  return (
    `<div class="banner" style="background:${DEGREE_COLORS[final]}">` +
    `${DEGREE_LABELS[final]}${note}</div>`
  );
}

/**
 * The verdict panel for the latest block. With showVerdict off the
 * panel renders as a neutral note, for sessions where the person being
 * screened should not see their own result.
 */
export function diagnosisPanelHtml(
  diagnosis: DiagnosisState | null,
  opts: { showVerdict: boolean },
): string {
  if (diagnosis === null) {
    return `<div class="pending">no completed block yet</div>`;
  }
  if (!opts.showVerdict) {
    return `<div class="pending">screening active (block ${diagnosis.blockIndex + 1} done)</div>`;
  }
  return (
    degreeBannerHtml(diagnosis.final, diagnosis.tieBroken) +
    `<div class="block">block ${diagnosis.blockIndex}</div>` +
    classifierBarsHtml(diagnosis.perClassifier)
  );
}
