/**
 * Badge rendering.
 *
 * Style guide: difficulty badges use a fixed six-band palette indexed by
 * the label's position in the scale, easiest (green) to hardest (dark
 * red). Labels outside the known scale fall back to the neutral band so
 * the badge text always comes straight from the API.
 */

import type { DifficultySummary } from "./api.js";

export const SCALE_LABELS = ["A1", "A2", "B1", "B2", "C1", "C2"];

export const LEVEL_BANDS = [
  "#2e7d32",
  "#558b2f",
  "#9e9d24",
  "#ef6c00",
  "#d84315",
  "#b71c1c",
];

export const NEUTRAL_BAND = "#616161";

export function bandFor(label: string): string {
  const index = SCALE_LABELS.indexOf(label);
  return index === -1 ? NEUTRAL_BAND : LEVEL_BANDS[index];
}

export function difficultyBadge(difficulty: DifficultySummary | null): HTMLSpanElement {
  const badge = document.createElement("span");
  badge.className = "badge difficulty";
  if (difficulty === null) {
    badge.textContent = "—";
    badge.style.background = NEUTRAL_BAND;
    return badge;
  }
  badge.textContent = difficulty.label;
  badge.dataset.label = difficulty.label;
  badge.style.background = bandFor(difficulty.label);
  return badge;
}

export function kindBadge(kind: string): HTMLSpanElement {
  const badge = document.createElement("span");
  badge.className = "badge kind";
  badge.textContent = kind;
  badge.dataset.kind = kind;
  return badge;
}
