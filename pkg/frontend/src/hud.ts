// HUD: vitals, unlocked achievements with their unlock times, running
// score. The model is computed from ClientState; painting is a dumb
// DOM write so the logic stays testable.

import type { ClientState, UnlockEntry } from "./client.js";
import type { Vitals } from "./protocol.js";

export interface HudModel {
  vitals: Vitals | null;
  score: number;
  unlocks: UnlockEntry[];
  fresh: string[]; // unlocked on the frame being shown: flash these
  remaining: number;
}

export function hudModel(state: ClientState): HudModel {
  const t = state.frame?.t ?? -1;
  return {
    vitals: state.frame?.vitals ?? null,
    score: state.finalScore ?? state.score,
    unlocks: state.unlocks,
    fresh: state.unlocks.filter((u) => u.t === t).map((u) => u.name),
    remaining: state.roster.length - state.unlocks.length,
  };
}

const VITAL_ICONS: Array<[keyof Vitals, string]> = [
  ["health", "♥"],
  ["food", "🍗"],
  ["drink", "💧"],
  ["energy", "⚡"],
];

export function renderHud(root: HTMLElement, model: HudModel): void {
  const vitals = model.vitals
    ? VITAL_ICONS.map(([k, icon]) => `${icon} ${model.vitals![k]}`).join("  ")
    : "";
  const rows = model.unlocks
    .map((u) => {
      const cls = model.fresh.includes(u.name) ? "unlock fresh" : "unlock";
      return `<li class="${cls}">${u.name} <span class="t">t=${u.t}</span></li>`;
    })
    .join("");
  root.innerHTML = `
    <div class="vitals">${vitals}</div>
    <div class="score">score ${model.score.toFixed(2)}</div>
    <ul class="unlocks">${rows}</ul>
    <div class="remaining">${model.remaining} locked</div>`;
}
