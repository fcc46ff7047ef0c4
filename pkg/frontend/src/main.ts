// Entry point: wires the socket, keyboard and DOM together. All events
// dispatch through the reducer in client.ts; this file only performs
// the effects (send, draw, paint).

import {
  ClientState,
  helloFor,
  initialState,
  reduce,
  tryAct,
} from "./client.js";
import { hudModel, renderHud } from "./hud.js";
import { Bindings, keyToAction, loadBindings } from "./keys.js";
import { parseServerMsg } from "./protocol.js";
import { CanvasRenderer } from "./renderer.js";

const $ = (id: string) => document.getElementById(id)!;

let state: ClientState = initialState();
let ws: WebSocket | null = null;
let bindings: Bindings = {};
let renderer: CanvasRenderer;

function paint(): void {
  renderHud($("hud"), hudModel(state));
  $("banner").hidden = state.error === null && state.status !== "error";
  if (state.error) $("banner-text").textContent = state.error;
  if (state.status === "done" && state.finalScore !== null) {
    $("banner-text").textContent = `episode over, score ${state.finalScore.toFixed(2)}. start again?`;
    $("banner").hidden = false;
  }
  if (state.frame) renderer.draw(state.frame);
}

function dispatch(raw: string): void {
  const msg = parseServerMsg(raw);
  if (!msg) return;
  state = reduce(state, msg);
  paint();
}

function connect(resume: boolean): void {
  ws?.close();
  const preset = ($("preset") as HTMLSelectElement).value || null;
  state = resume ? state : { ...initialState(), status: "connecting" };
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  ws = new WebSocket(`${scheme}://${location.host}/ws`);
  ws.onopen = () => ws!.send(JSON.stringify(helloFor(state, preset, resume)));
  ws.onmessage = (ev) => dispatch(ev.data as string);
  ws.onclose = () => {
    if (state.status === "live") {
      state = { ...state, status: "error", error: "connection lost" };
      paint();
    }
  };
  ws.onerror = () => {
    state = { ...state, status: "error", error: "connection failed" };
    paint();
  };
  paint();
}

function onKey(ev: KeyboardEvent): void {
  if (ev.target instanceof HTMLSelectElement) return;
  const result = tryAct(state, keyToAction(bindings, ev.key));
  if (!result.send || !ws || ws.readyState !== WebSocket.OPEN) return;
  ev.preventDefault();
  state = result.state;
  ws.send(JSON.stringify(result.send));
}

async function fillPresets(): Promise<void> {
  const select = $("preset") as HTMLSelectElement;
  try {
    const res = await fetch("/presets");
    const names = (await res.json()) as {
      numbers: string[];
      scenarios: string[];
    };
    for (const group of [
      ["counts", names.numbers],
      ["scenarios", names.scenarios],
    ] as const) {
      const el = document.createElement("optgroup");
      el.label = group[0];
      for (const name of group[1]) {
        const opt = document.createElement("option");
        opt.value = name;
        opt.textContent = name;
        el.appendChild(opt);
      }
      select.appendChild(el);
    }
  } catch {
    // no preset list is fine: the default spec still plays
  }
}

async function boot(): Promise<void> {
  renderer = new CanvasRenderer($("screen") as HTMLCanvasElement);
  bindings = await loadBindings("keybindings.json");
  await fillPresets();
  $("start").addEventListener("click", () => connect(false));
  $("retry").addEventListener("click", () =>
    connect(state.session !== null && state.status !== "done"),
  );
  window.addEventListener("keydown", onKey);
  connect(false);
}

boot();
