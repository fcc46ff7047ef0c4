// Session state and the single reducer every event goes through.
//
// Lockstep discipline lives here: tryAct refuses to emit a second act
// while one is unacknowledged, and only a fresh (non-resend) frame
// acknowledges. Socket callbacks and key handlers both funnel into
// these pure functions, so the invariant is testable without a DOM or
// a socket.

import type { ClientMsg, FrameMsg, ServerMsg } from "./protocol.js";

export type Status = "idle" | "connecting" | "live" | "done" | "error";

export interface UnlockEntry {
  name: string;
  t: number; // frame time of the first sighting, for HUD flashes
}

export interface ClientState {
  status: Status;
  session: string | null;
  actions: string[]; // the 17 action names announced by the server
  roster: string[]; // the 22 achievement names announced by the server
  frame: FrameMsg | null;
  unlocks: UnlockEntry[];
  score: number;
  finalScore: number | null;
  pending: boolean; // an act is in flight awaiting its frame
  error: string | null;
}

export function initialState(): ClientState {
  return {
    status: "idle",
    session: null,
    actions: [],
    roster: [],
    frame: null,
    unlocks: [],
    score: 0,
    finalScore: null,
    pending: false,
    error: null,
  };
}

function withUnlocks(state: ClientState, frame: FrameMsg): UnlockEntry[] {
  const known = new Set(state.unlocks.map((u) => u.name));
  const roster = new Set(state.roster);
  const next = state.unlocks.slice();
  for (const name of frame.unlocked) {
    // the HUD list stays a subset of the announced roster
    if (!known.has(name) && roster.has(name)) {
      next.push({ name, t: frame.t });
      known.add(name);
    }
  }
  return next;
}

export function reduce(state: ClientState, msg: ServerMsg): ClientState {
  switch (msg.kind) {
    case "hello":
      // also covers reattach: any act lost to the disconnect will never
      // be acknowledged, so pending resets with the session
      return {
        ...state,
        status: "live",
        session: msg.session,
        actions: msg.actions,
        roster: msg.achievements,
        unlocks: [],
        finalScore: null,
        pending: false,
        error: null,
      };
    case "frame": {
      const fresh = !msg.resend;
      return {
        ...state,
        status: msg.done ? "done" : state.status,
        frame: msg,
        unlocks: withUnlocks(state, msg),
        score: msg.score,
        pending: fresh ? false : state.pending,
      };
    }
    case "done":
      return { ...state, status: "done", finalScore: msg.score };
    case "error":
      // the session survives protocol errors; surface and carry on
      return { ...state, error: msg.detail, pending: false };
    case "stats":
      return { ...state, score: msg.score };
  }
}

export interface ActResult {
  state: ClientState;
  send: ClientMsg | null;
}

/** One keypress: emit at most one act, and only when none is in flight. */
export function tryAct(state: ClientState, name: string | null): ActResult {
  if (
    name === null ||
    state.status !== "live" ||
    state.pending ||
    !state.actions.includes(name)
  ) {
    return { state, send: null };
  }
  return { state: { ...state, pending: true }, send: { kind: "act", name } };
}

/** Hello payload for a fresh episode or a reattach after a drop. */
export function helloFor(
  state: ClientState,
  preset: string | null,
  resume: boolean,
): ClientMsg {
  if (resume && state.session) {
    return { kind: "hello", session: state.session };
  }
  return preset ? { kind: "hello", preset } : { kind: "hello" };
}
