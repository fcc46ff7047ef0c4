// Wire protocol types, version 1. Mirrors the server's JSON messages
// one to one; the client treats the server as the source of truth for
// action names and the achievement roster.

export const PROTOCOL_VERSION = 1;

export interface Vitals {
  health: number;
  food: number;
  drink: number;
  energy: number;
}

export interface HelloMsg {
  kind: "hello";
  protocol: number;
  session: string;
  mode: "human" | "spectate";
  actions: string[];
  achievements: string[];
  spec: Record<string, unknown>;
}

export interface FrameMsg {
  kind: "frame";
  t: number;
  pixels: string; // base64 of raw uint8 rgb bytes
  shape: [number, number, number];
  dtype: string;
  vitals: Vitals;
  unlocked: string[];
  reward: number;
  score: number;
  done: boolean;
  resend?: boolean;
}

export interface StatsMsg {
  kind: "stats";
  episodes: number;
  rates: Record<string, number>;
  score: number;
}

export interface DoneMsg {
  kind: "done";
  episode: { length: number; reward: number; unlocked: string[] };
  score: number;
}

export interface ErrorMsg {
  kind: "error";
  detail: string;
}

export type ServerMsg = HelloMsg | FrameMsg | StatsMsg | DoneMsg | ErrorMsg;

export type ClientMsg =
  | {
      kind: "hello";
      preset?: string;
      spec?: Record<string, unknown>;
      seed?: number;
      session?: string;
    }
  | { kind: "act"; name: string }
  | { kind: "stats" };

const KINDS = new Set(["hello", "frame", "stats", "done", "error"]);

/** Parse one socket payload; null for anything that is not a known message. */
export function parseServerMsg(raw: string): ServerMsg | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const kind = (data as { kind?: unknown }).kind;
  if (typeof kind !== "string" || !KINDS.has(kind)) return null;
  return data as ServerMsg;
}
