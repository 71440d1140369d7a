/**
 * Wire protocol spoken with the steering service.
 *
 * Envelopes are JSON text: `{v: 1, type, seq, ...payload}`. Every request is
 * answered by an `ack`, `analysis`, or `error` message echoing the seq;
 * frames arrive unsolicited while the session runs.
 */

export const PROTOCOL_VERSION = 1;

export type Phase = "Preparing" | "Running" | "Paused" | "Finished";

export interface Envelope {
  v: number;
  type: string;
  seq: number;
  [key: string]: unknown;
}

export interface BarrierSpec {
  id: string;
  center: [number, number] | [number, number, number];
  yaw?: number;
  height?: number;
  width?: number;
  thickness?: number;
  face_angle?: number;
  alpha?: number;
}

export interface FrameGrid {
  n_rows: number;
  n_cols: number;
  cell_size: number;
  origin: [number, number];
}

export interface FrameMessage {
  v: number;
  type: "frame";
  t: number;
  phase: Phase;
  particles: Array<[number, number, number, number]>; // x, y, z, speed
  boulders: Array<[number, number, number, number]>; // x, y, z, radius
  depth_b64: string; // little-endian float32, row-major
  grid: FrameGrid;
  stats: {
    particle_count: number;
    max_speed: number;
    overtopped_volume: number;
  };
}

export interface AckMessage {
  type: "ack";
  seq: number;
  phase?: Phase;
  granted?: boolean;
  [key: string]: unknown;
}

export interface ErrorMessage {
  type: "error";
  seq: number | null;
  code: string;
  detail?: string;
}

export interface AnalysisMessage {
  type: "analysis";
  seq: number;
  kind: string;
  [key: string]: unknown;
}

export type ServerMessage = FrameMessage | AckMessage | ErrorMessage | AnalysisMessage;

export function makeEnvelope(type: string, seq: number, payload: Record<string, unknown> = {}): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type, seq, ...payload });
}

export function isFrame(msg: ServerMessage): msg is FrameMessage {
  return msg.type === "frame";
}

/** Decode the row-major little-endian float32 depth raster. */
export function decodeDepth(b64: string): Float32Array {
  const raw = atob(b64);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  return new Float32Array(bytes.buffer);
}
