/**
 * Client-side frame state. The UI holds no simulation truth of its own:
 * everything renderable is a pure fold over the frames received from the
 * server, so reloading the page and replaying the same frames reproduces
 * the identical scene. Stale frames (older than what is shown) are dropped.
 */

import { decodeDepth, FrameMessage } from "./protocol";

export interface SceneState {
  t: number;
  phase: string;
  particleCount: number;
  maxSpeed: number;
  overtoppedVolume: number;
  maxDepth: number;
  wetCells: number;
  depth: Float32Array | null;
  particles: Array<[number, number, number, number]>;
  framesApplied: number;
  framesDropped: number;
}

export function emptyScene(): SceneState {
  return {
    t: -Infinity,
    phase: "Preparing",
    particleCount: 0,
    maxSpeed: 0,
    overtoppedVolume: 0,
    maxDepth: 0,
    wetCells: 0,
    depth: null,
    particles: [],
    framesApplied: 0,
    framesDropped: 0,
  };
}

export class FrameStore {
  state: SceneState = emptyScene();

  /** Apply a frame; returns false when dropped as stale or malformed. */
  apply(frame: FrameMessage, expectedCells?: number): boolean {
    if (frame.t <= this.state.t) {
      this.state.framesDropped++;
      return false;
    }
    const depth = decodeDepth(frame.depth_b64);
    const cells = frame.grid.n_rows * frame.grid.n_cols;
    if (depth.length !== cells || (expectedCells !== undefined && cells !== expectedCells)) {
      this.state.framesDropped++;
      return false;
    }
    let maxDepth = 0;
    let wet = 0;
    for (let i = 0; i < depth.length; i++) {
      const d = depth[i];
      if (d > 0) wet++;
      if (d > maxDepth) maxDepth = d;
    }
    this.state = {
      t: frame.t,
      phase: frame.phase,
      particleCount: frame.stats.particle_count,
      maxSpeed: frame.stats.max_speed,
      overtoppedVolume: frame.stats.overtopped_volume,
      maxDepth,
      wetCells: wet,
      depth,
      particles: frame.particles,
      framesApplied: this.state.framesApplied + 1,
      framesDropped: this.state.framesDropped,
    };
    return true;
  }

  /** Deterministic digest of the renderable state, for reload checks. */
  digest(): string {
    const s = this.state;
    let depthSum = 0;
    if (s.depth) for (let i = 0; i < s.depth.length; i++) depthSum += s.depth[i];
    const head = s.particles
      .slice(0, 8)
      .map((p) => p.map((v) => v.toFixed(3)).join(","))
      .join(";");
    return [
      s.t.toFixed(6),
      s.phase,
      s.particleCount,
      s.maxSpeed.toFixed(6),
      s.maxDepth.toFixed(6),
      s.wetCells,
      depthSum.toFixed(4),
      head,
    ].join("|");
  }
}

/** Fold a recorded frame log into a final scene, as a page load would. */
export function replayFrameLog(frames: FrameMessage[]): FrameStore {
  const store = new FrameStore();
  for (const f of frames) store.apply(f);
  return store;
}
