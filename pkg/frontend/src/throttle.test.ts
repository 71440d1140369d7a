import { describe, expect, it } from "vitest";

import { DragThrottle, Pose } from "./throttle";

function drive(throttle: DragThrottle, poses: Array<[number, Pose]>, advance: (t: number) => void): Pose[] {
  const sent: Pose[] = [];
  for (const [t, pose] of poses) {
    advance(t);
    const out = throttle.submit(pose);
    if (out) sent.push(out);
    const flushed = throttle.flush();
    if (flushed) sent.push(flushed);
  }
  return sent;
}

describe("drag throttling", () => {
  it("a 1-second drag at 60 Hz emits at most 20 messages at the publish rate", () => {
    // oracle: throttle arithmetic, 20 frames per second publish rate
    let now = 0;
    const throttle = new DragThrottle(20, () => now);
    const poses: Array<[number, Pose]> = [];
    for (let i = 0; i < 60; i++) {
      poses.push([i / 60, { x: i * 0.5, y: 0 }]);
    }
    const sent = drive(throttle, poses, (t) => (now = t));
    expect(sent.length).toBeLessThanOrEqual(20);
    expect(sent.length).toBeGreaterThanOrEqual(15); // still responsive
  });

  it("dragging to the same position sends at most one message", () => {
    let now = 0;
    const throttle = new DragThrottle(20, () => now);
    const pose = { x: 4, y: 7 };
    const poses: Array<[number, Pose]> = [];
    for (let i = 0; i < 30; i++) poses.push([i / 10, { ...pose }]);
    const sent = drive(throttle, poses, (t) => (now = t));
    expect(sent.length).toBe(1);
  });

  it("no messages at all without movement", () => {
    let now = 0;
    const throttle = new DragThrottle(20, () => now);
    expect(throttle.flush()).toBeNull();
  });

  it("coalesces bursts, keeping the latest pose", () => {
    let now = 0;
    const throttle = new DragThrottle(10, () => now);
    expect(throttle.submit({ x: 0, y: 0 })).not.toBeNull();
    expect(throttle.submit({ x: 1, y: 0 })).toBeNull(); // window closed
    expect(throttle.submit({ x: 2, y: 0 })).toBeNull();
    now = 0.2;
    expect(throttle.flush()).toEqual({ x: 2, y: 0 });
  });

  it("rejects a non-positive rate", () => {
    expect(() => new DragThrottle(0, () => 0)).toThrow();
  });
});
