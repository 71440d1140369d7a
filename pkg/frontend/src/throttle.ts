/**
 * Outbound drag throttling: barrier moves may not exceed the server's frame
 * publish rate, and dragging in place must not resend the same pose.
 */

export interface Pose {
  x: number;
  y: number;
  yaw?: number;
}

export type Clock = () => number; // seconds

function samePose(a: Pose | null, b: Pose): boolean {
  return a !== null && a.x === b.x && a.y === b.y && (a.yaw ?? 0) === (b.yaw ?? 0);
}

export class DragThrottle {
  private readonly interval: number;
  private lastSent = -Infinity;
  private lastPose: Pose | null = null;
  private pending: Pose | null = null;

  constructor(private readonly ratePerSecond: number, private readonly clock: Clock) {
    if (ratePerSecond <= 0) throw new Error("rate must be positive");
    this.interval = 1.0 / ratePerSecond;
  }

  /**
   * Offer a pointer pose; returns the pose to send now, or null.
   * Duplicate poses are suppressed; poses arriving faster than the rate are
   * coalesced (the latest wins when the window reopens via flush()).
   */
  submit(pose: Pose): Pose | null {
    if (samePose(this.lastPose, pose)) {
      this.pending = null;
      return null;
    }
    const now = this.clock();
    if (now - this.lastSent >= this.interval) {
      this.lastSent = now;
      this.lastPose = pose;
      this.pending = null;
      return pose;
    }
    this.pending = pose;
    return null;
  }

  /** Emit the most recent coalesced pose once the window reopens. */
  flush(): Pose | null {
    if (this.pending === null) return null;
    const now = this.clock();
    if (now - this.lastSent < this.interval) return null;
    const pose = this.pending;
    if (samePose(this.lastPose, pose)) {
      this.pending = null;
      return null;
    }
    this.lastSent = now;
    this.lastPose = pose;
    this.pending = null;
    return pose;
  }
}
