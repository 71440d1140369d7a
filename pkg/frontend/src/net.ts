/**
 * WebSocket client for the steering service. Commands get sequential seqs;
 * replies resolve pending promises by seq; frames go to the frame handler.
 */

import { makeEnvelope, ServerMessage, isFrame, FrameMessage } from "./protocol";

type Pending = {
  resolve: (msg: ServerMessage) => void;
  reject: (err: Error) => void;
};

export class SteeringClient {
  private ws: WebSocket | null = null;
  private seq = 0;
  private pending = new Map<number, Pending>();
  onFrame: (frame: FrameMessage) => void = () => {};
  onStatus: (connected: boolean) => void = () => {};

  constructor(private readonly url: string) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const ws = new WebSocket(this.url);
      this.ws = ws;
      ws.onopen = () => {
        this.onStatus(true);
        resolve();
      };
      ws.onerror = () => reject(new Error(`cannot reach ${this.url}`));
      ws.onclose = () => {
        this.onStatus(false);
        for (const p of this.pending.values()) p.reject(new Error("connection closed"));
        this.pending.clear();
      };
      ws.onmessage = (ev) => this.route(JSON.parse(ev.data as string));
    });
  }

  private route(msg: ServerMessage): void {
    if (isFrame(msg)) {
      this.onFrame(msg);
      return;
    }
    const seq = (msg as { seq: number | null }).seq;
    if (seq !== null && this.pending.has(seq)) {
      const p = this.pending.get(seq)!;
      this.pending.delete(seq);
      p.resolve(msg);
    }
  }

  send(type: string, payload: Record<string, unknown> = {}): Promise<ServerMessage> {
    const ws = this.ws;
    if (!ws || ws.readyState !== WebSocket.OPEN) {
      return Promise.reject(new Error("not connected"));
    }
    const seq = ++this.seq;
    return new Promise((resolve, reject) => {
      this.pending.set(seq, { resolve, reject });
      ws.send(makeEnvelope(type, seq, payload));
    });
  }

  async claimSteering(): Promise<boolean> {
    const msg = await this.send("steering_lock");
    return msg.type === "ack" && (msg as { granted?: boolean }).granted === true;
  }

  close(): void {
    this.ws?.close();
  }
}
