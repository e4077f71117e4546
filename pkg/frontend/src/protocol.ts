/**
 * Teleoperation wire protocol client. Transport-agnostic: the session logic
 * is driven through a small Transport interface so tests can inject a mock
 * and the browser build wraps a WebSocket.
 *
 * The client renders only server-confirmed state; it never predicts.
 */

export const OBS_DIM = 20;
export const ACT_DIM = 8;

export interface HelloFrame {
  type: "hello";
  obs_dim: number;
  act_dim: number;
  tick_hz: number;
}

export interface StateFrame {
  type: "state";
  t: number;
  obs: number[];
  reward: number;
  event: string;
  done: boolean;
}

export interface SavedFrame {
  type: "saved";
  path: string;
}

export type ServerFrame =
  | HelloFrame
  | StateFrame
  | SavedFrame
  | { type: "busy" }
  | { type: "error"; msg: string };

export interface Transport {
  send(text: string): void;
  close(): void;
}

export type ConnectionState =
  | "connecting"
  | "live"
  | "busy"
  | "refused"
  | "closed";

export interface SessionModel {
  connection: ConnectionState;
  tickHz: number;
  lastState: StateFrame | null;
  cumulativeReward: number;
  episodeDone: boolean;
  savedPaths: string[];
  errors: string[];
  refuseReason: string | null;
}

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

export class TeleopClient {
  readonly model: SessionModel = {
    connection: "connecting",
    tickHz: 20,
    lastState: null,
    cumulativeReward: 0,
    episodeDone: false,
    savedPaths: [],
    errors: [],
    refuseReason: null,
  };

  private listeners: Array<(m: SessionModel) => void> = [];

  constructor(private transport: Transport) {}

  onChange(fn: (m: SessionModel) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.model);
  }

  /** Handle one raw server message. Unknown frame types are surfaced as
   * errors; unknown fields inside known frames are ignored. */
  handleMessage(raw: string): void {
    let frame: ServerFrame;
    try {
      frame = JSON.parse(raw) as ServerFrame;
    } catch {
      this.model.errors.push("unparseable server frame");
      this.emit();
      return;
    }
    switch (frame.type) {
      case "hello": {
        if (frame.obs_dim !== OBS_DIM || frame.act_dim !== ACT_DIM) {
          this.model.connection = "refused";
          this.model.refuseReason =
            `server speaks ${frame.obs_dim}/${frame.act_dim}, ` +
            `this panel needs ${OBS_DIM}/${ACT_DIM}`;
          this.transport.close();
          break;
        }
        this.model.connection = "live";
        this.model.tickHz = frame.tick_hz;
        break;
      }
      case "busy": {
        this.model.connection = "busy";
        this.transport.close();
        break;
      }
      case "state": {
        if (!Array.isArray(frame.obs) || frame.obs.length !== OBS_DIM) {
          this.model.errors.push("state frame with bad observation arity");
          break;
        }
        const last = this.model.lastState;
        // drop stale frames, but accept t=0 (a new episode after reset)
        if (last !== null && frame.t !== 0 && frame.t <= last.t) break;
        if (frame.t === 0) this.model.cumulativeReward = 0;
        this.model.lastState = frame;
        this.model.cumulativeReward += frame.reward;
        this.model.episodeDone = frame.done;
        break;
      }
      case "saved": {
        this.model.savedPaths.push(frame.path);
        break;
      }
      case "error": {
        this.model.errors.push(frame.msg);
        break;
      }
      default: {
        this.model.errors.push(
          `unknown frame type ${(frame as { type?: string }).type}`,
        );
      }
    }
    this.emit();
  }

  handleClose(): void {
    if (this.model.connection === "live" ||
        this.model.connection === "connecting") {
      this.model.connection = "closed";
    }
    this.emit();
  }

  /** Send one action frame, components clamped to [-1, 1]. No-op unless the
   * session is live and the episode is running. */
  sendAction(action: number[]): void {
    if (this.model.connection !== "live" || this.model.episodeDone) return;
    const a = action.slice(0, ACT_DIM).map((x) => clamp(x, -1, 1));
    while (a.length < ACT_DIM) a.push(0);
    this.transport.send(JSON.stringify({ type: "action", a }));
  }

  sendReset(seed: number): void {
    if (this.model.connection !== "live") return;
    this.model.episodeDone = false;
    this.transport.send(JSON.stringify({ type: "reset", seed }));
  }

  sendQuit(): void {
    this.transport.send(JSON.stringify({ type: "quit" }));
    this.transport.close();
  }
}
