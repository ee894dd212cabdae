// Console controller. The server transcript is the single source of
// truth: after every action the full entry list is re-fetched, so the
// view can never drift from what GET /api/sessions/{id} reports.

import { ApiClient, TranscriptEntry } from "./api.js";

export interface ConsoleState {
  sessionId: string | null;
  ended: boolean;
  root: string | null;
  entries: TranscriptEntry[];
  pending: boolean;
  error: string | null;
}

export function initialState(): ConsoleState {
  return {
    sessionId: null,
    ended: false,
    root: null,
    entries: [],
    pending: false,
    error: null,
  };
}

export type Listener = (state: ConsoleState) => void;

export class ConsoleController {
  private state: ConsoleState = initialState();
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  getState(): ConsoleState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  private update(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private async refresh(sessionId: string): Promise<void> {
    const transcript = await this.api.transcript(sessionId);
    this.update({
      sessionId: transcript.session_id,
      ended: transcript.ended,
      root: transcript.root,
      entries: transcript.entries,
    });
  }

  async start(options: { seed?: number; root?: string; max_depth?: number } = {}): Promise<void> {
    this.update({ pending: true, error: null });
    try {
      const created = await this.api.createSession(options);
      await this.refresh(created.session_id);
    } catch (err) {
      this.update({ error: String(err) });
    } finally {
      this.update({ pending: false });
    }
  }

  async requestPlatform(prompt?: string): Promise<void> {
    await this.advance("platform", prompt);
  }

  async requestTilt(prompt?: string): Promise<void> {
    await this.advance("tilt", prompt);
  }

  private async advance(kind: "platform" | "tilt", prompt?: string): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId) {
      this.update({ error: "no session yet" });
      return;
    }
    this.update({ pending: true, error: null });
    try {
      await this.api.advance(sessionId, kind, prompt);
      await this.refresh(sessionId);
    } catch (err) {
      // errors (story ended, bad prompt) leave the transcript as-is
      this.update({ error: String(err) });
    } finally {
      this.update({ pending: false });
    }
  }
}
