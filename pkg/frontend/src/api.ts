// Typed client for the session service. Every call maps 1:1 onto an
// endpoint; no client-side state lives here.

export interface TiltDetail {
  chosen: string;
  candidates: [string, number][];
  filtered_out: [string, string[]][];
}

export interface TranscriptEntry {
  seq: number;
  kind: "platform" | "tilt" | "ended";
  text: string;
  fragment_id: string | null;
  prompt_used: string | null;
  tilt: TiltDetail | null;
  timestamp?: number;
}

export interface HealthResponse {
  status: string;
  version: string;
  plot_corpus_hash: string;
  trope_corpus_hash: string;
  model_fingerprint: string;
}

export interface CreateSessionResponse {
  session_id: string;
  entry: TranscriptEntry;
  seq: number;
  ended: boolean;
}

export interface AdvanceResponse {
  entry: TranscriptEntry;
  ended: boolean;
  seq: number;
}

export interface TranscriptResponse {
  session_id: string;
  ended: boolean;
  root: string;
  entries: TranscriptEntry[];
}

async function parseOrThrow<T>(res: Response, what: string): Promise<T> {
  if (!res.ok) {
    let detail = "";
    try {
      const body = await res.json();
      detail = body.detail ?? "";
    } catch {
      // non-JSON error body; the status line is all we have
    }
    throw new Error(`${what} failed: ${res.status} ${detail}`.trim());
  }
  return res.json() as Promise<T>;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  health(): Promise<HealthResponse> {
    return fetch(`${this.baseUrl}/api/health`)
      .then((r) => parseOrThrow<HealthResponse>(r, "health check"));
  }

  createSession(options: {
    seed?: number;
    root?: string;
    max_depth?: number;
  } = {}): Promise<CreateSessionResponse> {
    return fetch(`${this.baseUrl}/api/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(options),
    }).then((r) => parseOrThrow<CreateSessionResponse>(r, "create session"));
  }

  advance(
    sessionId: string,
    request: "platform" | "tilt",
    prompt?: string,
  ): Promise<AdvanceResponse> {
    return fetch(`${this.baseUrl}/api/sessions/${sessionId}/advance`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(prompt ? { request, prompt } : { request }),
    }).then((r) => parseOrThrow<AdvanceResponse>(r, `advance (${request})`));
  }

  transcript(sessionId: string): Promise<TranscriptResponse> {
    return fetch(`${this.baseUrl}/api/sessions/${sessionId}`)
      .then((r) => parseOrThrow<TranscriptResponse>(r, "fetch transcript"));
  }
}
