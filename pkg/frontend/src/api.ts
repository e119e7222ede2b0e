// Typed client for the operator gateway. The console never computes any
// medical value itself: everything it displays comes back from these calls.

export interface HistoryEntry {
  record_id: string;
  kind: string;
  taken_at: string;
  payload: Record<string, unknown>;
}

export interface WeightFlag {
  rule: string;
  severity: number;
  evidence: string[];
}

export interface PatientView {
  patient_id: string;
  name: string;
  region: string;
  created_at: string;
  history: HistoryEntry[];
  weight_flag: WeightFlag | null;
}

export interface RegionAlert {
  region: string;
  eligible: number;
  flagged: number;
  fraction: number;
  flagged_patients: string[];
}

export interface PatientsView {
  patients: PatientView[];
  region_alerts: RegionAlert[];
}

export type Phase = "idle" | "running" | "awaiting-response" | "done" | "error";

export interface ResultView {
  phase: Phase;
  test?: string;
  patient?: string;
  record_id?: string;
  result?: Record<string, unknown>;
  suggestions?: string[];
  error?: string;
}

export interface HearingPrompt {
  freq_hz: number;
  level_db: number;
  finished?: boolean;
}

export interface PotReading {
  code: number;
  distance_m: number;
  power_d: number;
}

export type StreamEvent = Record<string, unknown>;

export class GatewayError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function asJson(resp: Response): Promise<unknown> {
  const text = await resp.text();
  let body: unknown = {};
  try {
    body = JSON.parse(text);
  } catch {
    // non-JSON error bodies still surface via status below
  }
  if (!resp.ok) {
    const detail = (body as { error?: string }).error ?? resp.statusText;
    throw new GatewayError(resp.status, detail);
  }
  return body;
}

export class GatewayClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async get(path: string): Promise<unknown> {
    return asJson(await fetch(this.url(path)));
  }

  private async post(path: string, body: unknown): Promise<unknown> {
    return asJson(
      await fetch(this.url(path), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body ?? {}),
      }),
    );
  }

  patients(): Promise<PatientsView> {
    return this.get("/patients") as Promise<PatientsView>;
  }

  start(patient: string, test: string, params?: Record<string, unknown>): Promise<ResultView> {
    return this.post("/session/start", { patient, test, params }) as Promise<ResultView>;
  }

  hearingEvent(heard: boolean): Promise<HearingPrompt | ResultView> {
    return this.post("/session/hearing/event", { heard }) as Promise<HearingPrompt | ResultView>;
  }

  movePot(code: number): Promise<PotReading> {
    return this.post("/session/pot", { code }) as Promise<PotReading>;
  }

  stop(): Promise<ResultView> {
    return this.post("/session/stop", {}) as Promise<ResultView>;
  }

  result(): Promise<ResultView> {
    return this.get("/session/result") as Promise<ResultView>;
  }

  /** Read the one-way session event stream until it ends. Resolves on the
   * server's end marker; rejects on transport failure so the caller can
   * reconnect. */
  async readStream(onEvent: (ev: StreamEvent) => void, signal?: AbortSignal): Promise<void> {
    const resp = await fetch(this.url("/session/stream"), {
      signal,
      headers: { Accept: "text/event-stream" },
    });
    if (!resp.ok || !resp.body) {
      throw new GatewayError(resp.status, "stream unavailable");
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      buffer += decoder.decode(value, { stream: true });
      let split;
      while ((split = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, split);
        buffer = buffer.slice(split + 2);
        let eventType = "message";
        let data = "";
        for (const line of block.split("\n")) {
          if (line.startsWith("event:")) {
            eventType = line.slice(6).trim();
          } else if (line.startsWith("data:")) {
            data += line.slice(5).trim();
          }
        }
        if (eventType === "end") {
          return;
        }
        if (data) {
          onEvent(JSON.parse(data) as StreamEvent);
        }
      }
    }
  }
}
