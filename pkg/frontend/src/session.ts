// Client-side mirror of the gateway's single active session. Holds the
// live event buffer, reconnects the stream with backoff (marking the gap),
// and surfaces gateway refusals as banners instead of swallowing them.

import {
  GatewayClient,
  GatewayError,
  HearingPrompt,
  Phase,
  PotReading,
  ResultView,
  StreamEvent,
} from "./api.js";

export interface GapMarker {
  gap: true;
}

export type BufferedEvent = StreamEvent | GapMarker;

export function isGap(ev: BufferedEvent): ev is GapMarker {
  return (ev as GapMarker).gap === true;
}

const BACKOFF_START_MS = 250;
const BACKOFF_CAP_MS = 2000;

export class SessionView {
  phase: Phase = "idle";
  test = "";
  patient = "";
  view: ResultView = { phase: "idle" };
  events: BufferedEvent[] = [];
  banner = "";

  private updateListeners: Array<() => void> = [];
  private bannerListeners: Array<(text: string) => void> = [];
  private streamAbort: AbortController | null = null;

  constructor(
    private client: GatewayClient,
    private sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  onUpdate(cb: () => void): void {
    this.updateListeners.push(cb);
  }

  onBanner(cb: (text: string) => void): void {
    this.bannerListeners.push(cb);
  }

  private emit(): void {
    for (const cb of this.updateListeners) {
      cb();
    }
  }

  private showBanner(text: string): void {
    this.banner = text;
    for (const cb of this.bannerListeners) {
      cb(text);
    }
  }

  private apply(view: ResultView): ResultView {
    this.view = view;
    this.phase = view.phase;
    this.test = view.test ?? this.test;
    this.patient = view.patient ?? this.patient;
    this.emit();
    return view;
  }

  /** Wrap a gateway call: 409/400 become a visible banner, never silence. */
  private async guarded<T>(call: () => Promise<T>): Promise<T | null> {
    try {
      const out = await call();
      this.showBanner("");
      return out;
    } catch (err) {
      if (err instanceof GatewayError) {
        this.showBanner(err.status === 409 ? "no active session" : err.message);
        return null;
      }
      throw err;
    }
  }

  async start(
    patient: string,
    test: string,
    params?: Record<string, unknown>,
  ): Promise<ResultView | null> {
    this.events = [];
    const view = await this.guarded(() => this.client.start(patient, test, params));
    if (view === null) {
      return null;
    }
    this.patient = patient;
    this.test = test;
    if (view.phase === "running" || view.phase === "awaiting-response") {
      this.attachStream();
    }
    return this.apply(view);
  }

  async clickHeard(heard: boolean): Promise<HearingPrompt | ResultView | null> {
    const out = await this.guarded(() => this.client.hearingEvent(heard));
    if (out !== null && "phase" in out) {
      this.apply(out as ResultView);
    }
    return out;
  }

  async movePot(code: number): Promise<PotReading | null> {
    return this.guarded(() => this.client.movePot(code));
  }

  async stop(): Promise<ResultView | null> {
    const view = await this.guarded(() => this.client.stop());
    return view === null ? null : this.apply(view);
  }

  async refresh(): Promise<ResultView> {
    return this.apply(await this.client.result());
  }

  async waitForCompletion(pollMs = 50): Promise<ResultView> {
    for (;;) {
      const view = await this.refresh();
      if (view.phase === "done" || view.phase === "error") {
        return view;
      }
      await this.sleep(pollMs);
    }
  }

  /** Follow the live stream; on transport loss, mark the gap in the buffer
   * and reconnect with exponential backoff while the session is running. */
  attachStream(): void {
    this.detachStream();
    const abort = new AbortController();
    this.streamAbort = abort;
    void (async () => {
      let backoff = BACKOFF_START_MS;
      for (;;) {
        try {
          await this.client.readStream((ev) => {
            this.events.push(ev);
            backoff = BACKOFF_START_MS;
            this.emit();
          }, abort.signal);
          return; // clean end marker
        } catch (err) {
          if (abort.signal.aborted) {
            return;
          }
          const phase = (await this.client.result()).phase;
          if (phase !== "running" && phase !== "awaiting-response") {
            return;
          }
          this.events.push({ gap: true });
          this.emit();
          await this.sleep(backoff);
          backoff = Math.min(backoff * 2, BACKOFF_CAP_MS);
        }
      }
    })();
  }

  detachStream(): void {
    this.streamAbort?.abort();
    this.streamAbort = null;
  }
}
