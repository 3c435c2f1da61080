/** Backend client: multipart calls to the inference service with
 * superseding cancellation (at most one synthesis request in flight;
 * a newer one aborts the older). */

export interface StyleEntry {
  id: string;
  thumbnail_url: string;
}

export interface SynthesisPayload {
  sketchPng: Uint8Array;
  stylePng: Uint8Array;
  styleId: string | null; // provenance only; stylePng is what is sent
  stage: "ae" | "gan";
  seed: number;
}

export interface SynthesisResponse {
  blob: Blob;
  latencyMs: number;
  payload: SynthesisPayload;
}

export class BackendError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`backend ${status}: ${detail}`);
  }
}

export class SupersededError extends Error {
  constructor() {
    super("request superseded by a newer one");
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SynthesisClient {
  private inflight: AbortController | null = null;
  private fetchFn: FetchLike;

  constructor(readonly baseUrl: string, fetchFn?: FetchLike) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  hasInflight(): boolean {
    return this.inflight !== null;
  }

  async styles(): Promise<StyleEntry[]> {
    const r = await this.fetchFn(`${this.baseUrl}/styles`);
    if (!r.ok) throw new BackendError(r.status, await r.text());
    return (await r.json()) as StyleEntry[];
  }

  async health(): Promise<{ ok: boolean; status: number }> {
    const r = await this.fetchFn(`${this.baseUrl}/health`);
    return { ok: r.ok, status: r.status };
  }

  async fetchStyleImage(entry: StyleEntry): Promise<Uint8Array> {
    const r = await this.fetchFn(`${this.baseUrl}${entry.thumbnail_url}`);
    if (!r.ok) throw new BackendError(r.status, await r.text());
    return new Uint8Array(await r.arrayBuffer());
  }

  /** Synthesize; any request still in flight is aborted first. */
  async synthesize(payload: SynthesisPayload): Promise<SynthesisResponse> {
    this.inflight?.abort(new SupersededError());
    const controller = new AbortController();
    this.inflight = controller;

    const form = new FormData();
    form.append("sketch", new Blob([payload.sketchPng.slice().buffer], { type: "image/png" }), "sketch.png");
    form.append("style", new Blob([payload.stylePng.slice().buffer], { type: "image/png" }), "style.png");
    form.append("stage", payload.stage);
    form.append("seed", String(payload.seed));

    const t0 = performance.now();
    try {
      const r = await this.fetchFn(`${this.baseUrl}/synthesize`, {
        method: "POST",
        body: form,
        signal: controller.signal,
      });
      if (!r.ok) {
        let detail = "";
        try {
          detail = JSON.stringify(await r.json());
        } catch {
          detail = r.statusText;
        }
        throw new BackendError(r.status, detail);
      }
      const blob = await r.blob();
      return { blob, latencyMs: performance.now() - t0, payload };
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }
}
