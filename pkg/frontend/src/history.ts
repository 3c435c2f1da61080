/** Result history: every displayed image stays traceable to the exact
 * request payload that produced it. */

export interface RequestSnapshot {
  readonly stage: "ae" | "gan";
  readonly seed: number;
  readonly styleId: string | null;
  readonly sketchDigest: string;
  readonly styleDigest: string | null;
}

export interface HistoryEntry {
  readonly id: number;
  readonly request: RequestSnapshot;
  readonly resultUrl: string;
  readonly latencyMs: number;
  readonly at: number;
}

/** FNV-1a over bytes; enough to fingerprint payloads for traceability. */
export function digestBytes(bytes: Uint8Array): string {
  let h = 0x811c9dc5;
  for (let i = 0; i < bytes.length; i++) {
    h ^= bytes[i];
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, "0") + ":" + bytes.length.toString(16);
}

export class HistoryStrip {
  private entries: HistoryEntry[] = [];
  private nextId = 1;

  add(request: RequestSnapshot, resultUrl: string, latencyMs: number,
      now: number = Date.now()): HistoryEntry {
    const entry: HistoryEntry = Object.freeze({
      id: this.nextId++, request, resultUrl, latencyMs, at: now,
    });
    this.entries.push(entry);
    return entry;
  }

  list(): readonly HistoryEntry[] {
    return [...this.entries];
  }

  get length(): number {
    return this.entries.length;
  }

  byId(id: number): HistoryEntry | undefined {
    return this.entries.find((e) => e.id === id);
  }

  clear(): void {
    this.entries = [];
  }
}
