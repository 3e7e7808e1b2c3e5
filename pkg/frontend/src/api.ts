import type {
  LocalizeResponse,
  MetaResponse,
  MotionPayload,
  SearchResult,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

/** Thin typed client over the JSON API.  Each mutable view keeps at most one
 * request in flight; responses superseded by a newer call are discarded via
 * the per-endpoint sequence counter. */
export class ApiClient {
  private searchSeq = 0;
  private localizeSeq = 0;

  constructor(
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
    private base = "",
  ) {}

  async meta(): Promise<MetaResponse> {
    const r = await this.fetchFn(`${this.base}/api/meta`);
    if (!r.ok) throw new Error(`meta failed: ${r.status}`);
    return (await r.json()) as MetaResponse;
  }

  async motion(id: string): Promise<MotionPayload> {
    const r = await this.fetchFn(
      `${this.base}/api/motion/${encodeURIComponent(id)}`,
    );
    if (!r.ok) throw new Error(`motion ${id} failed: ${r.status}`);
    return (await r.json()) as MotionPayload;
  }

  /** Resolves to null when a newer search superseded this one. */
  async search(q: string, k: number): Promise<SearchResult[] | null> {
    const seq = ++this.searchSeq;
    const params = new URLSearchParams({ q, k: String(k) });
    const r = await this.fetchFn(`${this.base}/api/search?${params}`);
    if (seq !== this.searchSeq) return null;
    if (!r.ok) throw new Error(`search failed: ${r.status}`);
    return (await r.json()) as SearchResult[];
  }

  /** Resolves to null when a newer localize call superseded this one. */
  async localize(
    motionId: string,
    query: string,
    window?: number,
    stride?: number,
  ): Promise<LocalizeResponse | null> {
    const seq = ++this.localizeSeq;
    const body: Record<string, unknown> = { motion_id: motionId, query };
    if (window !== undefined) body.window = window;
    if (stride !== undefined) body.stride = stride;
    const r = await this.fetchFn(`${this.base}/api/localize`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (seq !== this.localizeSeq) return null;
    if (!r.ok) throw new Error(`localize failed: ${r.status}`);
    return (await r.json()) as LocalizeResponse;
  }
}

/** Clamp a requested k to [1, gallery size]. */
export function clampK(k: number, galleryCount: number): number {
  return Math.max(1, Math.min(Math.floor(k), galleryCount));
}
