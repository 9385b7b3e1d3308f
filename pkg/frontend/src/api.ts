// Typed client for the engine's versioned wire protocol.

import type {
  Descriptor,
  EventsPayload,
  HistogramData,
  PairData,
  RankData,
  RunInfo,
  StatsRow,
  TraceData,
  WarningFeed,
} from "./types.js";

export const PROTOCOL_VERSION = 1;

export class EngineError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class EngineClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async unwrap<T>(resp: Response): Promise<T> {
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const body = await resp.json();
        detail = body.message ?? JSON.stringify(body.detail ?? body);
      } catch {
        /* non-JSON error body */
      }
      throw new EngineError(resp.status, detail);
    }
    const body = await resp.json();
    return body.payload as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(this.base + path).then((r) => this.unwrap<T>(r));
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ protocol_version: PROTOCOL_VERSION, payload }),
    }).then((r) => this.unwrap<T>(r));
  }

  listRuns(): Promise<{ runs: RunInfo[] }> {
    return this.get("/api/v1/runs");
  }

  runInfo(runId: string): Promise<RunInfo> {
    return this.get(`/api/v1/runs/${runId}`);
  }

  model(runId: string): Promise<Descriptor> {
    return this.get(`/api/v1/runs/${runId}/model`);
  }

  stats(runId: string, params: { variable?: string; chain?: string } = {}): Promise<{ rows: StatsRow[] }> {
    const q = new URLSearchParams();
    if (params.variable) q.set("variable", params.variable);
    if (params.chain) q.set("chain", params.chain);
    const suffix = q.toString() ? `?${q}` : "";
    return this.get(`/api/v1/runs/${runId}/stats${suffix}`);
  }

  trace(runId: string, variable: string, chain?: number, maxPoints = 400): Promise<TraceData> {
    const q = new URLSearchParams({ variable, max_points: String(maxPoints) });
    if (chain !== undefined) q.set("chain", String(chain));
    return this.get(`/api/v1/runs/${runId}/plots/trace?${q}`);
  }

  histogram(runId: string, variable: string, chain?: number, bins = 30): Promise<HistogramData> {
    const q = new URLSearchParams({ variable, bins: String(bins) });
    if (chain !== undefined) q.set("chain", String(chain));
    return this.get(`/api/v1/runs/${runId}/plots/histogram?${q}`);
  }

  rank(runId: string, variable: string, bins = 20): Promise<RankData> {
    const q = new URLSearchParams({ variable, bins: String(bins) });
    return this.get(`/api/v1/runs/${runId}/plots/rank?${q}`);
  }

  pair(runId: string, x: string, y: string, thin = 1): Promise<PairData> {
    const q = new URLSearchParams({ x, y, thin: String(thin) });
    return this.get(`/api/v1/runs/${runId}/plots/pair?${q}`);
  }

  warnings(runId: string): Promise<WarningFeed> {
    return this.get(`/api/v1/runs/${runId}/warnings`);
  }

  events(runId: string, since: number, wait: number): Promise<EventsPayload> {
    const q = new URLSearchParams({ since: String(since), wait: String(wait) });
    return this.get(`/api/v1/runs/${runId}/events?${q}`);
  }

  stop(runId: string): Promise<{ stop: boolean }> {
    return this.post(`/api/v1/runs/${runId}/control`, { stop: true });
  }
}
