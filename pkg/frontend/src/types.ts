// Wire payload types, mirroring docs/wire-schema in the engine repo.

export interface SourceSpan {
  file: string;
  line_start: number;
  line_end: number;
}

export interface WireVariable {
  name: string;
  kind: "latent" | "observed" | "deterministic";
  distribution: string | null;
  shape: number[];
  support: "real" | "positive" | "other";
  source_span: SourceSpan | null;
}

export interface WireEdge {
  parent: string;
  child: string;
  slot: "location" | "scale" | "shape_param" | "other" | "deterministic_input";
}

export interface Descriptor {
  variables: WireVariable[];
  edges: WireEdge[];
}

export interface RunMetadata {
  run_id: string;
  algorithm: string;
  n_chains: number;
  n_tune: number;
  n_draws_planned: number;
  hyperparameters: Record<string, number>;
  started_at: string;
}

export interface RunInfo {
  run_id: string;
  status: "running" | "finished" | "aborted";
  metadata: RunMetadata;
  progress: Record<string, { tune: number; sample: number }>;
}

export interface StatsRow {
  variable: string;
  chain: number | "ALL";
  n: number;
  mean: number | null;
  sd: number | null;
  rhat: number | null;
  ess_bulk: number | null;
  acceptance_rate: number | null;
  degenerate: boolean;
}

export interface AffectedVariable {
  name: string;
  indices: number[];
}

export interface Warning {
  id: string;
  kind: string;
  severity: "info" | "warn" | "critical";
  status: "active" | "resolved";
  variables: AffectedVariable[];
  chains: number[];
  evidence: Record<string, number | null>;
  message: string;
  suggestion: string;
  suggested_code: string | null;
  source_span: SourceSpan | null;
  first_seen: number;
  last_seen: number;
}

export interface WarningFeed {
  new: Warning[];
  persisting: Warning[];
  resolved: Warning[];
}

export interface TraceData {
  variable: string;
  traces: { chain: number; iterations: number[]; values: number[] }[];
}

export interface HistogramData {
  variable: string;
  bin_edges: number[];
  counts: number[];
}

export interface RankData {
  variable: string;
  bin_edges: number[];
  chains: { chain: number; counts: number[] }[];
}

export interface PairData {
  x_variable: string;
  y_variable: string;
  x: number[];
  y: number[];
  funnel_hint: number | null;
}

export interface EngineEvent {
  seq: number;
  kind: "progress" | "warning-diff" | "stats-updated";
  data: Record<string, unknown>;
}

export interface EventsPayload {
  events: EngineEvent[];
  next_since: number;
}
