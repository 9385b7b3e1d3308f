import type { Descriptor, PairData, RunInfo, StatsRow, Warning, WarningFeed } from "../src/types.js";

export function centeredDescriptor(): Descriptor {
  return {
    variables: [
      { name: "mu", kind: "latent", distribution: "Normal", shape: [], support: "real", source_span: null },
      { name: "tau", kind: "latent", distribution: "HalfCauchy", shape: [], support: "positive", source_span: null },
      {
        name: "theta", kind: "latent", distribution: "Normal", shape: [8], support: "real",
        source_span: { file: "models/eight_schools_centered.py", line_start: 4, line_end: 4 },
      },
      { name: "y", kind: "observed", distribution: "Normal", shape: [8], support: "real", source_span: null },
    ],
    edges: [
      { parent: "mu", child: "theta", slot: "location" },
      { parent: "tau", child: "theta", slot: "scale" },
      { parent: "theta", child: "y", slot: "location" },
    ],
  };
}

export function noncenteredDescriptor(): Descriptor {
  return {
    variables: [
      { name: "mu", kind: "latent", distribution: "Normal", shape: [], support: "real", source_span: null },
      { name: "tau", kind: "latent", distribution: "HalfCauchy", shape: [], support: "positive", source_span: null },
      { name: "Z", kind: "latent", distribution: "Normal", shape: [8], support: "real", source_span: null },
      { name: "theta", kind: "deterministic", distribution: null, shape: [8], support: "real", source_span: null },
      { name: "y", kind: "observed", distribution: "Normal", shape: [8], support: "real", source_span: null },
    ],
    edges: [
      { parent: "mu", child: "theta", slot: "deterministic_input" },
      { parent: "tau", child: "theta", slot: "deterministic_input" },
      { parent: "Z", child: "theta", slot: "deterministic_input" },
      { parent: "theta", child: "y", slot: "location" },
    ],
  };
}

export function runInfo(status: RunInfo["status"] = "running"): RunInfo {
  return {
    run_id: "run-1",
    status,
    metadata: {
      run_id: "run-1", algorithm: "hmc", n_chains: 2, n_tune: 100,
      n_draws_planned: 1000, hyperparameters: { step_size: 0.2 }, started_at: "",
    },
    progress: { "0": { tune: 100, sample: 500 }, "1": { tune: 100, sample: 500 } },
  };
}

export function statsRow(partial: Partial<StatsRow> = {}): StatsRow {
  return {
    variable: "theta[0]", chain: "ALL", n: 1000, mean: 4.2, sd: 3.1,
    rhat: 1.002, ess_bulk: 812, acceptance_rate: null, degenerate: false,
    ...partial,
  };
}

export function funnelWarning(): Warning {
  return {
    id: "w-funnel", kind: "FunnelAcceptance", severity: "critical", status: "active",
    variables: [{ name: "theta", indices: [0, 1, 2, 3, 4, 5, 6, 7] }],
    chains: [0, 1],
    evidence: { acceptance_rate: 0.31, funnel_score: 0.46, ess_bulk: 12 },
    message: "The scale of theta is controlled by tau and the sampler is struggling.",
    suggestion: "Reparameterize the model.",
    suggested_code: "Z ~ Normal(0, 1), shape=(8,)\ntheta = mu + tau * Z",
    source_span: { file: "models/eight_schools_centered.py", line_start: 4, line_end: 4 },
    first_seen: 400, last_seen: 900,
  };
}

export function feed(overrides: Partial<WarningFeed> = {}): WarningFeed {
  return { new: [], persisting: [], resolved: [], ...overrides };
}

export function pairData(hint: number | null): PairData {
  return {
    x_variable: "tau", y_variable: "theta[0]",
    x: [0.5, 1.2, 2.0, 0.7], y: [0.1, -1.0, 2.2, 0.4],
    funnel_hint: hint,
  };
}
