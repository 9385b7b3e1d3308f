"""Wire protocol: envelope models, JSON serialization, schema export.

Every request body is a versioned envelope {protocol_version, payload};
responses use the same envelope. Unknown fields are ignored, missing
required fields are rejected with a field path, and a protocol version
other than PROTOCOL_VERSION is rejected outright. The pydantic models
here are the compatibility contract shipped in docs/wire-schema.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .diagnostics import HistogramData, PairData, RankHistogramData, TraceSlice, VariableChainStats
from .model import DependencyEdge, ModelDescriptor, SourceSpan, VariableDecl
from .store import RunMetadata, SampleBatch
from .warnings_engine import Warning as EngineWarning

PROTOCOL_VERSION = 1


class WireModel(BaseModel):
    model_config = ConfigDict(extra="ignore")


class WireSourceSpan(WireModel):
    file: str
    line_start: int
    line_end: int


class WireVariable(WireModel):
    name: str
    kind: Literal["latent", "observed", "deterministic"]
    distribution: Optional[str] = None
    shape: list[int] = Field(default_factory=list)
    support: Literal["real", "positive", "other"] = "real"
    source_span: Optional[WireSourceSpan] = None


class WireEdge(WireModel):
    parent: str
    child: str
    slot: Literal["location", "scale", "shape_param", "other", "deterministic_input"]


class WireDescriptor(WireModel):
    variables: list[WireVariable]
    edges: list[WireEdge] = Field(default_factory=list)


class WireMetadata(WireModel):
    algorithm: str
    n_chains: int
    n_tune: int = 0
    n_draws_planned: int = 1
    hyperparameters: dict[str, float] = Field(default_factory=dict)
    started_at: str = ""


class CreateRunPayload(WireModel):
    descriptor: WireDescriptor
    metadata: WireMetadata
    run_id: Optional[str] = None  # set only when replaying a recorded log


class BatchPayload(WireModel):
    chain: int
    phase: Literal["tune", "sample"]
    first_iteration: int
    draws: dict[str, list[list[float]]]
    accept: list[float]


class ControlPayload(WireModel):
    stop: Literal[True]


class FinishPayload(WireModel):
    outcome: Literal["finished", "aborted"]


class _Envelope(WireModel):
    protocol_version: int

    @model_validator(mode="before")
    @classmethod
    def _reject_version_mismatch(cls, data):
        # checked before payload validation so a foreign protocol is never half-parsed
        if isinstance(data, dict) and data.get("protocol_version") != PROTOCOL_VERSION:
            raise ValueError(
                f"protocol version {data.get('protocol_version')!r} not supported "
                f"(expected {PROTOCOL_VERSION})"
            )
        return data


class CreateRunEnvelope(_Envelope):
    payload: CreateRunPayload


class BatchEnvelope(_Envelope):
    payload: BatchPayload


class ControlEnvelope(_Envelope):
    payload: ControlPayload


class FinishEnvelope(_Envelope):
    payload: FinishPayload


# --- conversions: wire -> domain ---------------------------------------------

def descriptor_from_wire(w: WireDescriptor) -> ModelDescriptor:
    return ModelDescriptor(
        variables=tuple(
            VariableDecl(
                name=v.name,
                kind=v.kind,
                distribution=v.distribution,
                shape=tuple(v.shape),
                support=v.support,
                source_span=(
                    SourceSpan(v.source_span.file, v.source_span.line_start, v.source_span.line_end)
                    if v.source_span
                    else None
                ),
            )
            for v in w.variables
        ),
        edges=tuple(DependencyEdge(e.parent, e.child, e.slot) for e in w.edges),
    )


def metadata_from_wire(w: WireMetadata) -> RunMetadata:
    return RunMetadata(
        algorithm=w.algorithm,
        n_chains=w.n_chains,
        n_tune=w.n_tune,
        n_draws_planned=w.n_draws_planned,
        hyperparameters=dict(w.hyperparameters),
        started_at=w.started_at,
    )


def batch_from_wire(run_id: str, w: BatchPayload) -> SampleBatch:
    return SampleBatch(
        run_id=run_id,
        chain=w.chain,
        phase=w.phase,
        first_iteration=w.first_iteration,
        draws={name: np.asarray(rows, dtype=np.float64) for name, rows in w.draws.items()},
        accept=np.asarray(w.accept, dtype=np.float64),
    )


# --- conversions: domain -> wire ----------------------------------------------

def _safe(x) -> Optional[float]:
    """JSON has no inf/nan; those serialize as null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def span_to_wire(span: Optional[SourceSpan]) -> Optional[dict]:
    if span is None:
        return None
    return {"file": span.file, "line_start": span.line_start, "line_end": span.line_end}


def descriptor_to_wire(d: ModelDescriptor) -> dict:
    return {
        "variables": [
            {
                "name": v.name,
                "kind": v.kind,
                "distribution": v.distribution,
                "shape": list(v.shape),
                "support": v.support,
                "source_span": span_to_wire(v.source_span),
            }
            for v in d.variables
        ],
        "edges": [{"parent": e.parent, "child": e.child, "slot": e.slot} for e in d.edges],
    }


def metadata_to_wire(m: RunMetadata) -> dict:
    return {
        "run_id": m.run_id,
        "algorithm": m.algorithm,
        "n_chains": m.n_chains,
        "n_tune": m.n_tune,
        "n_draws_planned": m.n_draws_planned,
        "hyperparameters": dict(m.hyperparameters),
        "started_at": m.started_at,
    }


def batch_to_wire(b: SampleBatch) -> dict:
    return {
        "chain": int(b.chain),
        "phase": b.phase,
        "first_iteration": int(b.first_iteration),
        "draws": {name: np.asarray(m, dtype=np.float64).tolist() for name, m in b.draws.items()},
        "accept": np.asarray(b.accept, dtype=np.float64).tolist(),
    }


def stats_to_wire(row: VariableChainStats) -> dict:
    return {
        "variable": row.variable,
        "chain": "ALL" if row.chain is None else row.chain,
        "n": row.n,
        "mean": _safe(row.mean),
        "sd": _safe(row.sd),
        "rhat": _safe(row.rhat),
        "ess_bulk": _safe(row.ess_bulk),
        "acceptance_rate": _safe(row.acceptance_rate),
        "degenerate": row.degenerate,
    }


def warning_to_wire(w: EngineWarning) -> dict:
    return {
        "id": w.id,
        "kind": w.kind,
        "severity": w.severity,
        "status": w.status,
        "variables": [{"name": v.name, "indices": list(v.indices)} for v in w.variables],
        "chains": list(w.chains),
        "evidence": {k: _safe(v) for k, v in w.evidence.items()},
        "message": w.message,
        "suggestion": w.suggestion,
        "suggested_code": w.suggested_code,
        "source_span": span_to_wire(w.source_span),
        "first_seen": w.first_seen,
        "last_seen": w.last_seen,
    }


def histogram_to_wire(h: HistogramData) -> dict:
    return {"bin_edges": h.bin_edges.tolist(), "counts": h.counts.tolist()}


def rank_histogram_to_wire(r: RankHistogramData) -> dict:
    return {
        "bin_edges": r.bin_edges.tolist(),
        "chains": [{"chain": c, "counts": counts.tolist()} for c, counts in sorted(r.counts.items())],
    }


def trace_to_wire(chain: int, t: TraceSlice) -> dict:
    return {"chain": chain, "iterations": t.iterations.tolist(), "values": t.values.tolist()}


def pair_to_wire(p: PairData) -> dict:
    return {"x": p.x.tolist(), "y": p.y.tolist(), "funnel_hint": _safe(p.funnel_hint)}


def envelope(payload: dict) -> dict:
    return {"protocol_version": PROTOCOL_VERSION, "payload": payload}


# --- schema export -------------------------------------------------------------

ENDPOINT_SCHEMAS: dict[str, type[BaseModel]] = {
    "create_run_request": CreateRunEnvelope,
    "batch_request": BatchEnvelope,
    "control_request": ControlEnvelope,
    "finish_request": FinishEnvelope,
}

ENDPOINT_INDEX = {
    "POST /api/v1/runs": {"request": "create_run_request.json", "response": "responses.json#/create_run"},
    "POST /api/v1/runs/{run_id}/batches": {"request": "batch_request.json", "response": "responses.json#/batch_ack"},
    "GET /api/v1/runs": {"response": "responses.json#/run_list"},
    "GET /api/v1/runs/{run_id}": {"response": "responses.json#/run_info"},
    "GET /api/v1/runs/{run_id}/model": {"response": "responses.json#/model"},
    "GET /api/v1/runs/{run_id}/control": {"response": "responses.json#/control"},
    "POST /api/v1/runs/{run_id}/control": {"request": "control_request.json", "response": "responses.json#/control"},
    "POST /api/v1/runs/{run_id}/finish": {"request": "finish_request.json", "response": "responses.json#/run_info"},
    "GET /api/v1/runs/{run_id}/stats": {"response": "responses.json#/stats"},
    "GET /api/v1/runs/{run_id}/plots/trace": {"response": "responses.json#/trace"},
    "GET /api/v1/runs/{run_id}/plots/histogram": {"response": "responses.json#/histogram"},
    "GET /api/v1/runs/{run_id}/plots/rank": {"response": "responses.json#/rank"},
    "GET /api/v1/runs/{run_id}/plots/pair": {"response": "responses.json#/pair"},
    "GET /api/v1/runs/{run_id}/warnings": {"response": "responses.json#/warnings"},
    "GET /api/v1/runs/{run_id}/events": {"response": "responses.json#/events"},
}


def _num(nullable=True):
    return {"type": ["number", "null"]} if nullable else {"type": "number"}


def response_schemas() -> dict:
    """Hand-maintained response shapes (all wrapped in the envelope)."""
    span = {
        "type": ["object", "null"],
        "properties": {"file": {"type": "string"}, "line_start": {"type": "integer"},
                       "line_end": {"type": "integer"}},
    }
    stats_row = {
        "type": "object",
        "required": ["variable", "chain", "n"],
        "properties": {
            "variable": {"type": "string"},
            "chain": {"type": ["integer", "string"], "description": "chain index or ALL"},
            "n": {"type": "integer"},
            "mean": _num(), "sd": _num(), "rhat": _num(), "ess_bulk": _num(),
            "acceptance_rate": _num(),
            "degenerate": {"type": "boolean"},
        },
    }
    warning = {
        "type": "object",
        "required": ["id", "kind", "severity", "status", "variables", "chains", "message", "suggestion"],
        "properties": {
            "id": {"type": "string"},
            "kind": {"type": "string"},
            "severity": {"enum": ["info", "warn", "critical"]},
            "status": {"enum": ["active", "resolved"]},
            "variables": {"type": "array", "items": {
                "type": "object",
                "properties": {"name": {"type": "string"},
                               "indices": {"type": "array", "items": {"type": "integer"}}},
            }},
            "chains": {"type": "array", "items": {"type": "integer"}},
            "evidence": {"type": "object", "additionalProperties": _num()},
            "message": {"type": "string"},
            "suggestion": {"type": "string"},
            "suggested_code": {"type": ["string", "null"]},
            "source_span": span,
            "first_seen": {"type": "integer"},
            "last_seen": {"type": "integer"},
        },
    }
    progress = {
        "type": "object",
        "additionalProperties": {
            "type": "object",
            "properties": {"tune": {"type": "integer"}, "sample": {"type": "integer"}},
        },
    }
    run_info = {
        "type": "object",
        "required": ["run_id", "status", "metadata", "progress"],
        "properties": {
            "run_id": {"type": "string"},
            "status": {"enum": ["running", "finished", "aborted"]},
            "metadata": {"type": "object"},
            "progress": progress,
        },
    }

    def env(payload):
        return {
            "type": "object",
            "required": ["protocol_version", "payload"],
            "properties": {"protocol_version": {"const": PROTOCOL_VERSION}, "payload": payload},
        }

    return {
        "$schema": "http://json-schema.org/draft-07/schema#",
        "title": "chainwatch wire responses",
        "create_run": env({"type": "object", "required": ["run_id"],
                           "properties": {"run_id": {"type": "string"}}}),
        "batch_ack": env({"type": "object", "required": ["accepted_through_iteration"],
                          "properties": {"accepted_through_iteration": {"type": "integer"}}}),
        "run_list": env({"type": "object", "properties": {"runs": {"type": "array", "items": run_info}}}),
        "run_info": env(run_info),
        "model": env({"type": "object", "required": ["variables", "edges"]}),
        "control": env({"type": "object", "required": ["stop"],
                        "properties": {"stop": {"type": "boolean"}}}),
        "stats": env({"type": "object", "properties": {"rows": {"type": "array", "items": stats_row}}}),
        "trace": env({"type": "object", "properties": {"variable": {"type": "string"}, "traces": {
            "type": "array", "items": {"type": "object", "properties": {
                "chain": {"type": "integer"},
                "iterations": {"type": "array", "items": {"type": "integer"}},
                "values": {"type": "array", "items": {"type": "number"}}}}}}}),
        "histogram": env({"type": "object", "properties": {
            "variable": {"type": "string"},
            "bin_edges": {"type": "array", "items": {"type": "number"}},
            "counts": {"type": "array", "items": {"type": "integer"}}}}),
        "rank": env({"type": "object", "properties": {
            "variable": {"type": "string"},
            "bin_edges": {"type": "array", "items": {"type": "number"}},
            "chains": {"type": "array", "items": {"type": "object", "properties": {
                "chain": {"type": "integer"},
                "counts": {"type": "array", "items": {"type": "integer"}}}}}}}),
        "pair": env({"type": "object", "properties": {
            "x_variable": {"type": "string"}, "y_variable": {"type": "string"},
            "x": {"type": "array", "items": {"type": "number"}},
            "y": {"type": "array", "items": {"type": "number"}},
            "funnel_hint": _num()}}),
        "warnings": env({"type": "object", "required": ["new", "persisting", "resolved"],
                         "properties": {"new": {"type": "array", "items": warning},
                                        "persisting": {"type": "array", "items": warning},
                                        "resolved": {"type": "array", "items": warning}}}),
        "events": env({"type": "object", "required": ["events", "next_since"],
                       "properties": {"next_since": {"type": "integer"},
                                      "events": {"type": "array", "items": {
                                          "type": "object",
                                          "required": ["seq", "kind"],
                                          "properties": {"seq": {"type": "integer"},
                                                         "kind": {"enum": ["progress", "warning-diff", "stats-updated"]},
                                                         "data": {"type": "object"}}}}}}),
        "error": {
            "type": "object",
            "required": ["error", "message"],
            "properties": {"error": {"type": "string"}, "message": {"type": "string"},
                           "expected": {"type": "integer"}},
            "description": "Non-2xx bodies; contiguity violations carry the expected iteration.",
        },
    }


def export_schemas(out_dir: str | Path) -> list[Path]:
    """Write the wire schema files; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, model in ENDPOINT_SCHEMAS.items():
        path = out / f"{name}.json"
        path.write_text(json.dumps(model.model_json_schema(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    path = out / "responses.json"
    path.write_text(json.dumps(response_schemas(), indent=2, sort_keys=True) + "\n")
    written.append(path)
    path = out / "endpoints.json"
    path.write_text(json.dumps(ENDPOINT_INDEX, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "docs/wire-schema"
    for p in export_schemas(target):
        print(p)
