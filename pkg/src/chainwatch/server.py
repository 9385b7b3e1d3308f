"""HTTP wire boundary and the periodic analysis scheduler.

Ingest endpoints answer from the store alone; diagnostics and warnings
are recomputed off the ingest path by a worker thread whenever enough
new post-tune iterations arrived on any chain or the maximum interval
elapsed, and synchronously once on finish so finished runs always expose
a complete, deterministic final state.
"""
from __future__ import annotations

import sys
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from contextlib import asynccontextmanager

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import wire
from .diagnostics import DiagnosticsSnapshot, build_snapshot, histogram, pair_data, rank_histogram, trace_slice
from .errors import (
    BatchError,
    ChainwatchError,
    ContiguityError,
    DescriptorError,
    NotEnoughData,
    RunFinishedError,
    UnknownRunError,
)
from .model import split_flat_name
from .runlog import RunLogWriter
from .store import RunStore
from .warnings_engine import (
    Thresholds,
    WarningDiff,
    diff_warnings,
    evaluate,
    funnel_score_pairs,
    funnel_static_detect,
)


@dataclass
class AnalysisSchedule:
    every_n_iterations: int = 100
    max_interval: float = 1.0

    def validate(self) -> None:
        if self.every_n_iterations < 1 or self.max_interval <= 0:
            raise ChainwatchError("analysis schedule values must be positive")


class _RunAnalysis:
    """Per-run analysis state: latest snapshot, warning lifecycle, event feed."""

    def __init__(self, candidates, pairs):
        self.lock = threading.Lock()
        self.candidates = candidates
        self.pairs = pairs
        self.diag: Optional[DiagnosticsSnapshot] = None
        self.active: dict[str, object] = {}
        self.resolved: dict[str, object] = {}
        self.last_diff = WarningDiff()
        self.last_eval_counts: dict[int, int] = {}
        self.last_eval_time = 0.0
        self.finalized = False
        self.events: list[dict] = []
        self.events_cond = threading.Condition()


class AnalysisEngine:
    """Schedules and executes diagnostics + warning evaluation per run."""

    def __init__(
        self,
        store: RunStore,
        thresholds: Thresholds,
        schedule: AnalysisSchedule,
        auto_start: bool = True,
    ):
        self.store = store
        self.thresholds = thresholds
        self.schedule = schedule
        self._runs: dict[str, _RunAnalysis] = {}
        self._lock = threading.Lock()
        self._wake = threading.Event()
        self._stop = False
        self._thread: Optional[threading.Thread] = None
        store.add_listener(self._on_store_event)
        if auto_start:
            self._thread = threading.Thread(target=self._loop, name="chainwatch-analysis", daemon=True)
            self._thread.start()

    def shutdown(self) -> None:
        self._stop = True
        self._wake.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    # -- store events ---------------------------------------------------------
    def _on_store_event(self, run_id: str, event: str) -> None:
        if event == "created":
            run = self.store.get(run_id)
            candidates = funnel_static_detect(run.descriptor)
            with self._lock:
                self._runs[run_id] = _RunAnalysis(candidates, funnel_score_pairs(candidates))
        self._wake.set()

    def _state(self, run_id: str) -> _RunAnalysis:
        with self._lock:
            state = self._runs.get(run_id)
        if state is None:
            raise UnknownRunError(run_id)
        return state

    # -- evaluation -----------------------------------------------------------
    def evaluate_now(self, run_id: str) -> DiagnosticsSnapshot:
        """Synchronous recompute; also what the worker calls per tick."""
        state = self._state(run_id)
        with state.lock:
            run = self.store.get(run_id)
            view = self.store.snapshot(run_id)
            diag = build_snapshot(
                view,
                funnel_pairs=state.pairs,
                acceptance_window=self.thresholds.acceptance_window,
                pause=self._breathe,
            )
            warnings = evaluate(diag, state.candidates, self.thresholds, run.metadata, run.descriptor)
            diff = diff_warnings(list(state.active.values()), warnings)
            state.diag = diag
            state.active = {w.id: w for w in diff.new + diff.persisting}
            for w in diff.new:
                state.resolved.pop(w.id, None)  # re-fired warnings leave the history
            for w in diff.resolved:
                state.resolved[w.id] = w
            state.last_diff = diff
            state.last_eval_counts = dict(diag.sample_counts)
            state.last_eval_time = time.monotonic()
            if view.status != "running":
                state.finalized = True
            events = [("stats-updated", {"frontier": diag.frontier_iteration})]
            if diff.new or diff.resolved:
                events.append(("warning-diff", {
                    "new": [w.id for w in diff.new],
                    "resolved": [w.id for w in diff.resolved],
                }))
            events.append(("progress", {
                "status": view.status,
                "sample_counts": {str(c): n for c, n in diag.sample_counts.items()},
            }))
            self._emit(state, events)
            return diag

    def _breathe(self) -> None:
        # live ingest outranks analysis: step aside while batches are arriving
        if time.monotonic() - self.store.last_ingest_at < 0.005:
            time.sleep(0.002)
        else:
            time.sleep(0)

    def _emit(self, state: _RunAnalysis, events: list[tuple[str, dict]]) -> None:
        with state.events_cond:
            for kind, data in events:
                state.events.append({"seq": len(state.events), "kind": kind, "data": data})
            state.events_cond.notify_all()

    def latest(self, run_id: str) -> DiagnosticsSnapshot:
        state = self._state(run_id)
        if state.diag is None:
            return self.evaluate_now(run_id)
        return state.diag

    def candidates_for(self, run_id: str):
        return list(self._state(run_id).candidates)

    def warning_feed(self, run_id: str) -> dict:
        state = self._state(run_id)
        if state.diag is None:
            self.evaluate_now(run_id)
        with state.lock:
            resolved = sorted(state.resolved.values(), key=lambda w: (w.kind, w.id))
            return {
                "new": [wire.warning_to_wire(w) for w in state.last_diff.new],
                "persisting": [wire.warning_to_wire(w) for w in state.last_diff.persisting],
                "resolved": [wire.warning_to_wire(w) for w in resolved],
            }

    def wait_events(self, run_id: str, since: int, wait: float) -> list[dict]:
        state = self._state(run_id)
        deadline = time.monotonic() + max(0.0, min(wait, 30.0))
        with state.events_cond:
            while len(state.events) <= since:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                state.events_cond.wait(remaining)
            return list(state.events[since:since + 500])

    # -- scheduler loop ---------------------------------------------------------
    def _due(self, run_id: str, state: _RunAnalysis, now: float) -> bool:
        if state.finalized:
            return False
        run = self.store.get(run_id)
        if run.status != "running":
            return True  # final pass
        progress = run.progress()
        grown = max(
            (progress[c]["sample"] - state.last_eval_counts.get(c, 0) for c in progress),
            default=0,
        )
        if grown >= self.schedule.every_n_iterations:
            return True
        if state.diag is None and any(sum(p.values()) > 0 for p in progress.values()):
            return True
        return grown > 0 and now - state.last_eval_time >= self.schedule.max_interval

    def _loop(self) -> None:
        while not self._stop:
            self._wake.wait(timeout=0.05)
            self._wake.clear()
            if self._stop:
                return
            with self._lock:
                run_ids = list(self._runs)
            now = time.monotonic()
            for run_id in run_ids:
                try:
                    state = self._state(run_id)
                    if self._due(run_id, state, now):
                        self.evaluate_now(run_id)
                except UnknownRunError:
                    continue
                except Exception:  # analysis must never kill the scheduler
                    continue


# --- HTTP app ------------------------------------------------------------------

def _run_info(run) -> dict:
    return {
        "run_id": run.run_id,
        "status": run.status,
        "metadata": wire.metadata_to_wire(run.metadata),
        "progress": {str(c) : p for c, p in run.progress().items()},
    }


def create_app(
    store: Optional[RunStore] = None,
    thresholds: Optional[Thresholds] = None,
    schedule: Optional[AnalysisSchedule] = None,
    spill_dir: Optional[str] = None,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    store = store or RunStore()
    thresholds = thresholds or Thresholds()
    thresholds.validate()
    schedule = schedule or AnalysisSchedule()
    schedule.validate()
    # ingest latency must not ride on analysis GIL chunks; preempt more eagerly
    if sys.getswitchinterval() > 0.002:
        sys.setswitchinterval(0.002)
    engine = AnalysisEngine(store, thresholds, schedule)

    @asynccontextmanager
    async def _lifespan(app):
        yield
        engine.shutdown()

    app = FastAPI(title="chainwatch", version="0.1.0", docs_url=None, redoc_url=None,
                  lifespan=_lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.engine = engine
    app.state.thresholds = thresholds
    spills: dict[str, RunLogWriter] = {}

    @app.exception_handler(ChainwatchError)
    def _domain_error(request: Request, exc: ChainwatchError):
        body: dict = {"message": str(exc)}
        if isinstance(exc, UnknownRunError):
            status, body["error"] = 404, "unknown_run"
        elif isinstance(exc, ContiguityError):
            status, body["error"], body["expected"] = 409, "contiguity", exc.expected
        elif isinstance(exc, RunFinishedError):
            status, body["error"] = 409, "run_not_running"
        elif isinstance(exc, (BatchError, DescriptorError, NotEnoughData)):
            status, body["error"] = 422, "invalid_payload"
        else:
            status, body["error"] = 400, "bad_request"
        return JSONResponse(status_code=status, content=body)

    @app.get("/api/v1/health")
    def health():
        return wire.envelope({"status": "ok"})

    @app.post("/api/v1/runs")
    def create_run(body: wire.CreateRunEnvelope):
        descriptor = wire.descriptor_from_wire(body.payload.descriptor)
        metadata = wire.metadata_from_wire(body.payload.metadata)
        run_id = store.create_run(descriptor, metadata, run_id=body.payload.run_id)
        if spill_dir:
            writer = RunLogWriter(f"{spill_dir}/{run_id}.jsonl")
            writer.write_create(run_id, descriptor, metadata)
            spills[run_id] = writer
        return wire.envelope({"run_id": run_id})

    @app.get("/api/v1/runs")
    def list_runs():
        return wire.envelope({"runs": [_run_info(store.get(rid)) for rid in store.run_ids()]})

    @app.get("/api/v1/runs/{run_id}")
    def run_info(run_id: str):
        return wire.envelope(_run_info(store.get(run_id)))

    @app.get("/api/v1/runs/{run_id}/model")
    def run_model(run_id: str):
        return wire.envelope(wire.descriptor_to_wire(store.get(run_id).descriptor))

    @app.post("/api/v1/runs/{run_id}/batches")
    def post_batch(run_id: str, body: wire.BatchEnvelope):
        batch = wire.batch_from_wire(run_id, body.payload)
        last = store.append_batch(batch)
        writer = spills.get(run_id)
        if writer is not None:
            writer.write_batch(batch)
        return wire.envelope({"accepted_through_iteration": last})

    @app.get("/api/v1/runs/{run_id}/control")
    def get_control(run_id: str):
        return wire.envelope({"stop": store.read_control(run_id)})

    @app.post("/api/v1/runs/{run_id}/control")
    def post_control(run_id: str, body: wire.ControlEnvelope):
        store.request_stop(run_id)
        return wire.envelope({"stop": True})

    @app.post("/api/v1/runs/{run_id}/finish")
    def post_finish(run_id: str, body: wire.FinishEnvelope):
        store.finish_run(run_id, body.payload.outcome)
        engine.evaluate_now(run_id)  # final, synchronous: reports are stable after finish
        writer = spills.pop(run_id, None)
        if writer is not None:
            writer.write_finish(run_id, body.payload.outcome)
            writer.close()
        return wire.envelope(_run_info(store.get(run_id)))

    @app.get("/api/v1/runs/{run_id}/stats")
    def get_stats(
        run_id: str,
        variable: Optional[str] = None,
        chain: Optional[str] = None,
        phase: str = "sample",
    ):
        if phase == "sample":
            diag = engine.latest(run_id)
            rows = diag.stats
        elif phase == "tune":
            view = store.snapshot(run_id)
            rows = build_snapshot(_TunePhaseView(view), acceptance_window=thresholds.acceptance_window).stats
        else:
            raise BatchError(f"unknown phase {phase!r}")
        if variable is not None:
            rows = [r for r in rows if r.variable == variable or split_flat_name(r.variable)[0] == variable]
            if not rows:
                raise BatchError(f"unknown variable {variable!r}")
        if chain is not None:
            if chain.upper() == "ALL":
                rows = [r for r in rows if r.chain is None]
            else:
                try:
                    wanted = int(chain)
                except ValueError:
                    raise BatchError(f"chain must be an index or ALL, got {chain!r}") from None
                rows = [r for r in rows if r.chain == wanted]
        return wire.envelope({"rows": [wire.stats_to_wire(r) for r in rows]})

    def _resolve_series(run_id: str, variable: str, phase: str):
        if phase not in ("tune", "sample", "all"):
            raise BatchError(f"unknown phase {phase!r}")
        view = store.snapshot(run_id)
        j = view.flat_index(variable)
        return view, j

    @app.get("/api/v1/runs/{run_id}/plots/trace")
    def plot_trace(
        run_id: str,
        variable: str,
        chain: Optional[int] = None,
        phase: str = "sample",
        max_points: int = Query(default=500, ge=2),
    ):
        view, j = _resolve_series(run_id, variable, phase)
        chains = [chain] if chain is not None else list(range(view.n_chains))
        traces = []
        for c in chains:
            series = view.draws(c, phase)[:, j]
            if series.size == 0:
                continue
            traces.append(wire.trace_to_wire(c, trace_slice(series, max_points)))
        return wire.envelope({"variable": variable, "phase": phase, "traces": traces})

    @app.get("/api/v1/runs/{run_id}/plots/histogram")
    def plot_histogram(
        run_id: str,
        variable: str,
        chain: Optional[int] = None,
        phase: str = "sample",
        bins: int = Query(default=30, ge=1),
    ):
        view, j = _resolve_series(run_id, variable, phase)
        if chain is not None:
            series = view.draws(chain, phase)[:, j]
        else:
            series = np.concatenate([view.draws(c, phase)[:, j] for c in range(view.n_chains)])
        h = histogram(series, bins)
        return wire.envelope({"variable": variable, **wire.histogram_to_wire(h)})

    @app.get("/api/v1/runs/{run_id}/plots/rank")
    def plot_rank(
        run_id: str,
        variable: str,
        phase: str = "sample",
        bins: int = Query(default=20, ge=1),
    ):
        view, j = _resolve_series(run_id, variable, phase)
        chains = {
            c: view.draws(c, phase)[:, j]
            for c in range(view.n_chains)
            if view.draws(c, phase).shape[0] > 0
        }
        r = rank_histogram(chains, bins)
        return wire.envelope({"variable": variable, **wire.rank_histogram_to_wire(r)})

    @app.get("/api/v1/runs/{run_id}/plots/pair")
    def plot_pair(
        run_id: str,
        x: str,
        y: str,
        chain: Optional[int] = None,
        phase: str = "sample",
        thin: int = Query(default=1, ge=1),
    ):
        view, jx = _resolve_series(run_id, x, phase)
        jy = view.flat_index(y)
        if chain is not None:
            xs = view.draws(chain, phase)[:, jx]
            ys = view.draws(chain, phase)[:, jy]
        else:
            xs = np.concatenate([view.draws(c, phase)[:, jx] for c in range(view.n_chains)])
            ys = np.concatenate([view.draws(c, phase)[:, jy] for c in range(view.n_chains)])
        hint_positive = None
        x_root, y_root = split_flat_name(x)[0], split_flat_name(y)[0]
        for cand in engine.candidates_for(run_id):
            if cand.scale_input == x_root and cand.child == y_root:
                hint_positive = view.support_of(x_root) == "positive"
                break
        p = pair_data(xs, ys, thin=thin, hint_parent_positive=hint_positive)
        hint = p.funnel_hint
        if hint is not None and hint < thresholds.funnel_score_min:
            hint = None
        return wire.envelope({
            "x_variable": x, "y_variable": y,
            "x": p.x.tolist(), "y": p.y.tolist(),
            "funnel_hint": wire._safe(hint),
        })

    @app.get("/api/v1/runs/{run_id}/warnings")
    def get_warnings(run_id: str):
        store.get(run_id)  # 404 before engine state lookup
        return wire.envelope(engine.warning_feed(run_id))

    @app.get("/api/v1/runs/{run_id}/events")
    def get_events(
        run_id: str,
        since: int = Query(default=0, ge=0),
        wait: float = Query(default=0.0, ge=0.0, le=30.0),
    ):
        store.get(run_id)
        events = engine.wait_events(run_id, since, wait)
        next_since = events[-1]["seq"] + 1 if events else since
        return wire.envelope({"events": events, "next_since": next_since})

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


class _TunePhaseView:
    """Adapter presenting tune-phase draws through the sample-phase protocol."""

    def __init__(self, view):
        self._view = view
        self.run_id = view.run_id
        self.algorithm = view.algorithm
        self.n_chains = view.n_chains
        self.flat_names = view.flat_names

    def sample_draws(self, chain: int):
        return self._view.draws(chain, "tune")

    def sample_accept(self, chain: int):
        return self._view.accept(chain, "tune")

    def flat_indices(self, variable: str):
        return self._view.flat_indices(variable)

    def support_of(self, variable: str):
        return self._view.support_of(variable)
