"""In-memory run store: streaming draw buffers, sampler stats, control latch.

One store hosts many runs keyed by run_id. Draws arrive in contiguous
per-(chain, phase) batches, are flattened to scalar series at ingest
(row-major, bracketed index names), and are kept in append-only chunk
lists so snapshots can be cut at a consistent frontier without blocking
writers for more than bookkeeping.
"""
from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BatchError, ChainwatchError, ContiguityError, DescriptorError, RunFinishedError, UnknownRunError
from .model import ModelDescriptor

PHASES = ("tune", "sample")


@dataclass
class RunMetadata:
    algorithm: str
    n_chains: int
    n_tune: int
    n_draws_planned: int
    hyperparameters: dict[str, float] = field(default_factory=dict)
    started_at: str = ""
    run_id: str = ""

    def validate(self) -> None:
        if self.n_chains < 1:
            raise DescriptorError("n_chains must be >= 1")
        if self.n_tune < 0:
            raise DescriptorError("n_tune must be >= 0")
        if self.n_draws_planned < 1:
            raise DescriptorError("n_draws_planned must be >= 1")


@dataclass(frozen=True)
class SampleBatch:
    run_id: str
    chain: int
    phase: str
    first_iteration: int
    draws: dict[str, np.ndarray]  # root variable -> (batch_len, flat_size)
    accept: np.ndarray  # (batch_len,) values in [0, 1]


class _ChainBuffer:
    """Per-chain append-only draw storage, one chunk list per phase."""

    def __init__(self, n_flat: int):
        self.lock = threading.Lock()
        self.chunks: dict[str, list[np.ndarray]] = {p: [] for p in PHASES}
        self.accept_chunks: dict[str, list[np.ndarray]] = {p: [] for p in PHASES}
        self.counts: dict[str, int] = {p: 0 for p in PHASES}
        self.n_flat = n_flat


class RunState:
    def __init__(self, run_id: str, descriptor: ModelDescriptor, metadata: RunMetadata):
        self.run_id = run_id
        self.descriptor = descriptor
        self.metadata = metadata
        self.flat_names = descriptor.flat_series_names()
        self.status = "running"
        self.stop_requested = False
        self.status_lock = threading.Lock()
        self.chains = [_ChainBuffer(len(self.flat_names)) for _ in range(metadata.n_chains)]
        # column layout: variables in declaration order, row-major within a variable
        self._columns: dict[str, slice] = {}
        at = 0
        for v in descriptor.variables:
            if v.kind in ("latent", "deterministic"):
                self._columns[v.name] = slice(at, at + v.flat_size)
                at += v.flat_size

    def column_slice(self, variable: str) -> slice:
        return self._columns[variable]

    def progress(self) -> dict[int, dict[str, int]]:
        return {c: dict(buf.counts) for c, buf in enumerate(self.chains)}


class StoreSnapshot:
    """Immutable view of one run, cut at a per-chain ingest frontier."""

    def __init__(self, run: RunState, lengths: dict[tuple[int, str], int], phase_filter: str):
        self.run_id = run.run_id
        self.descriptor = run.descriptor
        self.metadata = run.metadata
        self.status = run.status
        self.flat_names = list(run.flat_names)
        self.n_chains = run.metadata.n_chains
        self.algorithm = run.metadata.algorithm
        self._columns = dict(run._columns)
        self._draws: dict[tuple[int, str], np.ndarray] = {}
        self._accept: dict[tuple[int, str], np.ndarray] = {}
        phases = PHASES if phase_filter == "all" else (phase_filter,)
        n_flat = len(self.flat_names)
        for c, buf in enumerate(run.chains):
            for phase in phases:
                n = lengths[(c, phase)]
                chunks, taken = buf.chunks[phase], 0
                rows, arows = [], []
                achunks = buf.accept_chunks[phase]
                for k, chunk in enumerate(chunks):
                    if taken >= n:
                        break
                    take = min(chunk.shape[0], n - taken)
                    rows.append(chunk[:take])
                    arows.append(achunks[k][:take])
                    taken += take
                self._draws[(c, phase)] = (
                    np.concatenate(rows) if rows else np.empty((0, n_flat))
                )
                self._accept[(c, phase)] = np.concatenate(arows) if arows else np.empty(0)

    def counts(self, chain: int, phase: str) -> int:
        return self._draws[(chain, phase)].shape[0] if (chain, phase) in self._draws else 0

    def draws(self, chain: int, phase: str = "sample") -> np.ndarray:
        if phase == "all":
            return np.concatenate([self.draws(chain, "tune"), self.draws(chain, "sample")])
        if (chain, phase) not in self._draws:
            raise ChainwatchError(f"phase {phase!r} not captured in this view")
        return self._draws[(chain, phase)]

    def accept(self, chain: int, phase: str = "sample") -> np.ndarray:
        if phase == "all":
            return np.concatenate([self.accept(chain, "tune"), self.accept(chain, "sample")])
        if (chain, phase) not in self._accept:
            raise ChainwatchError(f"phase {phase!r} not captured in this view")
        return self._accept[(chain, phase)]

    # view protocol used by diagnostics.build_snapshot
    def sample_draws(self, chain: int) -> np.ndarray:
        return self.draws(chain, "sample")

    def sample_accept(self, chain: int) -> np.ndarray:
        return self.accept(chain, "sample")

    def flat_index(self, flat_name: str) -> int:
        try:
            return self.flat_names.index(flat_name)
        except ValueError:
            raise ChainwatchError(f"unknown series {flat_name!r}") from None

    def flat_indices(self, variable: str) -> list[int]:
        if variable not in self._columns:
            raise ChainwatchError(f"unknown variable {variable!r}")
        s = self._columns[variable]
        return list(range(s.start, s.stop))

    def support_of(self, variable: str) -> str:
        return self.descriptor.variable(variable).support

    def pooled_sample_series(self, flat_index: int) -> np.ndarray:
        cols = [self.draws(c, "sample")[:, flat_index] for c in range(self.n_chains)]
        return np.concatenate(cols) if cols else np.empty(0)

    def series_by_chain(self, flat_index: int, phase: str = "sample") -> dict[int, np.ndarray]:
        return {c: self.draws(c, phase)[:, flat_index] for c in range(self.n_chains)}


class RunStore:
    """Registry of runs; the single mutable-state owner in the engine."""

    def __init__(self):
        self._runs: dict[str, RunState] = {}
        self._order: list[str] = []
        self._lock = threading.Lock()
        self._listeners: list[Callable[[str, str], None]] = []
        self.last_ingest_at = 0.0  # monotonic; lets analysis yield to live ingest

    def add_listener(self, fn: Callable[[str, str], None]) -> None:
        """fn(run_id, event) with event in {created, appended, finished}."""
        self._listeners.append(fn)

    def _notify(self, run_id: str, event: str) -> None:
        for fn in self._listeners:
            fn(run_id, event)

    def create_run(
        self,
        descriptor: ModelDescriptor,
        metadata: RunMetadata,
        run_id: Optional[str] = None,
    ) -> str:
        descriptor.validate()
        metadata.validate()
        rid = run_id or f"run-{uuid.uuid4().hex[:12]}"
        with self._lock:
            if rid in self._runs:
                raise ChainwatchError(f"run id {rid!r} already registered")
            metadata.run_id = rid
            self._runs[rid] = RunState(rid, descriptor, metadata)
            self._order.append(rid)
        self._notify(rid, "created")
        return rid

    def _get(self, run_id: str) -> RunState:
        with self._lock:
            run = self._runs.get(run_id)
        if run is None:
            raise UnknownRunError(run_id)
        return run

    def get(self, run_id: str) -> RunState:
        return self._get(run_id)

    def run_ids(self) -> list[str]:
        with self._lock:
            return list(self._order)

    def append_batch(self, batch: SampleBatch) -> int:
        """Validate and append one batch; returns the last accepted iteration."""
        run = self._get(batch.run_id)
        if batch.phase not in PHASES:
            raise BatchError(f"unknown phase {batch.phase!r}")
        if not 0 <= batch.chain < run.metadata.n_chains:
            raise BatchError(f"chain {batch.chain} out of range [0, {run.metadata.n_chains})")
        expected_vars = set(run._columns)
        got_vars = set(batch.draws)
        if got_vars != expected_vars:
            missing = sorted(expected_vars - got_vars)
            unknown = sorted(got_vars - expected_vars)
            parts = []
            if missing:
                parts.append(f"missing variables {missing}")
            if unknown:
                parts.append(f"unknown variables {unknown}")
            raise BatchError("; ".join(parts))

        accept = np.asarray(batch.accept, dtype=np.float64).ravel()
        b = accept.shape[0]
        if b < 1:
            raise BatchError("empty batch")
        if np.any((accept < 0.0) | (accept > 1.0)):
            raise BatchError("acceptance probability out of range [0, 1]")
        block = np.empty((b, len(run.flat_names)))
        for name, sl in run._columns.items():
            m = np.asarray(batch.draws[name], dtype=np.float64)
            if m.ndim == 1 and sl.stop - sl.start == 1:
                m = m.reshape(-1, 1)
            if m.shape != (b, sl.stop - sl.start):
                raise BatchError(
                    f"variable {name!r}: expected shape ({b}, {sl.stop - sl.start}), got {tuple(m.shape)}"
                )
            if not np.all(np.isfinite(m)):
                raise BatchError(f"variable {name!r}: non-finite draw values")
            block[:, sl] = m

        buf = run.chains[batch.chain]
        with buf.lock:
            if run.status != "running":
                raise RunFinishedError(f"run {run.run_id} is {run.status}")
            expected = buf.counts[batch.phase]
            if batch.first_iteration != expected:
                raise ContiguityError(expected=expected, got=batch.first_iteration)
            buf.chunks[batch.phase].append(block)
            buf.accept_chunks[batch.phase].append(accept)
            buf.counts[batch.phase] += b
            last = buf.counts[batch.phase] - 1
        self.last_ingest_at = time.monotonic()
        self._notify(run.run_id, "appended")
        return last

    def snapshot(self, run_id: str, phase_filter: str = "all") -> StoreSnapshot:
        if phase_filter not in PHASES and phase_filter != "all":
            raise ChainwatchError(f"unknown phase filter {phase_filter!r}")
        run = self._get(run_id)
        lengths: dict[tuple[int, str], int] = {}
        for c, buf in enumerate(run.chains):
            with buf.lock:
                for p in PHASES:
                    lengths[(c, p)] = buf.counts[p]
        return StoreSnapshot(run, lengths, phase_filter)

    def request_stop(self, run_id: str) -> None:
        run = self._get(run_id)
        with run.status_lock:
            run.stop_requested = True

    def read_control(self, run_id: str) -> bool:
        return self._get(run_id).stop_requested

    def finish_run(self, run_id: str, outcome: str) -> str:
        if outcome not in ("finished", "aborted"):
            raise ChainwatchError(f"unknown outcome {outcome!r}")
        run = self._get(run_id)
        with run.status_lock:
            if run.status != "running":
                raise RunFinishedError(f"run {run_id} already {run.status}")
            run.status = outcome
        self._notify(run_id, "finished")
        return run.status
