"""Append-only JSONL run logs: one JSON object per line, replayable.

A log is self-contained: a create_run record (descriptor + metadata +
issued run_id), the batch records in ingest order, and a finish record.
Replaying the same log always rebuilds identical run state.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator, Optional

from .errors import ChainwatchError
from .model import ModelDescriptor
from .store import RunMetadata, SampleBatch
from . import wire


class RunLogWriter:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def _write(self, record: dict) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def write_create(self, run_id: str, descriptor: ModelDescriptor, metadata: RunMetadata) -> None:
        self._write({
            "kind": "create_run",
            "run_id": run_id,
            "descriptor": wire.descriptor_to_wire(descriptor),
            "metadata": wire.metadata_to_wire(metadata),
        })

    def write_batch(self, batch: SampleBatch) -> None:
        self._write({"kind": "batch", "run_id": batch.run_id, "batch": wire.batch_to_wire(batch)})

    def write_finish(self, run_id: str, outcome: str) -> None:
        self._write({"kind": "finish", "run_id": run_id, "outcome": outcome})

    def close(self) -> None:
        self._fh.close()


class RecordingSink:
    """Tees a sampler stream into a JSONL log while forwarding to another sink."""

    def __init__(self, inner, path: str | Path):
        self.inner = inner
        self.writer = RunLogWriter(path)

    def create_run(self, descriptor, metadata):
        run_id = self.inner.create_run(descriptor, metadata)
        self.writer.write_create(run_id, descriptor, metadata)
        return run_id

    def append(self, batch):
        ack = self.inner.append(batch)
        self.writer.write_batch(batch)
        return ack

    def read_control(self, run_id):
        return self.inner.read_control(run_id)

    def finish(self, run_id, outcome):
        self.inner.finish(run_id, outcome)
        self.writer.write_finish(run_id, outcome)
        self.writer.close()


def iter_log(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ChainwatchError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None


def replay_into_store(path: str | Path, store) -> str:
    """Feed a recorded log into a store; returns the (reused) run_id."""
    run_id: Optional[str] = None
    for lineno, record in iter_log(path):
        kind = record.get("kind")
        try:
            if kind == "create_run":
                payload = wire.CreateRunPayload(
                    descriptor=wire.WireDescriptor(**record["descriptor"]),
                    metadata=wire.WireMetadata(**record["metadata"]),
                )
                run_id = store.create_run(
                    wire.descriptor_from_wire(payload.descriptor),
                    wire.metadata_from_wire(payload.metadata),
                    run_id=record.get("run_id"),
                )
            elif kind == "batch":
                if run_id is None:
                    raise ChainwatchError("batch record before create_run")
                payload = wire.BatchPayload(**record["batch"])
                store.append_batch(wire.batch_from_wire(record.get("run_id", run_id), payload))
            elif kind == "finish":
                if run_id is None:
                    raise ChainwatchError("finish record before create_run")
                store.finish_run(record.get("run_id", run_id), record["outcome"])
            else:
                raise ChainwatchError(f"unknown record kind {kind!r}")
        except ChainwatchError as exc:
            raise ChainwatchError(f"{path}:{lineno}: {exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ChainwatchError(f"{path}:{lineno}: malformed record ({exc})") from None
    if run_id is None:
        raise ChainwatchError(f"{path}: no create_run record found")
    return run_id
