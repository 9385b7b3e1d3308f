"""HTTP sink: streams a sampler run into a remote engine over the wire."""
from __future__ import annotations

from typing import Optional

import httpx

from . import wire
from .errors import ChainwatchError
from .model import ModelDescriptor
from .store import RunMetadata, SampleBatch


class HttpSink:
    """Speaks the versioned wire protocol against a running engine.

    Accepts any httpx-compatible client (the test client included); by
    default opens its own connection to ``base_url``.
    """

    def __init__(self, base_url: str = "", client: Optional[httpx.Client] = None, timeout: float = 30.0):
        if client is None:
            client = httpx.Client(base_url=base_url, timeout=timeout)
        self.client = client

    def _post(self, path: str, payload: dict) -> dict:
        resp = self.client.post(path, json=wire.envelope(payload))
        if resp.status_code >= 400:
            raise ChainwatchError(f"POST {path} -> {resp.status_code}: {resp.text}")
        return resp.json()["payload"]

    def create_run(self, descriptor: ModelDescriptor, metadata: RunMetadata) -> str:
        payload = {
            "descriptor": wire.descriptor_to_wire(descriptor),
            "metadata": wire.metadata_to_wire(metadata),
        }
        return self._post("/api/v1/runs", payload)["run_id"]

    def append(self, batch: SampleBatch) -> int:
        payload = wire.batch_to_wire(batch)
        ack = self._post(f"/api/v1/runs/{batch.run_id}/batches", payload)
        return ack["accepted_through_iteration"]

    def read_control(self, run_id: str) -> bool:
        resp = self.client.get(f"/api/v1/runs/{run_id}/control")
        if resp.status_code >= 400:
            raise ChainwatchError(f"GET control -> {resp.status_code}: {resp.text}")
        return bool(resp.json()["payload"]["stop"])

    def finish(self, run_id: str, outcome: str) -> None:
        self._post(f"/api/v1/runs/{run_id}/finish", {"outcome": outcome})
