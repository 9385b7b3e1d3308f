"""Streaming bridge: buffers per-iteration draws, speaks the wire protocol.

Fail-open by design: a debugger must never corrupt the run it watches.
Any engine error logs a warning, disables the bridge, and sampling
continues untouched. The stop latch is polled at batch boundaries (and
at most once per poll period); when raised, the bridge interrupts the
sampler with StopInference, which subclasses KeyboardInterrupt because
that is the interrupt every mainstream PPL already turns into a clean
early abort.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import httpx
import numpy as np

from .descriptor import build_descriptor, sampled_names

log = logging.getLogger("chainwatch_adapter")

PROTOCOL_VERSION = 1
ENGINE_URL_ENV = "CHAINWATCH_ENGINE_URL"


class StopInference(KeyboardInterrupt):
    """Raised inside the sampler's callback when the engine latched stop."""


@dataclass
class AdapterConfig:
    engine_url: str = ""
    batch_size: int = 50
    control_poll_period: float = 1.0
    run_label: str = ""
    timeout: float = 5.0

    def __post_init__(self):
        if not self.engine_url:
            self.engine_url = os.environ.get(ENGINE_URL_ENV, "http://127.0.0.1:8000")
        if self.batch_size < 1 or self.control_poll_period <= 0:
            raise ValueError("batch_size and control_poll_period must be positive")


@dataclass
class _ChainBuffer:
    phase: str = "tune"
    next_iteration: dict[str, int] = field(default_factory=lambda: {"tune": 0, "sample": 0})
    rows: list[dict[str, np.ndarray]] = field(default_factory=list)
    accept: list[float] = field(default_factory=list)


class SamplingMonitor:
    """Hooks a PPL's per-iteration callback into a chainwatch engine."""

    def __init__(
        self,
        model,
        config: Optional[AdapterConfig] = None,
        *,
        algorithm: str = "other",
        n_chains: int = 1,
        n_tune: int = 0,
        n_draws: int = 1,
        hyperparameters: Optional[dict[str, float]] = None,
        client: Optional[httpx.Client] = None,
    ):
        self.config = config or AdapterConfig()
        self.model = model
        self.disabled = False
        self.run_id: Optional[str] = None
        self._stop_latched = False
        self._last_poll = 0.0
        self._names = sampled_names(model)
        self._chains = {c: _ChainBuffer() for c in range(n_chains)}
        self._client = client or httpx.Client(
            base_url=self.config.engine_url, timeout=self.config.timeout
        )
        self._metadata = {
            "algorithm": algorithm,
            "n_chains": n_chains,
            "n_tune": n_tune,
            "n_draws_planned": n_draws,
            "hyperparameters": dict(hyperparameters or {}),
            "started_at": "",
        }

    # -- wire helpers, all fail-open ------------------------------------------
    def _post(self, path: str, payload: dict) -> Optional[dict]:
        if self.disabled:
            return None
        try:
            resp = self._client.post(path, json={"protocol_version": PROTOCOL_VERSION,
                                                 "payload": payload})
            if resp.status_code >= 400:
                raise httpx.HTTPStatusError(resp.text, request=resp.request, response=resp)
            return resp.json()["payload"]
        except Exception as exc:
            self._disable(exc)
            return None

    def _disable(self, exc: Exception) -> None:
        if not self.disabled:
            log.warning("chainwatch engine unavailable, monitoring disabled: %s", exc)
            self.disabled = True

    def start(self) -> Optional[str]:
        payload = {"descriptor": build_descriptor(self.model), "metadata": self._metadata}
        out = self._post("/api/v1/runs", payload)
        if out is not None:
            self.run_id = out["run_id"]
            log.info("chainwatch run %s registered", self.run_id)
        return self.run_id

    # -- sampler-facing surface -------------------------------------------------
    def record(self, chain: int, phase: str, values: dict, accepted: float | bool) -> None:
        """Append one iteration; flushes and polls control at batch boundaries.

        ``values`` maps variable names to scalars or arrays (the variable's
        declared shape). Raises StopInference when the engine latched stop;
        any other problem disables the bridge and lets sampling continue.
        """
        if self.disabled or self.run_id is None:
            return
        try:
            buf = self._chains[chain]
            if phase != buf.phase:
                self._flush(chain)  # phase switch closes the open batch
                buf.phase = phase
            row = {}
            for name in self._names:
                if name not in values:
                    raise ValueError(f"callback omitted variable {name!r}")
                row[name] = np.asarray(values[name], dtype=np.float64).reshape(-1)
            buf.rows.append(row)
            buf.accept.append(float(accepted))
            if len(buf.rows) >= self.config.batch_size:
                self._flush(chain)
                self._maybe_check_stop()
        except StopInference:
            raise
        except Exception as exc:
            self._disable(exc)

    def _flush(self, chain: int) -> None:
        buf = self._chains[chain]
        if not buf.rows or self.disabled or self.run_id is None:
            buf.rows, buf.accept = [], []
            return
        first = buf.next_iteration[buf.phase]
        payload = {
            "chain": chain,
            "phase": buf.phase,
            "first_iteration": first,
            "draws": {
                name: [row[name].tolist() for row in buf.rows] for name in self._names
            },
            "accept": list(buf.accept),
        }
        out = self._post(f"/api/v1/runs/{self.run_id}/batches", payload)
        if out is not None:
            buf.next_iteration[buf.phase] = first + len(buf.rows)
        buf.rows, buf.accept = [], []

    def _maybe_check_stop(self) -> None:
        now = time.monotonic()
        if now - self._last_poll < self.config.control_poll_period and self._stop_latched is False:
            return
        self._last_poll = now
        if self.disabled or self.run_id is None:
            return
        try:
            resp = self._client.get(f"/api/v1/runs/{self.run_id}/control")
            resp.raise_for_status()
            if resp.json()["payload"]["stop"]:
                self._stop_latched = True
        except StopInference:
            raise
        except Exception as exc:
            self._disable(exc)
            return
        if self._stop_latched:
            raise StopInference("stop requested from the debugger")

    def finish(self, aborted: bool = False) -> None:
        """Flush every chain and close the run; safe to call twice."""
        if self.run_id is None:
            return
        for chain in self._chains:
            self._flush(chain)
        self._post(f"/api/v1/runs/{self.run_id}/finish",
                   {"outcome": "aborted" if aborted else "finished"})
        self.run_id = None


def attach(model, sampler, config: Optional[AdapterConfig] = None, **run_kwargs):
    """Wrap a sampling callable so it streams to the engine and honors stop.

    ``sampler`` is invoked as ``sampler(monitor)`` and drives its PPL's
    sampling loop, calling ``monitor.record(...)`` per iteration. The
    wrapper registers the run, translates a latched stop into an aborted
    finish, and never lets engine trouble break the sampling call.
    """
    def wrapped():
        monitor = SamplingMonitor(model, config, **run_kwargs)
        monitor.start()
        try:
            result = sampler(monitor)
        except StopInference:
            monitor.finish(aborted=True)
            return None
        monitor.finish(aborted=False)
        return result

    return wrapped
