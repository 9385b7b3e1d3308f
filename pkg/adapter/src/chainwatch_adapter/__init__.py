"""Bridge a PPL's per-iteration callback into a chainwatch engine."""
from .bridge import AdapterConfig, SamplingMonitor, StopInference, attach
from .descriptor import SLOT_TABLE, build_descriptor, slot_for

__all__ = [
    "AdapterConfig",
    "SamplingMonitor",
    "StopInference",
    "attach",
    "build_descriptor",
    "slot_for",
    "SLOT_TABLE",
]
