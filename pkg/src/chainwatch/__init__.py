"""Online MCMC inference debugging engine.

Streams sampler state into an append-only run store, computes
convergence diagnostics incrementally, and raises heuristic warnings
with concrete fix suggestions while the run is still in flight.
"""
from .diagnostics import (
    DiagnosticsSnapshot,
    VariableChainStats,
    acceptance_rate,
    build_snapshot,
    bulk_ess,
    burn_in_rhat_profile,
    detect_funnel_sample,
    histogram,
    pair_data,
    rank_histogram,
    split_rank_normalized_rhat,
    stuck_run_length,
    trace_slice,
)
from .errors import ChainwatchError
from .model import DependencyEdge, ModelDescriptor, SourceSpan, VariableDecl
from .store import RunMetadata, RunStore, SampleBatch
from .warnings_engine import (
    FunnelCandidate,
    Thresholds,
    Warning,
    diff_warnings,
    evaluate,
    funnel_static_detect,
    render_reparameterization,
)

__version__ = "0.1.0"

__all__ = [
    "ChainwatchError",
    "DependencyEdge",
    "DiagnosticsSnapshot",
    "FunnelCandidate",
    "ModelDescriptor",
    "RunMetadata",
    "RunStore",
    "SampleBatch",
    "SourceSpan",
    "Thresholds",
    "VariableChainStats",
    "VariableDecl",
    "Warning",
    "acceptance_rate",
    "build_snapshot",
    "bulk_ess",
    "burn_in_rhat_profile",
    "detect_funnel_sample",
    "diff_warnings",
    "evaluate",
    "funnel_static_detect",
    "histogram",
    "pair_data",
    "rank_histogram",
    "render_reparameterization",
    "split_rank_normalized_rhat",
    "stuck_run_length",
    "trace_slice",
    "__version__",
]
