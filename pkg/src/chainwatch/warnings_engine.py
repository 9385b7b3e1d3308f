"""Heuristic warning rules over diagnostics and the model graph.

Eight rule kinds are evaluated against the latest diagnostics snapshot,
deduplicated per root variable (a shape-[8] variable yields one warning
listing eight indices, never eight warnings), and carry a concrete fix
suggestion; the funnel rule additionally renders a non-centered rewrite
of the offending declaration.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .diagnostics import DiagnosticsSnapshot
from .model import DependencyEdge, ModelDescriptor, SourceSpan, split_flat_name
from .store import RunMetadata

KIND_HIGH_RHAT = "HighRhat"
KIND_BURN_IN = "BurnIn"
KIND_FUNNEL = "FunnelAcceptance"
KIND_LOW_ESS_HIGH_ACC = "LowEssHighAcceptance"
KIND_LOW_ESS_LOW_ACC = "LowEssLowAcceptance"
KIND_STUCK = "StuckChain"
KIND_LOW_ESS_ISOLATED = "LowEssIsolated"
KIND_ACC_ISOLATED = "AcceptanceIsolated"

SUGGESTIONS = {
    KIND_HIGH_RHAT: "See other warnings. Check rank plots.",
    KIND_BURN_IN: "Increase the burn-in period.",
    KIND_FUNNEL: "Reparameterize the model.",
    KIND_LOW_ESS_HIGH_ACC: "Increase the proposer's step size.",
    KIND_LOW_ESS_LOW_ACC: "Lower the proposer's step size.",
    KIND_STUCK: "Check your proposal functions and step size.",
    KIND_LOW_ESS_ISOLATED: "Check other warnings, they might be indicative.",
    KIND_ACC_ISOLATED: "Maybe change the step size.",
}

_SEVERITY_RANK = {"critical": 0, "warn": 1, "info": 2}


@dataclass
class Thresholds:
    """Algorithm-keyed configuration governing every rule trigger."""

    rhat_warn: float = 1.01
    ess_low_per_chain: float = 100.0
    acceptance_bands: dict[str, tuple[float, float]] = field(
        default_factory=lambda: {
            "random_walk_mh": (0.15, 0.45),
            "hmc": (0.60, 0.90),
            "nuts": (0.70, 0.95),
            "other": (0.10, 0.95),
        }
    )
    stuck_window: int = 200
    min_draws_for_warnings: int = 200
    burn_in_full_threshold: float = 1.05
    funnel_score_min: float = 0.2
    acceptance_window: int = 500

    def validate(self) -> None:
        if self.rhat_warn <= 1.0:
            raise ValueError("rhat_warn must be > 1")
        for algo, (low, high) in self.acceptance_bands.items():
            if not (0.0 <= low < high <= 1.0):
                raise ValueError(f"acceptance band for {algo!r} must satisfy 0 <= low < high <= 1")

    def band_for(self, algorithm: str) -> tuple[float, float]:
        return self.acceptance_bands.get(algorithm, self.acceptance_bands["other"])


@dataclass(frozen=True)
class FunnelCandidate:
    """A latent parent reaching a latent child's scale slot, possibly through deterministic nodes."""

    parent: str
    child: str
    path: tuple[DependencyEdge, ...]

    @property
    def scale_input(self) -> str:
        """The variable wired directly into the child's scale slot."""
        return self.path[-1].parent


@dataclass(frozen=True)
class AffectedVariable:
    name: str
    indices: tuple[int, ...] = ()


@dataclass
class Warning:
    id: str
    kind: str
    severity: str
    variables: tuple[AffectedVariable, ...]
    chains: tuple[int, ...]
    evidence: dict[str, float]
    message: str
    suggestion: str
    suggested_code: Optional[str] = None
    source_span: Optional[SourceSpan] = None
    first_seen: int = 0
    last_seen: int = 0
    status: str = "active"


@dataclass
class WarningDiff:
    new: list[Warning] = field(default_factory=list)
    persisting: list[Warning] = field(default_factory=list)
    resolved: list[Warning] = field(default_factory=list)


def _warning_id(kind: str, variables: Sequence[AffectedVariable], chains: Sequence[int]) -> str:
    key = f"{kind}|{','.join(v.name for v in variables)}|{','.join(map(str, chains))}"
    return hashlib.sha1(key.encode()).hexdigest()[:12]


def _make(kind, variables, chains, evidence, message, severity=None, **extra) -> Warning:
    variables = tuple(variables)
    chains = tuple(sorted(chains))
    return Warning(
        id=_warning_id(kind, variables, chains),
        kind=kind,
        severity=severity or {"FunnelAcceptance": "critical", "StuckChain": "critical"}.get(
            kind, "info" if kind in (KIND_LOW_ESS_ISOLATED, KIND_ACC_ISOLATED) else "warn"
        ),
        variables=variables,
        chains=chains,
        evidence=evidence,
        message=message,
        suggestion=SUGGESTIONS[kind],
        **extra,
    )


def funnel_static_detect(descriptor: ModelDescriptor) -> list[FunnelCandidate]:
    """Find every latent parent that controls a latent child's scale.

    Walks backwards from each scale edge through chains of deterministic
    nodes; each (parent, child) pair is reported once with a shortest
    path.
    """
    found: dict[tuple[str, str], FunnelCandidate] = {}
    for edge in descriptor.edges:
        if edge.slot != "scale" or descriptor.variable(edge.child).kind != "latent":
            continue
        queue: list[tuple[str, tuple[DependencyEdge, ...]]] = [(edge.parent, (edge,))]
        visited = {edge.parent}
        while queue:
            node, path = queue.pop(0)
            decl = descriptor.variable(node)
            if decl.kind == "latent":
                key = (node, edge.child)
                if key not in found:
                    found[key] = FunnelCandidate(parent=node, child=edge.child, path=path)
                continue
            if decl.kind != "deterministic":
                continue
            for up in descriptor.parents_of(node, slot="deterministic_input"):
                if up.parent not in visited:
                    visited.add(up.parent)
                    queue.append((up.parent, (up,) + path))
    return sorted(found.values(), key=lambda c: (c.parent, c.child))


def funnel_score_pairs(candidates: Sequence[FunnelCandidate]) -> list[tuple[tuple[str, str], str, str]]:
    """Score requests for diagnostics.build_snapshot: key, scale input, child."""
    return [((c.parent, c.child), c.scale_input, c.child) for c in candidates]


def render_reparameterization(candidate: FunnelCandidate, descriptor: ModelDescriptor) -> Optional[str]:
    """Non-centered rewrite template for the candidate's child, or None.

    Requires a location parent on the child; the child is redefined as
    location + scale * Z with Z standard normal of the child's shape.
    """
    loc_edges = descriptor.parents_of(candidate.child, slot="location")
    if not loc_edges:
        return None
    child = descriptor.variable(candidate.child)
    location = " + ".join(e.parent for e in loc_edges)
    scale = candidate.scale_input
    aux = "Z"
    taken = {v.name for v in descriptor.variables}
    if aux in taken:
        aux = f"{candidate.child}_raw"
    shape_suffix = f", shape={tuple(child.shape)}" if child.shape else ""
    return (
        f"{aux} ~ Normal(0, 1){shape_suffix}\n"
        f"{candidate.child} = {location} + {scale} * {aux}"
    )


def _group_by_root(diag: DiagnosticsSnapshot) -> dict[str, list[tuple[str, Optional[int], object]]]:
    """Root variable -> [(flat_name, flat_index_within_root, ALL-row)] in stats order."""
    grouped: dict[str, list[tuple[str, Optional[int], object]]] = {}
    for row in diag.stats:
        if row.chain is not None:
            continue
        root, idx = split_flat_name(row.variable)
        grouped.setdefault(root, []).append((row.variable, idx, row))
    return grouped


def evaluate(
    diag: DiagnosticsSnapshot,
    candidates: Sequence[FunnelCandidate],
    thresholds: Thresholds,
    metadata: RunMetadata,
    descriptor: Optional[ModelDescriptor] = None,
) -> list[Warning]:
    """Run the full rule table; pure function of its inputs.

    Gated on min_draws_for_warnings post-tune draws per chain. Per root
    variable at most one of {FunnelAcceptance, LowEssHighAcceptance,
    LowEssLowAcceptance, LowEssIsolated} fires (in that priority);
    AcceptanceIsolated is suppressed when any of rules 3-5 already blamed
    a chain it would point at; HighRhat, BurnIn and StuckChain are
    independent.
    """
    counts = diag.sample_counts
    if not counts or min(counts.values()) < thresholds.min_draws_for_warnings:
        return []
    iteration = max(0, max(counts.values()) - 1)
    n_chains = diag.n_chains
    all_chains = tuple(range(n_chains))
    ess_floor = thresholds.ess_low_per_chain * n_chains
    band_low, band_high = thresholds.band_for(metadata.algorithm)

    rates = {c: r for c, r in diag.acceptance_windowed.items() if r is not None}
    mean_rate = sum(rates.values()) / len(rates) if rates else None
    out_low = mean_rate is not None and mean_rate < band_low
    out_high = mean_rate is not None and mean_rate > band_high
    low_chains = tuple(sorted(c for c, r in rates.items() if r < band_low))
    high_chains = tuple(sorted(c for c, r in rates.items() if r > band_high))
    out_chains = tuple(sorted(set(low_chains) | set(high_chains)))

    # Static detection decides candidacy; the sampled funnel score rides along as
    # evidence (and gates the pair-plot hint upstream), never the trigger itself.
    active_candidates: dict[str, list[FunnelCandidate]] = {}
    for cand in candidates:
        active_candidates.setdefault(cand.child, []).append(cand)

    warnings: list[Warning] = []
    for root, flats in _group_by_root(diag).items():
        indices_of = lambda hits: tuple(i for _, i, _ in hits if i is not None)  # noqa: E731

        high = [(f, i, r) for f, i, r in flats if r.rhat is not None and r.rhat > thresholds.rhat_warn]
        if high:
            worst = max(r.rhat for _, _, r in high)
            warnings.append(_make(
                KIND_HIGH_RHAT,
                [AffectedVariable(root, indices_of(high))],
                all_chains,
                {"rhat": worst, "rhat_warn": thresholds.rhat_warn},
                f"Split rank-normalized R-hat reaches {worst:.4f} (> {thresholds.rhat_warn}) for {root}; "
                "the chains disagree about this variable's distribution.",
            ))

        burn_hits = []
        for f, i, _ in flats:
            prof = diag.burn_in.get(f)
            if prof is None:
                continue
            full, tail = prof
            if (not full.degenerate and full.value > thresholds.burn_in_full_threshold
                    and not tail.degenerate and tail.value <= thresholds.rhat_warn):
                burn_hits.append((f, i, full.value, tail.value))
        if burn_hits:
            f, i, full_v, tail_v = max(burn_hits, key=lambda h: h[2])
            warnings.append(_make(
                KIND_BURN_IN,
                [AffectedVariable(root, tuple(h[1] for h in burn_hits if h[1] is not None))],
                all_chains,
                {"rhat_full": full_v, "rhat_tail": tail_v,
                 "burn_in_full_threshold": thresholds.burn_in_full_threshold},
                f"R-hat for {root} is {full_v:.4f} over all retained draws but {tail_v:.4f} over the "
                "trailing half; the first part of the chain looks like an unconverged transient.",
            ))

        ess_low = [(f, i, r) for f, i, r in flats if r.ess_bulk is not None and r.ess_bulk < ess_floor]
        min_ess = min((r.ess_bulk for _, _, r in ess_low), default=None)
        cands = active_candidates.get(root, [])
        if cands and (out_low or out_high or ess_low):
            parents = ", ".join(c.parent for c in cands)
            evidence: dict[str, float] = {"band_low": band_low, "band_high": band_high}
            score = max((diag.funnel_scores.get((c.parent, c.child)) or 0.0 for c in cands), default=0.0)
            if diag.funnel_scores.get((cands[0].parent, cands[0].child)) is not None:
                evidence["funnel_score"] = score
            if mean_rate is not None:
                evidence["acceptance_rate"] = mean_rate
            if min_ess is not None:
                evidence["ess_bulk"] = min_ess
            span = None
            code = None
            if descriptor is not None:
                code = render_reparameterization(cands[0], descriptor)
                span = descriptor.variable(root).source_span
            affected = indices_of(ess_low) or tuple(i for _, i, _ in flats if i is not None)
            symptom = []
            if out_low or out_high:
                symptom.append(f"acceptance {mean_rate:.2f} outside [{band_low}, {band_high}]")
            if ess_low:
                symptom.append(f"effective sample size down to {min_ess:.0f}")
            warnings.append(_make(
                KIND_FUNNEL,
                [AffectedVariable(root, affected)],
                out_chains if (out_low or out_high) else all_chains,
                evidence,
                f"{parents} drives the scale of {root}, a funnel-shaped geometry the sampler is "
                f"struggling with ({'; '.join(symptom)}).",
                suggested_code=code,
                source_span=span,
            ))
        elif ess_low and out_high:
            warnings.append(_make(
                KIND_LOW_ESS_HIGH_ACC,
                [AffectedVariable(root, indices_of(ess_low))],
                high_chains,
                {"ess_bulk": min_ess, "ess_floor": ess_floor, "acceptance_rate": mean_rate,
                 "band_high": band_high},
                f"Effective sample size for {root} is {min_ess:.0f} (< {ess_floor:.0f}) while acceptance "
                f"{mean_rate:.2f} sits above the band; steps are too timid and draws are highly correlated.",
            ))
        elif ess_low and out_low:
            warnings.append(_make(
                KIND_LOW_ESS_LOW_ACC,
                [AffectedVariable(root, indices_of(ess_low))],
                low_chains,
                {"ess_bulk": min_ess, "ess_floor": ess_floor, "acceptance_rate": mean_rate,
                 "band_low": band_low},
                f"Effective sample size for {root} is {min_ess:.0f} (< {ess_floor:.0f}) while acceptance "
                f"{mean_rate:.2f} sits below the band; most proposals are being rejected.",
            ))
        elif ess_low:
            warnings.append(_make(
                KIND_LOW_ESS_ISOLATED,
                [AffectedVariable(root, indices_of(ess_low))],
                all_chains,
                {"ess_bulk": min_ess, "ess_floor": ess_floor},
                f"Effective sample size for {root} is {min_ess:.0f} (< {ess_floor:.0f}); draws are "
                "highly autocorrelated but acceptance looks normal.",
            ))

    stuck_chains = tuple(sorted(c for c, run in diag.stuck.items() if run >= thresholds.stuck_window))
    if stuck_chains:
        longest = max(diag.stuck[c] for c in stuck_chains)
        warnings.append(_make(
            KIND_STUCK,
            [],
            stuck_chains,
            {"stuck_run_length": float(longest), "stuck_window": float(thresholds.stuck_window)},
            f"Chain{'s' if len(stuck_chains) > 1 else ''} {', '.join(map(str, stuck_chains))} "
            f"ha{'ve' if len(stuck_chains) > 1 else 's'} not accepted a proposal for {longest} "
            "consecutive iterations.",
        ))

    if (out_low or out_high):
        blamed = {
            c
            for w in warnings
            if w.kind in (KIND_FUNNEL, KIND_LOW_ESS_HIGH_ACC, KIND_LOW_ESS_LOW_ACC)
            for c in w.chains
        }
        if not blamed.intersection(out_chains):
            warnings.append(_make(
                KIND_ACC_ISOLATED,
                [],
                out_chains,
                {"acceptance_rate": mean_rate, "band_low": band_low, "band_high": band_high},
                f"Acceptance rate {mean_rate:.2f} is outside the {metadata.algorithm} band "
                f"[{band_low}, {band_high}] but sampling efficiency looks otherwise fine.",
            ))

    for w in warnings:
        w.first_seen = iteration
        w.last_seen = iteration
    warnings.sort(key=lambda w: (_SEVERITY_RANK[w.severity], w.kind,
                                 w.variables[0].name if w.variables else "", w.chains))
    return warnings


def diff_warnings(previous: Sequence[Warning], current: Sequence[Warning]) -> WarningDiff:
    """Lifecycle diff keyed by Warning.id; resolved entries keep their last state."""
    prev_by_id = {w.id: w for w in previous}
    curr_ids = {w.id for w in current}
    diff = WarningDiff()
    for w in current:
        if w.id in prev_by_id:
            diff.persisting.append(replace(w, first_seen=prev_by_id[w.id].first_seen))
        else:
            diff.new.append(w)
    for w in previous:
        if w.id not in curr_ids:
            diff.resolved.append(replace(w, status="resolved"))
    return diff
