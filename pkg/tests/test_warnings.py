import numpy as np
import pytest

from chainwatch.diagnostics import DiagnosticsSnapshot, RhatResult, VariableChainStats
from chainwatch.model import DependencyEdge, ModelDescriptor, SourceSpan, VariableDecl
from chainwatch.store import RunMetadata
from chainwatch.warnings_engine import (
    SUGGESTIONS,
    FunnelCandidate,
    Thresholds,
    diff_warnings,
    evaluate,
    funnel_static_detect,
    render_reparameterization,
)

from test_model import schools_descriptor


def noncentered_descriptor():
    return ModelDescriptor(
        variables=(
            VariableDecl("mu", "latent", "Normal"),
            VariableDecl("tau", "latent", "HalfCauchy", support="positive"),
            VariableDecl("Z", "latent", "Normal", shape=(8,)),
            VariableDecl("theta", "deterministic", None, shape=(8,)),
            VariableDecl("y", "observed", "Normal", shape=(8,)),
        ),
        edges=(
            DependencyEdge("mu", "theta", "deterministic_input"),
            DependencyEdge("tau", "theta", "deterministic_input"),
            DependencyEdge("Z", "theta", "deterministic_input"),
            DependencyEdge("theta", "y", "location"),
        ),
    )


# --- static funnel detection ---------------------------------------------------

def test_centered_schools_candidate_found():
    cands = funnel_static_detect(schools_descriptor())
    assert [(c.parent, c.child) for c in cands] == [("tau", "theta")]
    assert cands[0].path[-1].slot == "scale"
    assert cands[0].scale_input == "tau"


def test_noncentered_schools_no_candidate():
    assert funnel_static_detect(noncentered_descriptor()) == []


def test_empty_edges_no_candidate():
    d = ModelDescriptor(variables=(VariableDecl("a", "latent", "Normal"),))
    assert funnel_static_detect(d) == []


def test_candidate_through_deterministic_node():
    d = ModelDescriptor(
        variables=(
            VariableDecl("m", "latent", "Normal"),
            VariableDecl("s", "latent", "HalfNormal", support="positive"),
            VariableDecl("s2", "deterministic", None, support="positive"),
            VariableDecl("w", "latent", "Normal", shape=(3,), source_span=SourceSpan("m.py", 8, 8)),
        ),
        edges=(
            DependencyEdge("s", "s2", "deterministic_input"),
            DependencyEdge("s2", "w", "scale"),
            DependencyEdge("m", "w", "location"),
        ),
    )
    cands = funnel_static_detect(d)
    assert [(c.parent, c.child) for c in cands] == [("s", "w")]
    assert [e.parent for e in cands[0].path] == ["s", "s2"]
    assert cands[0].scale_input == "s2"
    code = render_reparameterization(cands[0], d)
    assert "Z ~ Normal(0, 1), shape=(3,)" in code
    assert "w = m + s2 * Z" in code


def test_observed_scale_child_not_a_candidate():
    d = ModelDescriptor(
        variables=(
            VariableDecl("sigma", "latent", "HalfNormal", support="positive"),
            VariableDecl("y", "observed", "Normal", shape=(4,)),
        ),
        edges=(DependencyEdge("sigma", "y", "scale"),),
    )
    assert funnel_static_detect(d) == []


def test_each_pair_reported_once():
    d = ModelDescriptor(
        variables=(
            VariableDecl("s", "latent", "HalfNormal", support="positive"),
            VariableDecl("a", "deterministic", None),
            VariableDecl("b", "deterministic", None),
            VariableDecl("w", "latent", "Normal"),
        ),
        edges=(
            DependencyEdge("s", "a", "deterministic_input"),
            DependencyEdge("s", "b", "deterministic_input"),
            DependencyEdge("a", "w", "scale"),
            DependencyEdge("b", "w", "scale"),
        ),
    )
    assert [(c.parent, c.child) for c in funnel_static_detect(d)] == [("s", "w")]


# --- reparameterization rendering ------------------------------------------------

def test_render_eight_schools_template():
    d = schools_descriptor()
    cand = funnel_static_detect(d)[0]
    code = render_reparameterization(cand, d)
    assert code == "Z ~ Normal(0, 1), shape=(8,)\ntheta = mu + tau * Z"


def test_render_without_location_parent_returns_none():
    d = ModelDescriptor(
        variables=(
            VariableDecl("s", "latent", "HalfNormal", support="positive"),
            VariableDecl("w", "latent", "Normal"),
        ),
        edges=(DependencyEdge("s", "w", "scale"),),
    )
    cand = funnel_static_detect(d)[0]
    assert render_reparameterization(cand, d) is None


def test_render_avoids_name_collision():
    d = ModelDescriptor(
        variables=(
            VariableDecl("Z", "latent", "Normal"),
            VariableDecl("m", "latent", "Normal"),
            VariableDecl("s", "latent", "HalfNormal", support="positive"),
            VariableDecl("w", "latent", "Normal"),
        ),
        edges=(DependencyEdge("s", "w", "scale"), DependencyEdge("m", "w", "location")),
    )
    cand = funnel_static_detect(d)[0]
    code = render_reparameterization(cand, d)
    assert "w_raw ~ Normal(0, 1)" in code


# --- synthetic snapshot builder ----------------------------------------------------

def make_diag(
    variables: dict,
    n_chains: int = 4,
    count: int = 1000,
    acceptance: float = 0.75,
    stuck: int = 0,
    burn_in: dict | None = None,
    scores: dict | None = None,
) -> DiagnosticsSnapshot:
    """variables: flat name -> dict(rhat=, ess=, degenerate=)."""
    stats = []
    for name, spec in variables.items():
        stats.append(VariableChainStats(
            variable=name, chain=None, n=count * n_chains,
            mean=0.0, sd=1.0,
            rhat=spec.get("rhat"), ess_bulk=spec.get("ess"),
            acceptance_rate=None, degenerate=spec.get("degenerate", False),
        ))
        for c in range(n_chains):
            stats.append(VariableChainStats(
                variable=name, chain=c, n=count, mean=0.0, sd=1.0,
                rhat=None, ess_bulk=spec.get("ess"), acceptance_rate=acceptance,
                degenerate=spec.get("degenerate", False),
            ))
    return DiagnosticsSnapshot(
        run_id="run-test",
        algorithm="hmc",
        n_chains=n_chains,
        sample_counts={c: count for c in range(n_chains)},
        frontier_iteration=count,
        stats=stats,
        burn_in={
            name: (RhatResult(v[0], False), RhatResult(v[1], False))
            for name, v in (burn_in or {}).items()
        },
        acceptance_windowed={c: acceptance for c in range(n_chains)},
        stuck={c: (stuck if c == 0 else 0) for c in range(n_chains)},
        funnel_scores=scores or {},
    )


META = RunMetadata(algorithm="hmc", n_chains=4, n_tune=100, n_draws_planned=1000)
TAU_THETA = FunnelCandidate("tau", "theta", (DependencyEdge("tau", "theta", "scale"),))
OK = {"rhat": 1.0, "ess": 3000.0}


def kinds(warnings):
    return sorted(w.kind for w in warnings)


# --- rule table ------------------------------------------------------------------

def test_all_clear_produces_no_warnings():
    diag = make_diag({"x": dict(OK)})
    assert evaluate(diag, [], Thresholds(), META) == []


def test_high_rhat_fires_independently():
    diag = make_diag({"x": {"rhat": 1.02, "ess": 3000.0}})
    (w,) = evaluate(diag, [], Thresholds(), META)
    assert w.kind == "HighRhat"
    assert w.suggestion == "See other warnings. Check rank plots."
    assert w.evidence["rhat"] == 1.02


def test_burn_in_rule():
    diag = make_diag({"x": dict(OK)}, burn_in={"x": (1.2, 1.003)})
    (w,) = evaluate(diag, [], Thresholds(), META)
    assert w.kind == "BurnIn"
    assert w.suggestion == "Increase the burn-in period."
    assert w.evidence["rhat_full"] == 1.2 and w.evidence["rhat_tail"] == 1.003


def test_burn_in_requires_recovered_tail():
    diag = make_diag({"x": {"rhat": 1.2, "ess": 3000.0}}, burn_in={"x": (1.2, 1.15)})
    assert kinds(evaluate(diag, [], Thresholds(), META)) == ["HighRhat"]


def test_funnel_with_low_child_ess():
    diag = make_diag({"theta[0]": {"rhat": 1.0, "ess": 50.0}}, acceptance=0.75,
                     scores={("tau", "theta"): 0.6})
    (w,) = evaluate(diag, [TAU_THETA], Thresholds(), META)
    assert w.kind == "FunnelAcceptance" and w.severity == "critical"
    assert w.suggestion == "Reparameterize the model."
    assert w.evidence["funnel_score"] == 0.6
    assert w.evidence["ess_bulk"] == 50.0


def test_funnel_with_out_of_band_acceptance_only():
    diag = make_diag({"theta[0]": dict(OK)}, acceptance=0.30, scores={("tau", "theta"): 0.5})
    got = evaluate(diag, [TAU_THETA], Thresholds(), META)
    assert kinds(got) == ["FunnelAcceptance"]  # rule 8 suppressed by rule 3 on the same chains


def test_funnel_quiet_when_no_symptom():
    diag = make_diag({"theta[0]": dict(OK)}, acceptance=0.75, scores={("tau", "theta"): 0.9})
    assert evaluate(diag, [TAU_THETA], Thresholds(), META) == []


def test_low_ess_high_acceptance():
    diag = make_diag({"x": {"rhat": 1.0, "ess": 100.0}}, acceptance=0.97)
    (w,) = evaluate(diag, [], Thresholds(), META)
    assert w.kind == "LowEssHighAcceptance"
    assert w.suggestion == "Increase the proposer's step size."


def test_low_ess_low_acceptance():
    diag = make_diag({"x": {"rhat": 1.0, "ess": 100.0}}, acceptance=0.2)
    (w,) = evaluate(diag, [], Thresholds(), META)
    assert w.kind == "LowEssLowAcceptance"
    assert w.suggestion == "Lower the proposer's step size."


def test_low_ess_isolated():
    diag = make_diag({"x": {"rhat": 1.0, "ess": 100.0}}, acceptance=0.75)
    (w,) = evaluate(diag, [], Thresholds(), META)
    assert w.kind == "LowEssIsolated"
    assert w.suggestion == "Check other warnings, they might be indicative."


def test_acceptance_isolated():
    diag = make_diag({"x": dict(OK)}, acceptance=0.97)
    (w,) = evaluate(diag, [], Thresholds(), META)
    assert w.kind == "AcceptanceIsolated"
    assert w.suggestion == "Maybe change the step size."
    assert w.variables == ()


def test_stuck_chain():
    diag = make_diag({"x": dict(OK)}, stuck=250)
    (w,) = evaluate(diag, [], Thresholds(), META)
    assert w.kind == "StuckChain" and w.severity == "critical"
    assert w.suggestion == "Check your proposal functions and step size."
    assert w.chains == (0,)
    assert w.evidence["stuck_run_length"] == 250.0


def test_stuck_respects_window_threshold():
    diag = make_diag({"x": dict(OK)}, stuck=150)
    assert evaluate(diag, [], Thresholds(), META) == []
    assert kinds(evaluate(diag, [], Thresholds(stuck_window=100), META)) == ["StuckChain"]


def test_exclusivity_of_efficiency_rules():
    # any combination of symptoms yields at most one of the four per root
    for acc in (0.2, 0.75, 0.97):
        for ess in (100.0, 3000.0):
            for cands in ([], [TAU_THETA]):
                diag = make_diag({"theta[0]": {"rhat": 1.0, "ess": ess}}, acceptance=acc,
                                 scores={("tau", "theta"): 0.5} if cands else {})
                got = evaluate(diag, cands, Thresholds(), META)
                eff = [w for w in got if w.kind in (
                    "FunnelAcceptance", "LowEssHighAcceptance", "LowEssLowAcceptance", "LowEssIsolated")]
                assert len(eff) <= 1


def test_aggregation_one_warning_eight_indices():
    diag = make_diag({f"theta[{i}]": {"rhat": 1.0, "ess": 50.0} for i in range(8)}, acceptance=0.75)
    got = evaluate(diag, [], Thresholds(), META)
    assert len(got) == 1
    (w,) = got
    assert w.variables[0].name == "theta"
    assert w.variables[0].indices == tuple(range(8))


def test_gating_below_min_draws():
    diag = make_diag({"x": {"rhat": 3.0, "ess": 2.0}}, acceptance=0.01, stuck=500, count=150)
    assert evaluate(diag, [TAU_THETA], Thresholds(), META) == []


def test_degenerate_rows_never_fire():
    diag = make_diag({"x": {"rhat": None, "ess": None, "degenerate": True}})
    assert evaluate(diag, [], Thresholds(), META) == []


def test_custom_band_keyed_by_algorithm():
    meta = RunMetadata(algorithm="random_walk_mh", n_chains=4, n_tune=0, n_draws_planned=1000)
    diag = make_diag({"x": dict(OK)}, acceptance=0.5)  # outside MH band [0.15, 0.45]
    (w,) = evaluate(diag, [], Thresholds(), meta)
    assert w.kind == "AcceptanceIsolated"
    # same rate is inside the unknown-algorithm fallback band
    meta2 = RunMetadata(algorithm="mystery", n_chains=4, n_tune=0, n_draws_planned=1000)
    assert evaluate(diag, [], Thresholds(), meta2) == []


def test_verbatim_suggestion_table():
    assert SUGGESTIONS["BurnIn"] == "Increase the burn-in period."
    assert SUGGESTIONS["FunnelAcceptance"] == "Reparameterize the model."
    assert SUGGESTIONS["LowEssHighAcceptance"] == "Increase the proposer's step size."
    assert SUGGESTIONS["LowEssLowAcceptance"] == "Lower the proposer's step size."
    assert SUGGESTIONS["StuckChain"] == "Check your proposal functions and step size."
    assert SUGGESTIONS["LowEssIsolated"] == "Check other warnings, they might be indicative."
    assert SUGGESTIONS["AcceptanceIsolated"] == "Maybe change the step size."


def test_evaluate_is_deterministic():
    diag = make_diag({"x": {"rhat": 1.2, "ess": 10.0}, "y[0]": {"rhat": 1.5, "ess": 5.0}},
                     acceptance=0.3, stuck=400)
    a = evaluate(diag, [], Thresholds(), META)
    b = evaluate(diag, [], Thresholds(), META)
    assert [(w.id, w.kind, w.evidence) for w in a] == [(w.id, w.kind, w.evidence) for w in b]


# --- warning lifecycle -------------------------------------------------------------

def _warning(kind, name="x"):
    diag = make_diag({name: {"rhat": 1.5, "ess": 3000.0}})
    return evaluate(diag, [], Thresholds(), META)[0]


def test_diff_new_persisting_resolved():
    a = _warning("HighRhat", "a")
    b = _warning("HighRhat", "b")
    c = _warning("HighRhat", "c")
    diff = diff_warnings([a, b], [b, c])
    assert [w.id for w in diff.new] == [c.id]
    assert [w.id for w in diff.persisting] == [b.id]
    assert [w.id for w in diff.resolved] == [a.id]
    assert diff.resolved[0].status == "resolved"


def test_diff_identical_lists_all_persisting():
    a = _warning("HighRhat", "a")
    diff = diff_warnings([a], [a])
    assert not diff.new and not diff.resolved
    assert [w.id for w in diff.persisting] == [a.id]


def test_diff_empty_previous_all_new():
    a = _warning("HighRhat", "a")
    diff = diff_warnings([], [a])
    assert [w.id for w in diff.new] == [a.id]


def test_diff_preserves_first_seen():
    old = _warning("HighRhat", "a")
    old.first_seen = 100
    new = _warning("HighRhat", "a")
    new.first_seen = 900
    new.last_seen = 900
    diff = diff_warnings([old], [new])
    assert diff.persisting[0].first_seen == 100
    assert diff.persisting[0].last_seen == 900
