"""Acceptance suite: one test per release criterion, tolerances pinned.

Each test prints an `ACCEPTANCE[...] PASS` line (visible with -s / in the
captured section) so the suite doubles as a checklist.
"""
import json
import math
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from chainwatch import wire
from chainwatch.cli import main
from chainwatch.client import HttpSink
from chainwatch.diagnostics import bulk_ess, split_rank_normalized_rhat
from chainwatch.runlog import RecordingSink
from chainwatch.samplers import (
    InProcessSink,
    SamplerConfig,
    _normal_toy,
    builtin_model,
    gradient_check,
    run_sampler,
)
from chainwatch.server import AnalysisSchedule, create_app
from chainwatch.store import RunStore
from chainwatch.warnings_engine import SUGGESTIONS, Thresholds, evaluate, funnel_static_detect

from oracles import rhat_oracle
from test_warnings import make_diag, META, TAU_THETA


def _ok(name: str, detail: str = "") -> None:
    print(f"ACCEPTANCE[{name}] PASS {detail}".rstrip())


def test_rhat_oracle_equivalence():
    """25 randomized small fixtures match the step-by-step oracle to 1e-10, < 5 s."""
    start = time.monotonic()
    rng = np.random.default_rng(20240809)
    worst = 0.0
    for _ in range(25):
        n_chains = int(rng.integers(2, 5))
        n = int(rng.integers(8, 65))
        chains = [list(rng.standard_normal(n)) for _ in range(n_chains)]
        engine = split_rank_normalized_rhat([np.array(c) for c in chains]).value
        oracle = rhat_oracle(chains)[0]
        worst = max(worst, abs(engine - oracle))
        assert abs(engine - oracle) < 1e-10
    elapsed = time.monotonic() - start
    assert elapsed < 5.0
    _ok("rhat-oracle", f"(max |diff|={worst:.2e}, {elapsed:.2f}s)")


def test_rhat_discrimination():
    """iid 4x1000 -> R-hat < 1.01; 10-sigma mean-separated chains -> R-hat > 3."""
    rng = np.random.default_rng(42)
    iid = split_rank_normalized_rhat([rng.standard_normal(1000) for _ in range(4)]).value
    assert iid < 1.01
    separated = split_rank_normalized_rhat(
        [rng.standard_normal(500) + 10.0 * k for k in range(6)]
    ).value
    assert separated > 3.0
    _ok("rhat-discrimination", f"(iid={iid:.4f}, separated={separated:.2f})")


def test_ess_sanity():
    """iid in [N/2, N]; AR(1) rho=0.9 within x2 of ~526; antithetic capped; < 10 s."""
    start = time.monotonic()
    rng = np.random.default_rng(7)
    iid = bulk_ess([rng.standard_normal(1000) for _ in range(4)]).value
    assert 2000.0 <= iid <= 4000.0

    rho, n = 0.9, 10000
    x = np.empty(n)
    eps = rng.standard_normal(n)
    x[0] = eps[0] / math.sqrt(1 - rho * rho)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + eps[i]
    target = n * (1 - rho) / (1 + rho)
    ar1 = bulk_ess([x]).value
    assert target / 2 <= ar1 <= target * 2

    antithetic = bulk_ess([np.array([1.0, -1.0] * 500)]).value
    assert antithetic == 1000.0
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    _ok("ess-sanity", f"(iid={iid:.0f}, ar1={ar1:.0f} vs {target:.0f}, cap={antithetic:.0f}, {elapsed:.2f}s)")


def test_rule_table_conformance():
    """All 8 kinds x band x ESS x funnel enumerate to exactly the table's outputs."""
    th = Thresholds()
    low, ok_ess = 50.0, 3000.0
    cases = []  # (acceptance, ess, funnel) -> expected efficiency-rule kind or None
    for acc, band_state in ((0.75, "in"), (0.30, "below"), (0.97, "above")):
        for ess, ess_state in ((low, "low"), (ok_ess, "ok")):
            for funnel in (False, True):
                expected = None
                if funnel and (band_state != "in" or ess_state == "low"):
                    expected = "FunnelAcceptance"
                elif ess_state == "low" and band_state == "above":
                    expected = "LowEssHighAcceptance"
                elif ess_state == "low" and band_state == "below":
                    expected = "LowEssLowAcceptance"
                elif ess_state == "low":
                    expected = "LowEssIsolated"
                elif band_state != "in":
                    expected = "AcceptanceIsolated"
                cases.append((acc, ess, funnel, expected))

    for acc, ess, funnel, expected in cases:
        diag = make_diag({"theta[0]": {"rhat": 1.0, "ess": ess}}, acceptance=acc,
                         scores={("tau", "theta"): 0.6} if funnel else {})
        got = evaluate(diag, [TAU_THETA] if funnel else [], th, META)
        kinds = [w.kind for w in got]
        if expected is None:
            assert kinds == [], (acc, ess, funnel, kinds)
        else:
            assert kinds == [expected], (acc, ess, funnel, kinds)
        for w in got:
            assert w.suggestion == SUGGESTIONS[w.kind]

    # independent rules with verbatim suggestions
    (w,) = evaluate(make_diag({"x": {"rhat": 1.2, "ess": ok_ess}}), [], th, META)
    assert (w.kind, w.suggestion) == ("HighRhat", "See other warnings. Check rank plots.")
    (w,) = evaluate(make_diag({"x": {"rhat": 1.0, "ess": ok_ess}},
                              burn_in={"x": (1.2, 1.001)}), [], th, META)
    assert (w.kind, w.suggestion) == ("BurnIn", "Increase the burn-in period.")
    (w,) = evaluate(make_diag({"x": {"rhat": 1.0, "ess": ok_ess}}, stuck=250), [], th, META)
    assert (w.kind, w.suggestion) == ("StuckChain", "Check your proposal functions and step size.")

    # aggregation + exclusivity on a shape-[8] fixture
    diag = make_diag({f"theta[{i}]": {"rhat": 1.0, "ess": low} for i in range(8)},
                     acceptance=0.97, scores={("tau", "theta"): 0.6})
    got = evaluate(diag, [TAU_THETA], th, META)
    assert len(got) == 1
    assert got[0].kind == "FunnelAcceptance"
    assert got[0].variables[0].indices == tuple(range(8))
    _ok("rule-table", f"({len(cases)} enumerated combinations)")


def test_funnel_end_to_end():
    """Centered demo raises FunnelAcceptance with the rewrite; noncentered is clean."""
    start = time.monotonic()
    runner = CliRunner()
    result = runner.invoke(main, [
        "demo", "--model", "eight_schools_centered", "--seed", "7",
        "--step-size", "0.2", "--tune", "100", "--draws", "3000", "--chains", "4",
    ])
    centered_elapsed = time.monotonic() - start
    assert result.exit_code == 0, result.output
    assert "FunnelAcceptance" in result.output
    assert "theta = mu + tau * Z" in result.output
    assert "models/eight_schools_centered.py:4" in result.output
    assert centered_elapsed < 60.0

    start = time.monotonic()
    app = create_app(schedule=AnalysisSchedule(every_n_iterations=200, max_interval=0.5))
    with TestClient(app) as client:
        sink = HttpSink(client=client)
        model = builtin_model("eight_schools_noncentered")
        cfg = SamplerConfig(algorithm="hmc", step_size=0.5, n_leapfrog=8,
                            chains=4, tune=1000, draws=3000, seed=7)
        outcome, rid = run_sampler(model, cfg, sink)
        assert outcome == "finished"
        feed = client.get(f"/api/v1/runs/{rid}/warnings").json()["payload"]
        active = feed["new"] + feed["persisting"]
        assert active == [], [w["kind"] for w in active]
        rows = client.get(f"/api/v1/runs/{rid}/stats", params={"chain": "ALL"}).json()["payload"]["rows"]
        rhats = {r["variable"]: r["rhat"] for r in rows if r["rhat"] is not None}
        assert rhats and all(v <= 1.01 for v in rhats.values()), rhats
    noncentered_elapsed = time.monotonic() - start
    assert noncentered_elapsed < 60.0
    _ok("funnel-end-to-end",
        f"(centered {centered_elapsed:.1f}s with rewrite; noncentered {noncentered_elapsed:.1f}s, "
        f"max rhat {max(rhats.values()):.4f}, zero warnings)")


def test_stuck_and_burn_in_fixtures():
    """300 trailing rejections fire StuckChain; a transient start fires BurnIn."""
    th = Thresholds()
    rng = np.random.default_rng(77)

    store = RunStore()
    from chainwatch.model import ModelDescriptor, VariableDecl
    from chainwatch.store import RunMetadata, SampleBatch

    desc = ModelDescriptor(variables=(VariableDecl("x", "latent", "Normal"),))
    rid = store.create_run(desc, RunMetadata(algorithm="hmc", n_chains=2, n_tune=0,
                                             n_draws_planned=1000))
    for chain in range(2):
        draws = rng.standard_normal(1000)
        accept = np.ones(1000)
        if chain == 0:
            draws[700:] = draws[699]  # wedged
            accept[700:] = 0.0
        store.append_batch(SampleBatch(rid, chain, "sample", 0,
                                       {"x": draws.reshape(-1, 1)}, accept))
    from chainwatch.diagnostics import build_snapshot

    diag = build_snapshot(store.snapshot(rid))
    assert diag.stuck[0] == 300
    warns = evaluate(diag, [], th, store.get(rid).metadata)
    stuck = [w for w in warns if w.kind == "StuckChain"]
    assert stuck and stuck[0].chains == (0,)
    assert stuck[0].suggestion == "Check your proposal functions and step size."

    # burn-in: all chains share a +10 transient over the first quarter
    chains = []
    for _ in range(4):
        c = rng.standard_normal(1000)
        c[:250] += 10.0
        chains.append(c)
    from chainwatch.diagnostics import burn_in_rhat_profile

    full, tail = burn_in_rhat_profile(chains)
    assert full.value > 1.05 and tail.value < 1.01
    diag = make_diag({"x": {"rhat": full.value, "ess": 3000.0}},
                     burn_in={"x": (full.value, tail.value)})
    kinds = {w.kind for w in evaluate(diag, [], th, META)}
    assert "BurnIn" in kinds
    burn = next(w for w in evaluate(diag, [], th, META) if w.kind == "BurnIn")
    assert burn.suggestion == "Increase the burn-in period."
    _ok("stuck-burn-in", f"(stuck run 300, rhat_full={full.value:.3f}, rhat_tail={tail.value:.4f})")


def test_online_replay_determinism(tmp_path):
    """Replays are byte-identical; 240 batch acks < 50 ms; staleness <= one tick."""
    log = tmp_path / "schools.jsonl"
    sink = RecordingSink(InProcessSink(RunStore()), log)
    run_sampler(builtin_model("eight_schools_centered"),
                SamplerConfig(algorithm="hmc", step_size=0.3, n_leapfrog=5, chains=2,
                              tune=50, draws=400, seed=13, batch_size=50), sink)
    runner = CliRunner()
    outs = [
        runner.invoke(main, ["replay", str(log), "--report", "--format", "json"]).output
        for _ in range(2)
    ]
    assert outs[0] and outs[0] == outs[1]

    schedule = AnalysisSchedule(every_n_iterations=500, max_interval=0.25)
    app = create_app(schedule=schedule)
    rng = np.random.default_rng(99)
    with TestClient(app) as client:
        body = wire.envelope({
            "descriptor": {
                "variables": [
                    {"name": "mu", "kind": "latent", "distribution": "Normal"},
                    {"name": "tau", "kind": "latent", "distribution": "HalfCauchy",
                     "support": "positive"},
                    {"name": "theta", "kind": "latent", "distribution": "Normal", "shape": [8]},
                ],
                "edges": [
                    {"parent": "mu", "child": "theta", "slot": "location"},
                    {"parent": "tau", "child": "theta", "slot": "scale"},
                ],
            },
            "metadata": {"algorithm": "hmc", "n_chains": 4, "n_tune": 0,
                         "n_draws_planned": 3000},
        })
        rid = client.post("/api/v1/runs", json=body).json()["payload"]["run_id"]
        worst_ack = 0.0
        n_batches = 0
        for off in range(0, 3000, 50):
            for chain in range(4):
                payload = wire.envelope({
                    "chain": chain, "phase": "sample", "first_iteration": off,
                    "draws": {
                        "mu": rng.standard_normal((50, 1)).tolist(),
                        "tau": np.exp(rng.standard_normal((50, 1))).tolist(),
                        "theta": rng.standard_normal((50, 8)).tolist(),
                    },
                    "accept": (rng.random(50) < 0.8).astype(float).tolist(),
                })
                t0 = time.monotonic()
                resp = client.post(f"/api/v1/runs/{rid}/batches", json=payload)
                ack = time.monotonic() - t0
                assert resp.status_code == 200
                worst_ack = max(worst_ack, ack)
                n_batches += 1
        assert n_batches == 240
        assert worst_ack < 0.050, f"worst ack {worst_ack * 1000:.1f} ms"

        ingest_done = time.monotonic()
        deadline = ingest_done + schedule.max_interval + 0.5
        fresh = None
        while time.monotonic() < deadline:
            rows = client.get(f"/api/v1/runs/{rid}/stats",
                              params={"variable": "mu", "chain": "ALL"}).json()["payload"]["rows"]
            if rows and rows[0]["n"] == 12000:
                fresh = time.monotonic() - ingest_done
                break
            time.sleep(0.01)
        assert fresh is not None, "stats never caught up with ingest"
    _ok("online-replay",
        f"(byte-identical replay; worst ack {worst_ack * 1000:.1f} ms; staleness {fresh:.2f}s <= tick)")


def test_gradient_checks():
    """Analytic vs central-difference gradients < 1e-6 for every builtin model."""
    rng = np.random.default_rng(101)
    worst = 0.0
    for name in ("linreg", "eight_schools_centered", "eight_schools_noncentered", "neal_funnel"):
        model = builtin_model(name)
        for point in (np.zeros(model.dim), rng.normal(0, 0.5, model.dim)):
            err = gradient_check(model, point)
            worst = max(worst, err)
            assert err < 1e-6, (name, err)
    toy_err = gradient_check(_normal_toy(), rng.normal(0, 1, 3))
    assert toy_err < 1e-8
    _ok("gradient-checks", f"(worst builtin {worst:.2e}, toy {toy_err:.2e})")
