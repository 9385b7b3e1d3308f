import numpy as np
import pytest

from chainwatch.diagnostics import acceptance_rate, build_snapshot
from chainwatch.errors import ChainwatchError
from chainwatch.samplers import (
    MODEL_NAMES,
    InProcessSink,
    SamplerConfig,
    _normal_toy,
    builtin_model,
    gradient_check,
    run_sampler,
)
from chainwatch.store import RunStore
from chainwatch.warnings_engine import Thresholds, evaluate, funnel_static_detect

from oracles import finite_difference_gradient


class CaptureSink:
    """Collects the stream; optionally raises the stop flag after N batches."""

    def __init__(self, stop_after=None):
        self.batches = []
        self.outcome = None
        self.stop_after = stop_after

    def create_run(self, descriptor, metadata):
        self.metadata = metadata
        return "run-capture"

    def append(self, batch):
        self.batches.append(batch)
        return batch.first_iteration + batch.accept.shape[0] - 1

    def read_control(self, run_id):
        return self.stop_after is not None and len(self.batches) >= self.stop_after

    def finish(self, run_id, outcome):
        self.outcome = outcome


def small_config(**kw):
    base = dict(algorithm="hmc", step_size=0.3, n_leapfrog=5, chains=2, tune=20, draws=100,
                seed=5, batch_size=25)
    base.update(kw)
    return SamplerConfig(**base)


def test_descriptor_flat_dimension_matches_model_dim():
    for name in MODEL_NAMES:
        m = builtin_model(name)
        latent_flats = sum(
            v.flat_size for v in m.descriptor.variables if v.kind == "latent"
        )
        assert latent_flats == m.dim


def test_stream_is_deterministic_byte_for_byte():
    a, b = CaptureSink(), CaptureSink()
    model = builtin_model("eight_schools_centered")
    run_sampler(model, small_config(), a)
    run_sampler(model, small_config(), b)
    assert len(a.batches) == len(b.batches)
    for x, y in zip(a.batches, b.batches):
        assert (x.chain, x.phase, x.first_iteration) == (y.chain, y.phase, y.first_iteration)
        assert x.accept.tobytes() == y.accept.tobytes()
        for name in x.draws:
            assert x.draws[name].tobytes() == y.draws[name].tobytes()


def test_different_seeds_differ():
    a, b = CaptureSink(), CaptureSink()
    model = builtin_model("linreg")
    run_sampler(model, small_config(), a)
    run_sampler(model, small_config(seed=6), b)
    assert a.batches[0].draws["alpha"].tobytes() != b.batches[0].draws["alpha"].tobytes()


def test_phases_are_contiguous_per_chain():
    sink = CaptureSink()
    run_sampler(builtin_model("linreg"), small_config(tune=30, draws=60, batch_size=25), sink)
    seen = {}
    for b in sink.batches:
        key = (b.chain, b.phase)
        assert b.first_iteration == seen.get(key, 0)
        seen[key] = b.first_iteration + b.accept.shape[0]
    assert seen[(0, "tune")] == 30 and seen[(0, "sample")] == 60
    assert sink.outcome == "finished"


def test_stop_flag_aborts_within_one_round():
    sink = CaptureSink(stop_after=6)
    run_sampler(builtin_model("linreg"), small_config(draws=1000), sink)
    assert sink.outcome == "aborted"
    # one more full round (= one batch per chain) may land after the flag
    assert len(sink.batches) <= 6 + 2


def test_stream_into_store_and_diagnose():
    store = RunStore()
    outcome, rid = run_sampler(
        builtin_model("eight_schools_noncentered"),
        small_config(draws=250, tune=50),
        InProcessSink(store),
    )
    assert outcome == "finished"
    view = store.snapshot(rid)
    assert view.status == "finished"
    assert len(view.flat_names) == 18  # mu, tau, Z[8], theta[8]
    diag = build_snapshot(view)
    assert diag.sample_counts == {0: 250, 1: 250}


def test_nonfinite_gradient_check_point_raises():
    with pytest.raises(ChainwatchError, match="non-finite"):
        gradient_check(builtin_model("linreg"), [0.0, 0.0, 400.0])


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_gradient_check_builtin_models(name):
    model = builtin_model(name)
    rng = np.random.default_rng(17)
    assert gradient_check(model, np.zeros(model.dim)) < 1e-6
    assert gradient_check(model, rng.normal(0, 0.5, model.dim)) < 1e-6


def test_gradient_check_quadratic_toy_tight():
    toy = _normal_toy()
    rng = np.random.default_rng(18)
    for _ in range(5):
        assert gradient_check(toy, rng.normal(0, 2.0, toy.dim)) < 1e-8


def test_gradients_match_stdlib_finite_differences():
    # independent cross-check: plain-python central differences on the model lp
    model = builtin_model("neal_funnel")
    point = [0.3, 0.1, -0.2, 0.5, -0.4, 0.2, 0.0, 0.1, -0.1, 0.25]
    _, grad = model.log_density_gradient(point)
    fd = finite_difference_gradient(lambda q: model.log_density(q), point)
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-6)


def test_hmc_acceptance_improves_with_smaller_step():
    toy = _normal_toy()

    def run(eps):
        sink = CaptureSink()
        run_sampler(toy, small_config(algorithm="hmc", step_size=eps, chains=1,
                                      tune=0, draws=400, n_leapfrog=8), sink)
        ev = np.concatenate([b.accept for b in sink.batches])
        return acceptance_rate(ev)

    small, large = run(0.05), run(1.2)
    assert small > 0.98
    assert small > large


def test_rwmh_wild_proposals_trigger_stuck_or_isolated():
    store = RunStore()
    model = builtin_model("linreg")
    cfg = SamplerConfig(algorithm="random_walk_mh", step_size=1e6, chains=2,
                        tune=0, draws=500, seed=3, batch_size=50)
    _, rid = run_sampler(model, cfg, InProcessSink(store))
    view = store.snapshot(rid)
    rates = [acceptance_rate(view.sample_accept(c)) for c in range(2)]
    assert all(r < 0.05 for r in rates)
    diag = build_snapshot(view)
    warns = evaluate(diag, funnel_static_detect(model.descriptor), Thresholds(),
                     view.metadata, model.descriptor)
    assert any(w.kind in ("StuckChain", "AcceptanceIsolated", "LowEssLowAcceptance") for w in warns)


def test_invalid_config_rejected():
    with pytest.raises(ChainwatchError):
        SamplerConfig(algorithm="nuts").validate()
    with pytest.raises(ChainwatchError):
        SamplerConfig(step_size=-1).validate()


def test_store_backed_stop_aborts_cleanly():
    import threading

    store = RunStore()
    model = builtin_model("linreg")
    cfg = small_config(draws=5000, batch_size=20)
    seen = threading.Event()

    def stopper(run_id, event):
        if event == "appended" and not seen.is_set():
            seen.set()
            store.request_stop(run_id)

    store.add_listener(stopper)
    outcome, rid = run_sampler(model, cfg, InProcessSink(store))
    assert outcome == "aborted"
    view = store.snapshot(rid)
    assert view.status == "aborted"
    # stop landed after the first round: at most one extra round per chain
    assert view.counts(0, "tune") <= 60
