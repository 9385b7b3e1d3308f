import logging

import numpy as np
import pytest

from chainwatch_adapter import AdapterConfig, SamplingMonitor, StopInference, attach

from fake_ppl import eight_schools_centered


def fake_sampling_loop(monitor, chains=2, tune=20, draws=100, rng_seed=0):
    """Stands in for a PPL's sampler: calls the callback per iteration."""
    rng = np.random.default_rng(rng_seed)
    completed = 0
    for phase, total in (("tune", tune), ("sample", draws)):
        for _ in range(total):
            for chain in range(chains):
                values = {
                    "mu": rng.normal(),
                    "tau": abs(rng.normal()) + 0.1,
                    "theta": rng.normal(size=8),
                }
                monitor.record(chain, phase, values, accepted=bool(rng.random() < 0.8))
            completed += 1
    return completed


def test_fail_open_when_engine_down(caplog):
    config = AdapterConfig(engine_url="http://127.0.0.1:1", batch_size=10, timeout=0.2)
    monitor = SamplingMonitor(
        eight_schools_centered(), config,
        algorithm="hmc", n_chains=2, n_tune=20, n_draws=100,
    )
    with caplog.at_level(logging.WARNING, logger="chainwatch_adapter"):
        monitor.start()
        completed = fake_sampling_loop(monitor)
        monitor.finish()
    assert completed == 120  # the user's run finished untouched
    assert monitor.disabled
    assert any("monitoring disabled" in r.message for r in caplog.records)


def test_attach_wraps_and_survives_missing_engine():
    config = AdapterConfig(engine_url="http://127.0.0.1:1", timeout=0.2)
    wrapped = attach(
        eight_schools_centered(),
        lambda monitor: fake_sampling_loop(monitor, draws=30),
        config,
        algorithm="hmc", n_chains=2, n_tune=20, n_draws=30,
    )
    assert wrapped() == 50


def test_config_from_environment(monkeypatch):
    monkeypatch.setenv("CHAINWATCH_ENGINE_URL", "http://example:9")
    assert AdapterConfig().engine_url == "http://example:9"
    monkeypatch.delenv("CHAINWATCH_ENGINE_URL")
    assert AdapterConfig(engine_url="http://explicit").engine_url == "http://explicit"


def test_config_validation():
    with pytest.raises(ValueError):
        AdapterConfig(batch_size=0)
