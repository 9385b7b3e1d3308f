"""Self-contained toy samplers and canonical models for demos and tests.

Each builtin model embeds its dataset, exposes the unconstrained-space
log density and analytic gradient (through the kernel backend), a
constrain map from unconstrained positions to the descriptor's reported
variables, and a descriptor with slot-annotated edges and source spans.
Streams honor chain-store contiguity and the stop latch; identical
(model, config) pairs produce identical batch streams.
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from . import kernels
from .errors import ChainwatchError
from .model import DependencyEdge, ModelDescriptor, SourceSpan, VariableDecl
from .store import RunMetadata, SampleBatch

EIGHT_SCHOOLS_Y = np.array([28.0, 8.0, -3.0, 7.0, -1.0, 1.0, 18.0, 12.0])
EIGHT_SCHOOLS_SIGMA = np.array([15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0])

LINREG_X = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5,
                     5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 8.5, 9.0, 9.5])
LINREG_Y = np.array([3.203, 3.425, 2.103, 4.344, 5.881, 5.514, 9.085, 9.039, 9.867, 12.422,
                     13.307, 13.377, 15.194, 17.432, 17.749, 20.042, 22.389, 21.886, 22.311, 23.872])

_EMPTY = np.empty(0)


@dataclass(frozen=True)
class BuiltinModel:
    name: str
    model_id: int
    dim: int
    descriptor: ModelDescriptor
    c1: np.ndarray = field(default=_EMPTY, repr=False)
    c2: np.ndarray = field(default=_EMPTY, repr=False)
    constrain: Callable[[np.ndarray], dict[str, np.ndarray]] = lambda qs: {}

    def log_density(self, q) -> float:
        return float(kernels.log_density(self.model_id, np.asarray(q, dtype=np.float64), self.c1, self.c2))

    def log_density_gradient(self, q) -> tuple[float, np.ndarray]:
        lp, grad = kernels.log_density_and_grad(
            self.model_id, np.asarray(q, dtype=np.float64), self.c1, self.c2
        )
        return float(lp), grad


def _span(file: str, line: int) -> SourceSpan:
    return SourceSpan(file=file, line_start=line, line_end=line)


def _linreg() -> BuiltinModel:
    f = "models/linreg.py"
    desc = ModelDescriptor(
        variables=(
            VariableDecl("alpha", "latent", "Normal", (), "real", _span(f, 2)),
            VariableDecl("beta", "latent", "Normal", (), "real", _span(f, 3)),
            VariableDecl("sigma", "latent", "HalfNormal", (), "positive", _span(f, 4)),
            VariableDecl("y", "observed", "Normal", (20,), "real", _span(f, 5)),
        ),
        edges=(
            DependencyEdge("alpha", "y", "location"),
            DependencyEdge("beta", "y", "location"),
            DependencyEdge("sigma", "y", "scale"),
        ),
    )

    def constrain(qs: np.ndarray) -> dict[str, np.ndarray]:
        return {"alpha": qs[:, 0:1], "beta": qs[:, 1:2], "sigma": np.exp(qs[:, 2:3])}

    return BuiltinModel("linreg", kernels.LINREG, 3, desc, LINREG_X, LINREG_Y, constrain)


def _schools_centered() -> BuiltinModel:
    f = "models/eight_schools_centered.py"
    desc = ModelDescriptor(
        variables=(
            VariableDecl("mu", "latent", "Normal", (), "real", _span(f, 2)),
            VariableDecl("tau", "latent", "HalfCauchy", (), "positive", _span(f, 3)),
            VariableDecl("theta", "latent", "Normal", (8,), "real", _span(f, 4)),
            VariableDecl("y", "observed", "Normal", (8,), "real", _span(f, 5)),
        ),
        edges=(
            DependencyEdge("mu", "theta", "location"),
            DependencyEdge("tau", "theta", "scale"),
            DependencyEdge("theta", "y", "location"),
        ),
    )

    def constrain(qs: np.ndarray) -> dict[str, np.ndarray]:
        return {"mu": qs[:, 0:1], "tau": np.exp(qs[:, 1:2]), "theta": qs[:, 2:]}

    return BuiltinModel(
        "eight_schools_centered", kernels.SCHOOLS_CENTERED, 10, desc,
        EIGHT_SCHOOLS_Y, EIGHT_SCHOOLS_SIGMA, constrain,
    )


def _schools_noncentered() -> BuiltinModel:
    f = "models/eight_schools_noncentered.py"
    desc = ModelDescriptor(
        variables=(
            VariableDecl("mu", "latent", "Normal", (), "real", _span(f, 2)),
            VariableDecl("tau", "latent", "HalfCauchy", (), "positive", _span(f, 3)),
            VariableDecl("Z", "latent", "Normal", (8,), "real", _span(f, 4)),
            VariableDecl("theta", "deterministic", None, (8,), "real", _span(f, 5)),
            VariableDecl("y", "observed", "Normal", (8,), "real", _span(f, 6)),
        ),
        edges=(
            DependencyEdge("mu", "theta", "deterministic_input"),
            DependencyEdge("tau", "theta", "deterministic_input"),
            DependencyEdge("Z", "theta", "deterministic_input"),
            DependencyEdge("theta", "y", "location"),
        ),
    )

    def constrain(qs: np.ndarray) -> dict[str, np.ndarray]:
        mu = qs[:, 0:1]
        tau = np.exp(qs[:, 1:2])
        z = qs[:, 2:]
        return {"mu": mu, "tau": tau, "Z": z, "theta": mu + tau * z}

    return BuiltinModel(
        "eight_schools_noncentered", kernels.SCHOOLS_NONCENTERED, 10, desc,
        EIGHT_SCHOOLS_Y, EIGHT_SCHOOLS_SIGMA, constrain,
    )


def _neal_funnel() -> BuiltinModel:
    f = "models/neal_funnel.py"
    desc = ModelDescriptor(
        variables=(
            VariableDecl("v", "latent", "Normal", (), "real", _span(f, 2)),
            VariableDecl("x_scale", "deterministic", None, (), "positive", _span(f, 3)),
            VariableDecl("x", "latent", "Normal", (9,), "real", _span(f, 4)),
        ),
        edges=(
            DependencyEdge("v", "x_scale", "deterministic_input"),
            DependencyEdge("x_scale", "x", "scale"),
        ),
    )

    def constrain(qs: np.ndarray) -> dict[str, np.ndarray]:
        return {"v": qs[:, 0:1], "x_scale": np.exp(qs[:, 0:1] / 2.0), "x": qs[:, 1:]}

    return BuiltinModel("neal_funnel", kernels.FUNNEL, 10, desc, constrain=constrain)


def _normal_toy(dim: int = 3) -> BuiltinModel:
    desc = ModelDescriptor(
        variables=(VariableDecl("q", "latent", "Normal", (dim,), "real"),),
    )
    return BuiltinModel(
        "normal_toy", kernels.NORMAL_TOY, dim, desc, constrain=lambda qs: {"q": qs},
    )


_REGISTRY: dict[str, Callable[[], BuiltinModel]] = {
    "linreg": _linreg,
    "eight_schools_centered": _schools_centered,
    "eight_schools_noncentered": _schools_noncentered,
    "neal_funnel": _neal_funnel,
}

MODEL_NAMES = tuple(_REGISTRY)


def builtin_model(name: str) -> BuiltinModel:
    if name not in _REGISTRY:
        raise ChainwatchError(f"unknown builtin model {name!r} (choose from {', '.join(MODEL_NAMES)})")
    return _REGISTRY[name]()


@dataclass
class SamplerConfig:
    algorithm: str = "hmc"  # "hmc" | "random_walk_mh"
    step_size: float = 0.2
    n_leapfrog: int = 10
    chains: int = 4
    tune: int = 100
    draws: int = 3000
    seed: int = 0
    batch_size: int = 50

    def validate(self) -> None:
        if self.algorithm not in ("hmc", "random_walk_mh"):
            raise ChainwatchError(f"unsupported algorithm {self.algorithm!r}")
        if self.step_size <= 0 or self.n_leapfrog < 1 or self.chains < 1 or self.draws < 1:
            raise ChainwatchError("step_size, n_leapfrog, chains and draws must be positive")
        if self.tune < 0 or self.batch_size < 1:
            raise ChainwatchError("tune must be >= 0 and batch_size >= 1")


class Sink(Protocol):
    """Where a sampler streams its run: in-process store or the wire."""

    def create_run(self, descriptor: ModelDescriptor, metadata: RunMetadata) -> str: ...
    def append(self, batch: SampleBatch) -> int: ...
    def read_control(self, run_id: str) -> bool: ...
    def finish(self, run_id: str, outcome: str) -> None: ...


class InProcessSink:
    """Feeds a RunStore directly; the fast path for tests and replay."""

    def __init__(self, store):
        self.store = store

    def create_run(self, descriptor, metadata):
        return self.store.create_run(descriptor, metadata)

    def append(self, batch):
        return self.store.append_batch(batch)

    def read_control(self, run_id):
        return self.store.read_control(run_id)

    def finish(self, run_id, outcome):
        self.store.finish_run(run_id, outcome)


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, chain))))


def _advance(model: BuiltinModel, config: SamplerConfig, rng: np.random.Generator,
             q: np.ndarray, b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if config.algorithm == "hmc":
        momenta = rng.standard_normal((b, model.dim))
        log_u = np.log(rng.random(b))
        return kernels.hmc_batch(
            model.model_id, model.c1, model.c2, q,
            config.step_size, config.n_leapfrog, momenta, log_u,
        )
    noise = rng.standard_normal((b, model.dim))
    log_u = np.log(rng.random(b))
    return kernels.rwmh_batch(model.model_id, model.c1, model.c2, q, config.step_size, noise, log_u)


def run_sampler(model: BuiltinModel, config: SamplerConfig, sink: Sink) -> tuple[str, str]:
    """Stream a full run (tune then sample phases) into the sink.

    Polls the control latch between batch rounds and aborts within one
    batch of a stop request. Returns (outcome, run_id).
    """
    config.validate()
    metadata = RunMetadata(
        algorithm=config.algorithm,
        n_chains=config.chains,
        n_tune=config.tune,
        n_draws_planned=config.draws,
        hyperparameters={
            "step_size": config.step_size,
            "n_leapfrog": float(config.n_leapfrog),
            "seed": float(config.seed),
        },
        started_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
    )
    rngs = [_chain_rng(config.seed, c) for c in range(config.chains)]
    states = [rng.standard_normal(model.dim) for rng in rngs]  # jittered inits
    for c, q0 in enumerate(states):
        if not np.isfinite(model.log_density(q0)):
            raise ChainwatchError(f"non-finite log density at chain {c} initialization")

    run_id = sink.create_run(model.descriptor, metadata)
    aborted = False
    for phase, total in (("tune", config.tune), ("sample", config.draws)):
        off = 0
        while off < total and not aborted:
            if sink.read_control(run_id):
                aborted = True
                break
            b = min(config.batch_size, total - off)
            for chain in range(config.chains):
                qs, accepts, q_final = _advance(model, config, rngs[chain], states[chain], b)
                states[chain] = q_final
                sink.append(SampleBatch(
                    run_id=run_id,
                    chain=chain,
                    phase=phase,
                    first_iteration=off,
                    draws=model.constrain(qs),
                    accept=accepts.astype(np.float64),
                ))
            off += b
        if aborted:
            break
    outcome = "aborted" if aborted else "finished"
    sink.finish(run_id, outcome)
    return outcome, run_id


def gradient_check(model: BuiltinModel, point, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    q = np.asarray(point, dtype=np.float64)
    lp, grad = model.log_density_gradient(q)
    if not np.isfinite(lp) or not np.all(np.isfinite(grad)):
        raise ChainwatchError("non-finite log density or gradient at the evaluation point")
    err = 0.0
    for i in range(q.shape[0]):
        up, dn = q.copy(), q.copy()
        up[i] += h
        dn[i] -= h
        fu, fd = model.log_density(up), model.log_density(dn)
        if not (np.isfinite(fu) and np.isfinite(fd)):
            raise ChainwatchError("non-finite log density in the finite-difference neighborhood")
        fd_grad = (fu - fd) / (2.0 * h)
        err = max(err, abs(grad[i] - fd_grad) / (abs(grad[i]) + 1e-8))
    return err
