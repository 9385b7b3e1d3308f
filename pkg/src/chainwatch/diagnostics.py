"""Pure numerical diagnostics on draw sequences.

Everything in this module is a deterministic function of its inputs:
cross-chain convergence statistics (split rank-normalized R-hat, bulk
ESS), acceptance summaries, and plot-ready data series. Chains of
unequal length are truncated to the shortest before cross-chain
statistics are formed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from . import kernels
from .errors import NotEnoughData

LOG_GUARD_EPS = 1e-12
REJECT_PROB_EPS = 1e-6
DEFAULT_ACCEPTANCE_WINDOW = 500


class RhatResult(NamedTuple):
    value: float
    degenerate: bool


class EssResult(NamedTuple):
    value: float
    degenerate: bool


class FunnelScore(NamedTuple):
    value: float
    degenerate: bool


def _as_chain_matrix(chains: Sequence[np.ndarray], min_len: int) -> np.ndarray:
    """Stack chains truncated to the shortest length; validates min_len."""
    if len(chains) == 0:
        raise NotEnoughData("no chains")
    arrays = [np.asarray(c, dtype=np.float64).ravel() for c in chains]
    n = min(a.shape[0] for a in arrays)
    if n < min_len:
        raise NotEnoughData(f"need at least {min_len} draws per chain, shortest has {n}")
    return np.stack([a[:n] for a in arrays])


def _split_halves(a: np.ndarray) -> np.ndarray:
    """(m, n) -> (2m, n//2): first and last halves, middle draw dropped when odd."""
    half = a.shape[1] // 2
    return np.vstack((a[:, :half], a[:, a.shape[1] - half:]))


def _rank_normalize(a: np.ndarray) -> np.ndarray:
    """Pooled average ranks -> z = Phi^-1((r - 3/8) / (S + 1/4))."""
    ranks = rankdata(a, method="average", axis=None).reshape(a.shape)
    return norm.ppf((ranks - 0.375) / (a.size + 0.25))


def _classic_rhat(z: np.ndarray) -> float:
    m, n = z.shape
    w = float(z.var(axis=1, ddof=1).mean())
    b_over_n = float(z.mean(axis=1).var(ddof=1))
    if w == 0.0:
        return math.inf
    var_plus = (n - 1) / n * w + b_over_n
    return math.sqrt(var_plus / w)


def split_rank_normalized_rhat(chains: Sequence[np.ndarray]) -> RhatResult:
    """Split rank-normalized R-hat across chains.

    Each chain is halved, the pooled draws are average-ranked and mapped
    through the normal quantile, and the classic between/within variance
    ratio sqrt(var_plus / W) is taken on the transformed values. Constant
    input reports (1.0, degenerate=True) rather than NaN.
    """
    a = _as_chain_matrix(chains, min_len=4)
    if np.all(a == a.flat[0]):
        return RhatResult(1.0, True)
    z = _rank_normalize(_split_halves(a))
    return RhatResult(_classic_rhat(z), False)


def bulk_ess(chains: Sequence[np.ndarray]) -> EssResult:
    """Bulk effective sample size on rank-normalized split chains.

    ESS = N / (1 + 2 * sum rho_t) with the pairwise Geyer truncation
    (stop before the first negative even/odd pair sum, pair sums clamped
    non-increasing), capped at the total split draw count.
    """
    a = _as_chain_matrix(chains, min_len=4)
    z = _split_halves(a)
    total = float(z.size)
    if np.all(a == a.flat[0]):
        return EssResult(total, True)
    z = _rank_normalize(z)
    m, n = z.shape
    acov0 = z.var(axis=1)  # biased autocovariance at lag 0
    w = float(acov0.mean()) * n / (n - 1)
    var_plus = float(acov0.mean()) + float(z.mean(axis=1).var(ddof=1))
    if var_plus == 0.0:
        return EssResult(total, True)
    tau = kernels.geyer_tau(np.ascontiguousarray(z), w, var_plus)
    if tau <= 0.0:
        return EssResult(total, False)
    return EssResult(min(total, total / tau), False)


def acceptance_rate(evidence: Sequence[float], window: Optional[int] = None) -> float:
    """Mean acceptance over the evidence, optionally over the trailing window.

    Boolean evidence averages accept flags; probability evidence must lie
    in [0, 1] and averages as-is.
    """
    ev = np.asarray(evidence, dtype=np.float64).ravel()
    if ev.size == 0:
        raise NotEnoughData("empty acceptance evidence")
    if np.any((ev < 0.0) | (ev > 1.0)):
        raise ValueError("acceptance probability out of range [0, 1]")
    if window is not None:
        ev = ev[-int(window):]
    return float(ev.mean())


@dataclass(frozen=True)
class HistogramData:
    bin_edges: np.ndarray
    counts: np.ndarray


def histogram(series: Sequence[float], bins: int) -> HistogramData:
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size == 0:
        raise NotEnoughData("empty series")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts, edges = np.histogram(x, bins=int(bins))
    return HistogramData(bin_edges=edges, counts=counts)


@dataclass(frozen=True)
class RankHistogramData:
    """Per-chain counts of pooled-rank positions over shared unit-scale bins."""

    bin_edges: np.ndarray
    counts: dict[int, np.ndarray]


def rank_histogram(chains: dict[int, np.ndarray], bins: int) -> RankHistogramData:
    if bins < 1:
        raise ValueError("bins must be >= 1")
    keys = sorted(chains)
    arrays = [np.asarray(chains[k], dtype=np.float64).ravel() for k in keys]
    if not arrays or any(a.size == 0 for a in arrays):
        raise NotEnoughData("empty chain in rank histogram input")
    pooled = np.concatenate(arrays)
    ranks = rankdata(pooled, method="average")
    scaled = (ranks - 0.5) / pooled.size
    edges = np.linspace(0.0, 1.0, int(bins) + 1)
    out: dict[int, np.ndarray] = {}
    at = 0
    for k, a in zip(keys, arrays):
        counts, _ = np.histogram(scaled[at:at + a.size], bins=edges)
        out[k] = counts
        at += a.size
    return RankHistogramData(bin_edges=edges, counts=out)


@dataclass(frozen=True)
class TraceSlice:
    iterations: np.ndarray
    values: np.ndarray


def trace_slice(series: Sequence[float], max_points: int, first_iteration: int = 0) -> TraceSlice:
    """Uniform-stride downsample that always keeps the first and last draws."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size == 0:
        raise NotEnoughData("empty series")
    if max_points < 2:
        raise ValueError("max_points must be >= 2")
    n = x.size
    stride = -(-n // int(max_points))  # ceil
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx[-1] = n - 1
    return TraceSlice(iterations=idx + int(first_iteration), values=x[idx])


@dataclass(frozen=True)
class PairData:
    x: np.ndarray
    y: np.ndarray
    funnel_hint: Optional[float] = None


def pair_data(
    x: Sequence[float],
    y: Sequence[float],
    thin: int = 1,
    hint_parent_positive: Optional[bool] = None,
) -> PairData:
    """Paired draws of two series, optionally thinned; pairing is preserved.

    When ``hint_parent_positive`` is given, x is treated as a scale input
    and a funnel score over the unthinned pairs is attached (requires
    >= 50 draws, else no hint).
    """
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.size == 0:
        raise NotEnoughData("empty series")
    if xa.size != ya.size:
        raise ValueError("pair series must have equal lengths")
    thin = max(1, int(thin))
    hint = None
    if hint_parent_positive is not None and xa.size >= 50:
        hint = detect_funnel_sample(xa, ya, parent_positive=hint_parent_positive).value
    return PairData(x=xa[::thin], y=ya[::thin], funnel_hint=hint)


def burn_in_rhat_profile(chains: Sequence[np.ndarray]) -> tuple[RhatResult, RhatResult]:
    """(R-hat over all draws, R-hat over the trailing 50% of each chain)."""
    a = _as_chain_matrix(chains, min_len=8)
    full = split_rank_normalized_rhat(list(a))
    tail = split_rank_normalized_rhat(list(a[:, a.shape[1] // 2:]))
    return full, tail


def detect_funnel_sample(
    scale_parent_series: Sequence[float],
    child_series: Sequence[float],
    parent_positive: bool = False,
    eps: float = LOG_GUARD_EPS,
) -> FunnelScore:
    """Sample-based funnel score: correlation of log-scale with log-spread.

    t = log(parent) for positive-support parents (log(|parent| + eps)
    otherwise), a = log(|child - mean(child)| + eps); score is their
    Pearson correlation (n-1 normalization), in [-1, 1]. A flat t or a
    reports (0.0, degenerate=True).
    """
    p = np.asarray(scale_parent_series, dtype=np.float64).ravel()
    c = np.asarray(child_series, dtype=np.float64).ravel()
    if p.size != c.size:
        raise ValueError("funnel score inputs must have equal lengths")
    if p.size < 50:
        raise NotEnoughData("need at least 50 paired draws for the funnel score")
    if np.all(p == p[0]) or np.all(c == c[0]):
        return FunnelScore(0.0, True)
    if parent_positive and np.all(p > 0.0):
        t = np.log(p)
    else:
        t = np.log(np.abs(p) + eps)
    a = np.log(np.abs(c - c.mean()) + eps)
    st, sa = t.std(ddof=1), a.std(ddof=1)
    if st == 0.0 or sa == 0.0:
        return FunnelScore(0.0, True)
    cov = float(((t - t.mean()) * (a - a.mean())).sum() / (t.size - 1))
    return FunnelScore(max(-1.0, min(1.0, cov / (st * sa))), False)


def stuck_run_length(evidence: Sequence[float]) -> int:
    """Length of the rejection run ending at the latest iteration.

    Acceptance probabilities below 1e-6 count as rejections (exact booleans
    arrive as 0/1).
    """
    ev = np.asarray(evidence, dtype=np.float64).ravel()
    if ev.size == 0:
        raise NotEnoughData("empty acceptance evidence")
    rejected = ev < REJECT_PROB_EPS
    run = 0
    for flag in rejected[::-1]:
        if not flag:
            break
        run += 1
    return run


# --- snapshot-level assembly -------------------------------------------------

ALL_CHAINS = None  # chain field sentinel on cross-chain stats rows


@dataclass(frozen=True)
class VariableChainStats:
    variable: str
    chain: Optional[int]  # None means ALL
    n: int
    mean: Optional[float] = None
    sd: Optional[float] = None
    rhat: Optional[float] = None
    ess_bulk: Optional[float] = None
    acceptance_rate: Optional[float] = None
    degenerate: bool = False


@dataclass(frozen=True)
class DiagnosticsSnapshot:
    """Point-in-time metrics for every flat variable and chain."""

    run_id: str
    algorithm: str
    n_chains: int
    sample_counts: dict[int, int]
    frontier_iteration: int
    stats: list[VariableChainStats]
    burn_in: dict[str, tuple[RhatResult, RhatResult]]
    acceptance_windowed: dict[int, Optional[float]]
    stuck: dict[int, int]
    funnel_scores: dict[tuple[str, str], Optional[float]] = field(default_factory=dict)

    def all_row(self, variable: str) -> Optional[VariableChainStats]:
        for row in self.stats:
            if row.variable == variable and row.chain is None:
                return row
        return None


def _mean_sd(x: np.ndarray) -> tuple[Optional[float], Optional[float]]:
    if x.size == 0:
        return None, None
    mean = float(x.mean())
    sd = float(x.std(ddof=1)) if x.size >= 2 else None
    return mean, sd


def build_snapshot(
    view,
    funnel_pairs=(),
    acceptance_window: int = DEFAULT_ACCEPTANCE_WINDOW,
    pause: Optional[callable] = None,
) -> DiagnosticsSnapshot:
    """Compute the full diagnostics snapshot from a store view.

    ``view`` is a chain-store snapshot (sample-phase draws are used for
    everything warning-facing). ``funnel_pairs`` lists statically
    detected scale dependencies as (key, scale_variable, child_variable)
    with key = (parent_root, child_root). ``pause`` is called between
    per-variable units purely to hand the GIL to ingest threads; it never
    affects the result.
    """
    pause = pause or (lambda: time.sleep(0))
    flat_names = view.flat_names
    chains = list(range(view.n_chains))
    per_chain = {c: view.sample_draws(c) for c in chains}  # (n_c, n_flat)
    counts = {c: per_chain[c].shape[0] for c in chains}

    accept_w: dict[int, Optional[float]] = {}
    stuck: dict[int, int] = {}
    for c in chains:
        ev = view.sample_accept(c)
        if ev.size == 0:
            accept_w[c] = None
            stuck[c] = 0
        else:
            accept_w[c] = acceptance_rate(ev, window=acceptance_window)
            stuck[c] = stuck_run_length(ev)

    stats: list[VariableChainStats] = []
    burn_in: dict[str, tuple[RhatResult, RhatResult]] = {}
    for j, name in enumerate(flat_names):
        pause()
        series = {c: per_chain[c][:, j] for c in chains if counts[c] > 0}
        nonempty = list(series.values())
        pooled = np.concatenate(nonempty) if nonempty else np.empty(0)
        mean, sd = _mean_sd(pooled)
        rhat_val: Optional[float] = None
        ess_val: Optional[float] = None
        degenerate = bool(pooled.size > 0 and np.all(pooled == pooled.flat[0]))
        if nonempty:
            try:
                r = split_rank_normalized_rhat(nonempty)
                pause()
                e = bulk_ess(nonempty)
                pause()
                if not r.degenerate:
                    rhat_val = r.value
                if not e.degenerate:
                    ess_val = e.value
                if min(x.size for x in nonempty) >= 8:
                    # the profile's full-draws half is exactly the row's rhat
                    n_min = min(x.size for x in nonempty)
                    tail = split_rank_normalized_rhat([x[:n_min][n_min // 2:] for x in nonempty])
                    burn_in[name] = (r, tail)
            except NotEnoughData:
                pass
        stats.append(
            VariableChainStats(
                variable=name, chain=None, n=int(pooled.size), mean=mean, sd=sd,
                rhat=rhat_val, ess_bulk=ess_val, acceptance_rate=None, degenerate=degenerate,
            )
        )
        for c in chains:
            pause()
            x = series.get(c, np.empty(0))
            cmean, csd = _mean_sd(x)
            cess: Optional[float] = None
            if x.size >= 4:
                er = bulk_ess([x])
                if not er.degenerate:
                    cess = er.value
            stats.append(
                VariableChainStats(
                    variable=name, chain=c, n=int(x.size), mean=cmean, sd=csd,
                    rhat=None, ess_bulk=cess, acceptance_rate=accept_w[c],
                    degenerate=bool(x.size > 0 and np.all(x == x.flat[0])),
                )
            )

    scores: dict[tuple[str, str], Optional[float]] = {}
    for key, scale_var, child_var in funnel_pairs:
        pause()
        scores[key] = _funnel_pair_score(view, scale_var, child_var)

    return DiagnosticsSnapshot(
        run_id=view.run_id,
        algorithm=view.algorithm,
        n_chains=view.n_chains,
        sample_counts=counts,
        frontier_iteration=max(counts.values(), default=0),
        stats=stats,
        burn_in=burn_in,
        acceptance_windowed=accept_w,
        stuck=stuck,
        funnel_scores=scores,
    )


def _funnel_pair_score(view, scale_var: str, child_var: str) -> Optional[float]:
    """Max funnel score of the scale input against each child component.

    Scored on the witness chain (the chain whose log-scale series has the
    widest spread): a chain stuck in the funnel neck contributes an
    almost-constant scale series whose correlations are meaningless,
    while the witness chain actually traversed the geometry.
    """
    scale_flats = view.flat_indices(scale_var)
    if len(scale_flats) != 1:  # vector scale inputs are not scored
        return None
    positive = view.support_of(scale_var) == "positive"
    witness: Optional[int] = None
    spread = 0.0
    for c in range(view.n_chains):
        p = view.sample_draws(c)[:, scale_flats[0]]
        if p.size < 50:
            continue
        t = np.log(p) if positive and np.all(p > 0.0) else np.log(np.abs(p) + LOG_GUARD_EPS)
        s = float(t.std(ddof=1))
        if s > spread:
            spread, witness = s, c
    if witness is None or spread == 0.0:
        return None
    parent = view.sample_draws(witness)[:, scale_flats[0]]
    best: Optional[float] = None
    for j in view.flat_indices(child_var):
        child = view.sample_draws(witness)[:, j]
        try:
            score = detect_funnel_sample(parent, child, parent_positive=positive)
        except NotEnoughData:
            return None
        if not score.degenerate and (best is None or score.value > best):
            best = score.value
    return best
