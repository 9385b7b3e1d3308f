"""Pure-python (numpy) implementations of the hot kernels.

This is the fallback backend when the compiled extension is unavailable
(or CHAINWATCH_FORCE_PURE=1). Signatures and numerical contracts match
``chainwatch._kernels``; results agree to ~1e-9 (the autocovariance here
is computed in the frequency domain, the compiled path by direct sum).

Model ids: 0 linreg, 1 eight-schools centered, 2 eight-schools
non-centered, 3 funnel, 4 standard-normal toy. ``c1``/``c2`` carry the
model's embedded data vectors (unused slots are empty arrays).
"""
from __future__ import annotations

import numpy as np

BACKEND = "pure"

LINREG = 0
SCHOOLS_CENTERED = 1
SCHOOLS_NONCENTERED = 2
FUNNEL = 3
NORMAL_TOY = 4


def _autocov_fft(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance at all lags via FFT, O(n log n)."""
    n = x.shape[0]
    xm = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xm, nfft)
    return np.fft.irfft(f * np.conj(f), nfft)[:n] / n


def geyer_tau(z: np.ndarray, w: float, var_plus: float) -> float:
    """Autocorrelation time 1 + 2*sum(rho) with pairwise Geyer truncation.

    ``z``: (chains, draws) rank-normalized split chains. Even/odd lag
    pairs are summed while the pair sum stays non-negative and each pair
    sum is clamped to never exceed the previous one.
    """
    m, n = z.shape
    acov = np.empty((m, n))
    for c in range(m):
        acov[c] = _autocov_fft(z[c])
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    tau_sum = 0.0
    prev = np.inf
    k = 0
    while 2 * k + 1 <= n - 1:
        p = rho[2 * k] + rho[2 * k + 1]
        if p < 0.0:
            break
        if p > prev:
            p = prev
        tau_sum += p
        prev = p
        k += 1
    return -1.0 + 2.0 * tau_sum


def log_density_and_grad(model_id: int, q: np.ndarray, c1: np.ndarray, c2: np.ndarray):
    """Unconstrained-space log density (up to a constant) and its gradient."""
    q = np.asarray(q, dtype=np.float64)
    grad = np.empty_like(q)
    if model_id == LINREG:
        x, y = c1, c2
        alpha, beta, u = q
        sigma2 = np.exp(2.0 * u)
        r = y - (alpha + beta * x)
        lp = (
            -alpha * alpha / 200.0
            - beta * beta / 200.0
            - sigma2 / 50.0
            + u
            - x.shape[0] * u
            - 0.5 * np.sum(r * r) / sigma2
        )
        grad[0] = -alpha / 100.0 + np.sum(r) / sigma2
        grad[1] = -beta / 100.0 + np.sum(r * x) / sigma2
        grad[2] = -2.0 * sigma2 / 50.0 + 1.0 - x.shape[0] + np.sum(r * r) / sigma2
        return lp, grad
    if model_id == SCHOOLS_CENTERED:
        y, sig = c1, c2
        mu, u = q[0], q[1]
        theta = q[2:]
        tau2 = np.exp(2.0 * u)
        dt = theta - mu
        ry = (y - theta) / (sig * sig)
        lp = (
            -mu * mu / 200.0
            - np.log1p(tau2 / 25.0)
            + u
            - y.shape[0] * u
            - 0.5 * np.sum(dt * dt) / tau2
            - 0.5 * np.sum((y - theta) ** 2 / (sig * sig))
        )
        grad[0] = -mu / 100.0 + np.sum(dt) / tau2
        grad[1] = 1.0 - y.shape[0] - 2.0 * tau2 / (25.0 + tau2) + np.sum(dt * dt) / tau2
        grad[2:] = -dt / tau2 + ry
        return lp, grad
    if model_id == SCHOOLS_NONCENTERED:
        y, sig = c1, c2
        mu, u = q[0], q[1]
        z = q[2:]
        tau = np.exp(u)
        resid = (y - mu - tau * z) / (sig * sig)
        lp = (
            -mu * mu / 200.0
            - np.log1p(tau * tau / 25.0)
            + u
            - 0.5 * np.sum(z * z)
            - 0.5 * np.sum((y - mu - tau * z) ** 2 / (sig * sig))
        )
        grad[0] = -mu / 100.0 + np.sum(resid)
        grad[1] = 1.0 - 2.0 * tau * tau / (25.0 + tau * tau) + tau * np.sum(resid * z)
        grad[2:] = -z + tau * resid
        return lp, grad
    if model_id == FUNNEL:
        v = q[0]
        x = q[1:]
        inv_var = np.exp(-v)
        sx2 = np.sum(x * x)
        lp = -v * v / 18.0 - 0.5 * x.shape[0] * v - 0.5 * sx2 * inv_var
        grad[0] = -v / 9.0 - 0.5 * x.shape[0] + 0.5 * sx2 * inv_var
        grad[1:] = -x * inv_var
        return lp, grad
    if model_id == NORMAL_TOY:
        lp = -0.5 * float(q @ q)
        return lp, -q
    raise ValueError(f"unknown model id {model_id}")  # kept in sync with MODEL_IDS


MODEL_IDS = (LINREG, SCHOOLS_CENTERED, SCHOOLS_NONCENTERED, FUNNEL, NORMAL_TOY)


def log_density(model_id: int, q: np.ndarray, c1: np.ndarray, c2: np.ndarray) -> float:
    return log_density_and_grad(model_id, q, c1, c2)[0]


def hmc_batch(
    model_id: int,
    c1: np.ndarray,
    c2: np.ndarray,
    q0: np.ndarray,
    step_size: float,
    n_leapfrog: int,
    momenta: np.ndarray,
    log_uniforms: np.ndarray,
):
    """Run one batch of HMC iterations; randomness is supplied by the caller.

    Returns (draws (b, d), accepts (b,) uint8, final position).
    """
    b, _ = momenta.shape
    qs = np.empty_like(momenta)
    acc = np.zeros(b, dtype=np.uint8)
    q = np.array(q0, dtype=np.float64)
    lp, grad = log_density_and_grad(model_id, q, c1, c2)
    for i in range(b):
        p = momenta[i].copy()
        h0 = -lp + 0.5 * float(p @ p)
        qn = q.copy()
        g = grad
        p = p + 0.5 * step_size * g
        ok = True
        lpn = lp
        for s in range(n_leapfrog):
            qn = qn + step_size * p
            lpn, g = log_density_and_grad(model_id, qn, c1, c2)
            if not np.isfinite(lpn):
                ok = False
                break
            if s < n_leapfrog - 1:
                p = p + step_size * g
        if ok:
            p = p + 0.5 * step_size * g
            h1 = -lpn + 0.5 * float(p @ p)
            if np.isfinite(h1) and log_uniforms[i] < h0 - h1:
                q, lp, grad = qn, lpn, g
                acc[i] = 1
        qs[i] = q
    return qs, acc, q


def rwmh_batch(
    model_id: int,
    c1: np.ndarray,
    c2: np.ndarray,
    q0: np.ndarray,
    step_size: float,
    noise: np.ndarray,
    log_uniforms: np.ndarray,
):
    """One batch of random-walk Metropolis; same calling convention as hmc_batch."""
    b, _ = noise.shape
    qs = np.empty_like(noise)
    acc = np.zeros(b, dtype=np.uint8)
    q = np.array(q0, dtype=np.float64)
    lp = log_density(model_id, q, c1, c2)
    for i in range(b):
        qn = q + step_size * noise[i]
        lpn = log_density(model_id, qn, c1, c2)
        if np.isfinite(lpn) and log_uniforms[i] < lpn - lp:
            q, lp = qn, lpn
            acc[i] = 1
        qs[i] = q
    return qs, acc, q
