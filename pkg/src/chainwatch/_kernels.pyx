# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: autocorrelation-time truncation and sampler inner loops.

Mirrors chainwatch._kernels_py (the import-time fallback); keep the two in
sync. The autocovariance here is a direct O(n * lags-used) sum with early
stopping, which beats the FFT fallback whenever the chain decorrelates
quickly.
"""
import numpy as np

from libc.math cimport INFINITY, exp, isfinite, log1p

BACKEND = "compiled"

LINREG = 0
SCHOOLS_CENTERED = 1
SCHOOLS_NONCENTERED = 2
FUNNEL = 3
NORMAL_TOY = 4

cdef enum:
    MODEL_LINREG = 0
    MODEL_SCHOOLS_CENTERED = 1
    MODEL_SCHOOLS_NONCENTERED = 2
    MODEL_FUNNEL = 3
    MODEL_NORMAL_TOY = 4


cdef double _mean_autocov(double[:, ::1] zc, Py_ssize_t t) noexcept nogil:
    # zc holds centered chains; biased per-chain autocovariance at lag t, averaged.
    cdef Py_ssize_t m = zc.shape[0], n = zc.shape[1]
    cdef Py_ssize_t c, i
    cdef double acc, total = 0.0
    for c in range(m):
        acc = 0.0
        for i in range(n - t):
            acc += zc[c, i] * zc[c, i + t]
        total += acc / n
    return total / m


def geyer_tau(double[:, ::1] z, double w, double var_plus):
    """Autocorrelation time 1 + 2*sum(rho) with pairwise Geyer truncation."""
    cdef Py_ssize_t m = z.shape[0], n = z.shape[1]
    cdef Py_ssize_t c, i, k
    zc_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] zc = zc_arr
    cdef double mu, tau_sum = 0.0, prev = INFINITY, p, rho_even, rho_odd
    with nogil:
        for c in range(m):
            mu = 0.0
            for i in range(n):
                mu += z[c, i]
            mu /= n
            for i in range(n):
                zc[c, i] = z[c, i] - mu
        k = 0
        while 2 * k + 1 <= n - 1:
            if k == 0:
                rho_even = 1.0
            else:
                rho_even = 1.0 - (w - _mean_autocov(zc, 2 * k)) / var_plus
            rho_odd = 1.0 - (w - _mean_autocov(zc, 2 * k + 1)) / var_plus
            p = rho_even + rho_odd
            if p < 0.0:
                break
            if p > prev:
                p = prev
            tau_sum += p
            prev = p
            k += 1
    return -1.0 + 2.0 * tau_sum


cdef double _logp_grad(int model_id, double[::1] q, double[::1] c1, double[::1] c2,
                       double[::1] grad) noexcept nogil:
    cdef Py_ssize_t i, n
    cdef double lp = 0.0
    cdef double alpha, beta, u, sigma2, r, sr, srx, srr
    cdef double mu, tau, tau2, dt, sdt, sdt2, sresid, sresidz, v, inv_var, sx2

    if model_id == MODEL_LINREG:
        n = c1.shape[0]
        alpha = q[0]
        beta = q[1]
        u = q[2]
        sigma2 = exp(2.0 * u)
        sr = 0.0
        srx = 0.0
        srr = 0.0
        for i in range(n):
            r = c2[i] - (alpha + beta * c1[i])
            sr += r
            srx += r * c1[i]
            srr += r * r
        lp = -alpha * alpha / 200.0 - beta * beta / 200.0 - sigma2 / 50.0 + u \
            - n * u - 0.5 * srr / sigma2
        grad[0] = -alpha / 100.0 + sr / sigma2
        grad[1] = -beta / 100.0 + srx / sigma2
        grad[2] = -2.0 * sigma2 / 50.0 + 1.0 - n + srr / sigma2
        return lp

    if model_id == MODEL_SCHOOLS_CENTERED:
        n = c1.shape[0]
        mu = q[0]
        u = q[1]
        tau2 = exp(2.0 * u)
        sdt = 0.0
        sdt2 = 0.0
        lp = -mu * mu / 200.0 - log1p(tau2 / 25.0) + u - n * u
        for i in range(n):
            dt = q[2 + i] - mu
            sdt += dt
            sdt2 += dt * dt
            r = (c1[i] - q[2 + i]) / (c2[i] * c2[i])
            lp -= 0.5 * (c1[i] - q[2 + i]) * (c1[i] - q[2 + i]) / (c2[i] * c2[i])
            grad[2 + i] = -dt / tau2 + r
        lp -= 0.5 * sdt2 / tau2
        grad[0] = -mu / 100.0 + sdt / tau2
        grad[1] = 1.0 - n - 2.0 * tau2 / (25.0 + tau2) + sdt2 / tau2
        return lp

    if model_id == MODEL_SCHOOLS_NONCENTERED:
        n = c1.shape[0]
        mu = q[0]
        u = q[1]
        tau = exp(u)
        sresid = 0.0
        sresidz = 0.0
        lp = -mu * mu / 200.0 - log1p(tau * tau / 25.0) + u
        for i in range(n):
            dt = c1[i] - mu - tau * q[2 + i]
            r = dt / (c2[i] * c2[i])
            sresid += r
            sresidz += r * q[2 + i]
            lp += -0.5 * q[2 + i] * q[2 + i] - 0.5 * dt * dt / (c2[i] * c2[i])
            grad[2 + i] = -q[2 + i] + tau * r
        grad[0] = -mu / 100.0 + sresid
        grad[1] = 1.0 - 2.0 * tau * tau / (25.0 + tau * tau) + tau * sresidz
        return lp

    if model_id == MODEL_FUNNEL:
        n = q.shape[0] - 1
        v = q[0]
        inv_var = exp(-v)
        sx2 = 0.0
        for i in range(n):
            sx2 += q[1 + i] * q[1 + i]
            grad[1 + i] = -q[1 + i] * inv_var
        lp = -v * v / 18.0 - 0.5 * n * v - 0.5 * sx2 * inv_var
        grad[0] = -v / 9.0 - 0.5 * n + 0.5 * sx2 * inv_var
        return lp

    if model_id == MODEL_NORMAL_TOY:
        n = q.shape[0]
        sx2 = 0.0
        for i in range(n):
            sx2 += q[i] * q[i]
            grad[i] = -q[i]
        return -0.5 * sx2

    return -INFINITY


def log_density_and_grad(int model_id, q, c1, c2):
    """Unconstrained-space log density (up to a constant) and its gradient."""
    if model_id < MODEL_LINREG or model_id > MODEL_NORMAL_TOY:
        raise ValueError(f"unknown model id {model_id}")
    q_arr = np.ascontiguousarray(q, dtype=np.float64)
    grad = np.empty_like(q_arr)
    cdef double lp = _logp_grad(model_id, q_arr, c1, c2, grad)
    return lp, grad


def log_density(int model_id, q, c1, c2):
    return log_density_and_grad(model_id, q, c1, c2)[0]


def hmc_batch(int model_id, double[::1] c1, double[::1] c2, q0, double step_size,
              int n_leapfrog, double[:, ::1] momenta, double[::1] log_uniforms):
    """Run one batch of HMC iterations; randomness is supplied by the caller.

    Returns (draws (b, d), accepts (b,) uint8, final position).
    """
    cdef Py_ssize_t b = momenta.shape[0], d = momenta.shape[1]
    qs_arr = np.empty((b, d), dtype=np.float64)
    acc_arr = np.zeros(b, dtype=np.uint8)
    q_arr = np.ascontiguousarray(q0, dtype=np.float64)
    p_arr = np.empty(d, dtype=np.float64)
    qn_arr = np.empty(d, dtype=np.float64)
    g_arr = np.empty(d, dtype=np.float64)
    grad_arr = np.empty(d, dtype=np.float64)
    cdef double[:, ::1] qs = qs_arr
    cdef unsigned char[::1] acc = acc_arr
    cdef double[::1] q = q_arr
    cdef double[::1] p = p_arr
    cdef double[::1] qn = qn_arr
    cdef double[::1] g = g_arr
    cdef double[::1] grad = grad_arr
    cdef double lp, lpn, h0, h1, ke
    cdef Py_ssize_t i, j, s
    cdef bint ok

    with nogil:
        lp = _logp_grad(model_id, q, c1, c2, grad)
        for i in range(b):
            ke = 0.0
            for j in range(d):
                p[j] = momenta[i, j]
                ke += p[j] * p[j]
                qn[j] = q[j]
                g[j] = grad[j]
            h0 = -lp + 0.5 * ke
            for j in range(d):
                p[j] += 0.5 * step_size * g[j]
            ok = True
            lpn = lp
            for s in range(n_leapfrog):
                for j in range(d):
                    qn[j] += step_size * p[j]
                lpn = _logp_grad(model_id, qn, c1, c2, g)
                if not isfinite(lpn):
                    ok = False
                    break
                if s < n_leapfrog - 1:
                    for j in range(d):
                        p[j] += step_size * g[j]
            if ok:
                ke = 0.0
                for j in range(d):
                    p[j] += 0.5 * step_size * g[j]
                    ke += p[j] * p[j]
                h1 = -lpn + 0.5 * ke
                if isfinite(h1) and log_uniforms[i] < h0 - h1:
                    lp = lpn
                    for j in range(d):
                        q[j] = qn[j]
                        grad[j] = g[j]
                    acc[i] = 1
            for j in range(d):
                qs[i, j] = q[j]
    return qs_arr, acc_arr, q_arr


def rwmh_batch(int model_id, double[::1] c1, double[::1] c2, q0, double step_size,
               double[:, ::1] noise, double[::1] log_uniforms):
    """One batch of random-walk Metropolis; same calling convention as hmc_batch."""
    cdef Py_ssize_t b = noise.shape[0], d = noise.shape[1]
    qs_arr = np.empty((b, d), dtype=np.float64)
    acc_arr = np.zeros(b, dtype=np.uint8)
    q_arr = np.ascontiguousarray(q0, dtype=np.float64)
    qn_arr = np.empty(d, dtype=np.float64)
    scratch_arr = np.empty(d, dtype=np.float64)
    cdef double[:, ::1] qs = qs_arr
    cdef unsigned char[::1] acc = acc_arr
    cdef double[::1] q = q_arr
    cdef double[::1] qn = qn_arr
    cdef double[::1] scratch = scratch_arr
    cdef double lp, lpn
    cdef Py_ssize_t i, j

    with nogil:
        lp = _logp_grad(model_id, q, c1, c2, scratch)
        for i in range(b):
            for j in range(d):
                qn[j] = q[j] + step_size * noise[i, j]
            lpn = _logp_grad(model_id, qn, c1, c2, scratch)
            if isfinite(lpn) and log_uniforms[i] < lpn - lp:
                lp = lpn
                for j in range(d):
                    q[j] = qn[j]
                acc[i] = 1
            for j in range(d):
                qs[i, j] = q[j]
    return qs_arr, acc_arr, q_arr
