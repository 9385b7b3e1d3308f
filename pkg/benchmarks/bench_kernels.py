"""Benchmark the compiled kernel extension against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py
"""
import time

import numpy as np

from chainwatch.kernels import available_backends
from chainwatch.samplers import EIGHT_SCHOOLS_SIGMA, EIGHT_SCHOOLS_Y

BACKENDS = available_backends()


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def ar1_chains(m, n, rho=0.9, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, n))
    for i in range(1, n):
        z[:, i] = rho * z[:, i - 1] + np.sqrt(1 - rho * rho) * z[:, i]
    return np.ascontiguousarray(z)


def bench_geyer(backend, z):
    w = float(z.var(axis=1, ddof=1).mean())
    var_plus = float(z.var(axis=1).mean()) + float(z.mean(axis=1).var(ddof=1))
    return timeit(lambda: backend.geyer_tau(z, w, var_plus))


def bench_hmc(backend, n_iter=500, n_leapfrog=10):
    rng = np.random.default_rng(1)
    q0 = rng.standard_normal(10)
    momenta = rng.standard_normal((n_iter, 10))
    log_u = np.log(rng.random(n_iter))
    return timeit(lambda: backend.hmc_batch(
        1, EIGHT_SCHOOLS_Y, EIGHT_SCHOOLS_SIGMA, q0, 0.2, n_leapfrog, momenta, log_u))


def bench_rwmh(backend, n_iter=5000):
    rng = np.random.default_rng(2)
    q0 = rng.standard_normal(10)
    noise = rng.standard_normal((n_iter, 10))
    log_u = np.log(rng.random(n_iter))
    return timeit(lambda: backend.rwmh_batch(
        1, EIGHT_SCHOOLS_Y, EIGHT_SCHOOLS_SIGMA, q0, 0.5, noise, log_u))


def main():
    if "compiled" not in BACKENDS:
        print("compiled extension not built; only the pure backend is available")
    rows = []
    for m, n in ((4, 1000), (4, 5000), (8, 20000)):
        z = ar1_chains(m, n)
        rows.append((f"geyer_tau AR(1) {m}x{n}",
                     {name: bench_geyer(mod, z) for name, mod in BACKENDS.items()}))
    rows.append(("hmc_batch schools 500x10 steps",
                 {name: bench_hmc(mod) for name, mod in BACKENDS.items()}))
    rows.append(("rwmh_batch schools 5000 iters",
                 {name: bench_rwmh(mod) for name, mod in BACKENDS.items()}))

    width = max(len(r[0]) for r in rows) + 2
    print(f"{'kernel':<{width}}{'pure':>12}{'compiled':>12}{'speedup':>10}")
    for label, t in rows:
        pure = t.get("pure")
        comp = t.get("compiled")
        speedup = f"{pure / comp:.1f}x" if comp else "-"
        comp_s = f"{comp * 1e3:9.2f} ms" if comp else "      -"
        print(f"{label:<{width}}{pure * 1e3:9.2f} ms{comp_s}{speedup:>10}")


if __name__ == "__main__":
    main()
