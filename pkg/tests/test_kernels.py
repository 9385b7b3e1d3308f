"""Parity between the compiled extension and the pure fallback."""
import numpy as np
import pytest

from chainwatch import kernels
from chainwatch.kernels import available_backends

BACKENDS = available_backends()
needs_compiled = pytest.mark.skipif(
    "compiled" not in BACKENDS, reason="compiled extension not built"
)

MODEL_CASES = [
    (kernels.LINREG, 3),
    (kernels.SCHOOLS_CENTERED, 10),
    (kernels.SCHOOLS_NONCENTERED, 10),
    (kernels.FUNNEL, 10),
    (kernels.NORMAL_TOY, 5),
]


def _consts(model_id):
    from chainwatch.samplers import EIGHT_SCHOOLS_SIGMA, EIGHT_SCHOOLS_Y, LINREG_X, LINREG_Y

    if model_id == kernels.LINREG:
        return LINREG_X, LINREG_Y
    if model_id in (kernels.SCHOOLS_CENTERED, kernels.SCHOOLS_NONCENTERED):
        return EIGHT_SCHOOLS_Y, EIGHT_SCHOOLS_SIGMA
    return np.empty(0), np.empty(0)


@needs_compiled
@pytest.mark.parametrize("model_id,dim", MODEL_CASES)
def test_log_density_and_grad_parity(model_id, dim):
    pure, compiled = BACKENDS["pure"], BACKENDS["compiled"]
    c1, c2 = _consts(model_id)
    rng = np.random.default_rng(model_id)
    for _ in range(20):
        q = rng.normal(0, 1.0, dim)
        lp_p, g_p = pure.log_density_and_grad(model_id, q, c1, c2)
        lp_c, g_c = compiled.log_density_and_grad(model_id, q, c1, c2)
        assert lp_c == pytest.approx(lp_p, rel=1e-12, abs=1e-12)
        np.testing.assert_allclose(g_c, g_p, rtol=1e-11, atol=1e-11)


@needs_compiled
def test_geyer_tau_parity():
    pure, compiled = BACKENDS["pure"], BACKENDS["compiled"]
    rng = np.random.default_rng(3)
    for trial in range(10):
        m, n = int(rng.integers(1, 6)), int(rng.integers(8, 400))
        z = rng.standard_normal((m, n))
        for i in range(1, n):  # correlate to exercise longer truncation
            z[:, i] = 0.8 * z[:, i - 1] + 0.6 * z[:, i]
        z = np.ascontiguousarray(z)
        w = float(z.var(axis=1, ddof=1).mean())
        var_plus = float(z.var(axis=1).mean())
        if m > 1:
            var_plus += float(z.mean(axis=1).var(ddof=1))
        else:
            var_plus += 0.0
        t_p = pure.geyer_tau(z, w, var_plus)
        t_c = compiled.geyer_tau(z, w, var_plus)
        assert t_c == pytest.approx(t_p, rel=1e-9, abs=1e-9)


@needs_compiled
@pytest.mark.parametrize("model_id,dim", [(kernels.NORMAL_TOY, 4), (kernels.SCHOOLS_NONCENTERED, 10)])
def test_hmc_batch_parity_short_trajectories(model_id, dim):
    pure, compiled = BACKENDS["pure"], BACKENDS["compiled"]
    c1, c2 = _consts(model_id)
    rng = np.random.default_rng(9)
    q0 = rng.normal(0, 0.5, dim)
    momenta = rng.standard_normal((5, dim))
    log_u = np.log(rng.random(5))
    out_p = pure.hmc_batch(model_id, c1, c2, q0, 0.1, 5, momenta, log_u)
    out_c = compiled.hmc_batch(model_id, c1, c2, q0, 0.1, 5, momenta, log_u)
    np.testing.assert_allclose(out_c[0], out_p[0], rtol=1e-9, atol=1e-9)
    assert np.array_equal(out_c[1], out_p[1])


@needs_compiled
def test_rwmh_batch_parity():
    pure, compiled = BACKENDS["pure"], BACKENDS["compiled"]
    c1, c2 = _consts(kernels.LINREG)
    rng = np.random.default_rng(10)
    q0 = np.zeros(3)
    noise = rng.standard_normal((50, 3))
    log_u = np.log(rng.random(50))
    out_p = pure.rwmh_batch(kernels.LINREG, c1, c2, q0, 0.3, noise, log_u)
    out_c = compiled.rwmh_batch(kernels.LINREG, c1, c2, q0, 0.3, noise, log_u)
    np.testing.assert_allclose(out_c[0], out_p[0], rtol=1e-9, atol=1e-9)
    assert np.array_equal(out_c[1], out_p[1])


def test_selected_backend_exposed():
    assert kernels.BACKEND in ("compiled", "pure")
    assert "pure" in BACKENDS
