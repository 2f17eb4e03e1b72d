import warnings

import numpy as np
import pytest

from lsam.conditional import (
    ConditionalSamplerConfig, batch_means_ess, sample_conditional, score_from_samples, score_via_conditional,
)
from lsam.errors import ChainDivergenceError, ConfigurationError, SamplerHealthWarning
from lsam.kernels import exp_power_kernel, gaussian_kernel
from lsam.landscapes import make_double_well, make_quadratic
from lsam.sam_map import SamParams


@pytest.mark.parametrize("kw", [
    {"method": "HMC"}, {"step": 0.0}, {"chain_len": 0}, {"chain_len": 10, "burn_in": 10},
])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        ConditionalSamplerConfig(**kw)


def test_default_burn_in():
    assert ConditionalSamplerConfig(chain_len=1000).n_burn == 200
    assert ConditionalSamplerConfig(chain_len=1000, burn_in=0).n_burn == 0


def test_gaussian_score_routes_agree(rng):
    k = gaussian_kernel(0.6, 2)
    y = np.array([0.3, -0.2])
    xs = rng.standard_normal((500, 2))
    closed = score_from_samples(k, xs, y)
    general = -np.mean(k.grad_y(xs, y), axis=0)
    np.testing.assert_allclose(closed, general, rtol=1e-12)


def test_mala_conjugate_mean_within_mc_error():
    s = 1.0
    q = make_quadratic(1, [1.0])
    ys = np.array([[-2.0], [0.5], [1.5]])
    cfg = ConditionalSamplerConfig("MALA", step=1.0, chain_len=20_000, seed=4)
    chain = sample_conditional(q, SamParams(0.0), gaussian_kernel(s, 1), ys, cfg)
    # q(x|y) = N(y / (1 + s^2), s^2 / (1 + s^2))
    mean = chain.samples.mean(axis=0)[:, 0]
    ess = batch_means_ess(chain.samples)[:, 0]
    sd = np.sqrt(s * s / (1 + s * s))
    assert np.all(np.abs(mean - ys[:, 0] / (1 + s * s)) < 5 * sd / np.sqrt(ess))
    assert np.all((chain.acceptance_rate > 0.3) & (chain.acceptance_rate < 1.0))
    assert chain.samples.var(axis=0)[:, 0] == pytest.approx(np.full(3, sd * sd), rel=0.1)


def test_sgld_conjugate_mean():
    q = make_quadratic(1, [1.0], noise_sigma=0.0)
    cfg = ConditionalSamplerConfig("SGLD", step=0.05, chain_len=40_000, seed=2)
    est = score_via_conditional(q, SamParams(0.0), gaussian_kernel(1.0, 1), np.array([[1.0]]), cfg)
    assert est.score[0, 0] == pytest.approx(-0.5, abs=0.08)
    assert est.acceptance_rate is None


def test_non_gaussian_kernel_score_uses_kernel_gradient():
    q = make_quadratic(1, [1.0])
    k = exp_power_kernel(1.0, 1.5, 1)
    cfg = ConditionalSamplerConfig("MALA", step=0.5, chain_len=2000, seed=0)
    est = score_via_conditional(q, SamParams(0.0), k, np.array([[0.7]]), cfg)
    chain = sample_conditional(q, SamParams(0.0), k, np.array([[0.7]]), cfg)
    np.testing.assert_allclose(est.score, -np.mean(k.grad_y(chain.samples, np.array([[0.7]])), axis=0))


def test_same_seed_same_chain():
    dw = make_double_well(1)
    cfg = ConditionalSamplerConfig("MALA", step=0.3, chain_len=500, seed=9)
    a = sample_conditional(dw, SamParams(0.05), gaussian_kernel(0.5, 1), np.array([[0.2]]), cfg)
    b = sample_conditional(dw, SamParams(0.05), gaussian_kernel(0.5, 1), np.array([[0.2]]), cfg)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_divergence_guard():
    q = make_quadratic(1, [1.0])
    cfg = ConditionalSamplerConfig("SGLD", step=10.0, chain_len=500)
    with pytest.raises(ChainDivergenceError) as err:
        sample_conditional(q, SamParams(0.0), gaussian_kernel(0.1, 1), np.array([[1.0]]), cfg)
    assert "iteration" in err.value.diagnostics


def test_health_warning_on_poor_acceptance():
    q = make_quadratic(1, [1.0])
    cfg = ConditionalSamplerConfig("MALA", step=50.0, chain_len=300)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        chain = sample_conditional(q, SamParams(0.0), gaussian_kernel(1.0, 1), np.array([[0.0]]), cfg)
    assert any(issubclass(w.category, SamplerHealthWarning) for w in rec)
    assert chain.warnings


def test_ess_of_independent_draws(rng):
    x = rng.standard_normal((10_000, 1))
    assert 5000 < batch_means_ess(x)[0] < 20_000
