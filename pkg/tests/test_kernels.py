import numpy as np
import pytest
from scipy.stats import norm

from lsam.conditional import ConditionalSamplerConfig, sample_conditional
from lsam.errors import ConfigurationError
from lsam.kernels import (
    classify_tail, exp_power_kernel, exp_power_normalizer_exact, gaussian_kernel, kernel_normalizer,
    lsam_density_quadrature, lsam_log_density_on_grid, stationary_kernel,
)
from lsam.landscapes import make_quadratic
from lsam.quadrature import QuadratureGrid
from lsam.sam_map import SamParams


def test_gaussian_kernel_values():
    k = gaussian_kernel(0.5, 2)
    x, y = np.array([1.0, 0.0]), np.array([0.0, 0.5])
    assert k.k(x, y) == pytest.approx(1.25 / 0.5)
    np.testing.assert_allclose(k.grad_x(x, y), (x - y) / 0.25)
    np.testing.assert_allclose(k.grad_y(x, y), -(x - y) / 0.25)
    assert k.normalizer_Z == pytest.approx(2 * np.pi * 0.25)
    assert k.tail_class == "poly-exp growth"


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
def test_exp_power_normalizer(dim, alpha):
    k = exp_power_kernel(0.7, alpha, dim)
    assert kernel_normalizer(k) == pytest.approx(exp_power_normalizer_exact(0.7, alpha, dim), rel=1e-7)


def test_exp_power_two_is_gaussian():
    s = 0.8
    k = exp_power_kernel(1 / (2 * s * s), 2.0, 2)
    g = gaussian_kernel(s, 2)
    z = np.array([[0.3, -1.2], [2.0, 0.1]])
    np.testing.assert_allclose(k.phi(z), g.phi(z))
    np.testing.assert_allclose(k.grad_phi(z), g.grad_phi(z))
    np.testing.assert_array_equal(exp_power_kernel(1.0, 1.0, 2).grad_phi(np.zeros(2)), np.zeros(2))


def test_non_radial_normalizer_2d():
    # anisotropic Gaussian: Z = 2 pi a b
    a, b = 0.5, 2.0
    k = stationary_kernel(
        lambda z: 0.5 * (z[..., 0] ** 2 / a**2 + z[..., 1] ** 2 / b**2),
        lambda z: z / np.array([a**2, b**2]), 2,
    )
    assert k.tail_class == "poly-exp growth"
    assert kernel_normalizer(k) == pytest.approx(2 * np.pi * a * b, rel=1e-8)


def test_tail_classification():
    assert classify_tail(lambda z: np.sum(z * z, axis=-1), 2) == "poly-exp growth"
    assert classify_tail(lambda z: 3.0 * np.log1p(np.linalg.norm(z, axis=-1)), 1) == "super-log growth"
    assert classify_tail(lambda z: 0.5 * np.log1p(np.linalg.norm(z, axis=-1)), 1) == "none"


def test_inadmissible_kernel_is_rejected():
    k = stationary_kernel(lambda z: 0.5 * np.log1p(np.abs(z[..., 0])), lambda z: 0 * z, 1)
    assert not k.admissible
    q = make_quadratic(1, [1.0])
    with pytest.raises(ConfigurationError):
        lsam_log_density_on_grid(q, SamParams(), k, QuadratureGrid.symmetric(3, 0.1, 1))
    with pytest.raises(ConfigurationError):
        sample_conditional(q, SamParams(), k, np.zeros(1), ConditionalSamplerConfig(chain_len=10))
    with pytest.raises(ConfigurationError):
        kernel_normalizer(k)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_conjugate_smoothed_density(s):
    # N(0, 1) convolved with N(0, s^2)
    q = make_quadratic(1, [1.0])
    grid = QuadratureGrid.symmetric(10.0, 0.01, 1)
    ys = np.linspace(-3, 3, 7)[:, None]
    got = lsam_density_quadrature(q, SamParams(0.0), gaussian_kernel(s, 1), ys, grid)
    np.testing.assert_allclose(got, norm.pdf(ys[:, 0], scale=np.sqrt(1 + s * s)), rtol=1e-9)


def test_smoothed_density_2d_integrates_to_one():
    q = make_quadratic(2, [1.0, 2.0])
    grid = QuadratureGrid.symmetric(6.0, 0.2, 2)
    logd = lsam_log_density_on_grid(q, SamParams(0.0), gaussian_kernel(0.7, 2), grid)
    mass = np.exp(logd + grid.log_weights()).sum()
    assert mass == pytest.approx(1.0, abs=1e-6)
