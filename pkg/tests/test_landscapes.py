import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lsam.errors import ConfigurationError
from lsam.landscapes import (
    BASIN_LABELS, NoiseStream, make_basin_landscape, make_double_well, make_mlp_regression, make_quadratic,
)
from lsam.rng import stream
from lsam.verify import central_difference

coords = st.floats(-3, 3, allow_nan=False)


def test_quadratic_values_and_metadata():
    q = make_quadratic(2, [1.0, 4.0], noise_sigma=0.3)
    x = np.array([1.0, -2.0])
    assert q.eval(x) == pytest.approx(0.5 * (1 + 16))
    np.testing.assert_allclose(q.grad(x), [1.0, -8.0])
    assert q.smoothness_L == 4.0
    assert q.noise_sigma == 0.3
    assert q.minima[0].label == "wide-deep"
    np.testing.assert_array_equal(q.hessian(x), np.diag([1.0, 4.0]))


@pytest.mark.parametrize("diag", [[0.0, 1.0], [-1.0], [1.0, 2.0, 3.0]])
def test_quadratic_rejects_bad_curvature(diag):
    with pytest.raises(ConfigurationError):
        make_quadratic(2, diag)


def test_batched_evaluation_shapes():
    q = make_quadratic(3, [1.0, 2.0, 3.0])
    x = np.ones((4, 5, 3))
    assert q.eval(x).shape == (4, 5)
    assert q.grad(x).shape == (4, 5, 3)


@given(st.lists(coords, min_size=2, max_size=2))
def test_double_well_gradient_matches_differences(x):
    dw = make_double_well(2)
    x = np.array(x)
    np.testing.assert_allclose(dw.grad(x), central_difference(dw.eval, x), rtol=1e-5, atol=1e-6)


def test_double_well_minima():
    dw = make_double_well(1)
    locs = sorted(float(m.location[0]) for m in dw.minima)
    assert locs == [-1.0, 1.0]
    assert dw.smoothness_L is None


def test_basin_minima_are_stationary_and_labelled():
    b = make_basin_landscape()
    assert [m.label for m in b.minima] == list(BASIN_LABELS)
    for m in b.minima:
        assert np.linalg.norm(b.grad(m.location)) < 1e-10
        assert np.all(np.linalg.eigvalsh(b.hessian(m.location)) > 0)
    vals = {m.label: float(b.eval(m.location)) for m in b.minima}
    # deepest point is sharp, the wide-deep basin beats the wide-shallow one
    assert vals["deep-sharp"] < vals["wide-deep"] < vals["wide-shallow"]


def test_basin_sharpness_ordering():
    b = make_basin_landscape()
    top = {m.label: np.linalg.eigvalsh(b.hessian(m.location)).max() for m in b.minima}
    assert top["deep-sharp"] > 5 * top["wide-deep"]
    assert b.smoothness_L >= top["deep-sharp"]


def test_classify_maps_minima_to_themselves():
    b = make_basin_landscape()
    pts = np.stack([m.location for m in b.minima]) + 0.01
    np.testing.assert_array_equal(b.classify(pts, steps=2000), [0, 1, 2])


def test_basin_hessian_matches_gradient_differences(rng):
    b = make_basin_landscape()
    for _ in range(5):
        x = rng.uniform(-4, 4, 2)
        fd = np.stack([central_difference(lambda z: b.grad(z)[i], x) for i in range(2)])
        np.testing.assert_allclose(b.hessian(x), fd, atol=1e-6)


def test_mlp_loss_at_zero_is_mean_square_target():
    m = make_mlp_regression(hidden=6, samples=128, seed=3)
    x = np.zeros(m.dim)
    assert m.eval(x) == pytest.approx(np.mean(np.sum(m.targets**2, axis=-1)))


def test_mlp_gradient_and_minibatch(rng):
    m = make_mlp_regression(hidden=5, samples=64, seed=1, batch_size=8)
    x = 0.5 * rng.standard_normal(m.dim)
    np.testing.assert_allclose(m.grad(x), central_difference(m.eval, x), rtol=1e-6, atol=1e-8)
    full = m.stochastic_grad(x, slice(None))
    np.testing.assert_allclose(full, m.grad(x), rtol=1e-12)
    xi = m.noise(stream(0, "t"))
    assert xi.shape == (8,)
    # the minibatch average is unbiased
    draws = np.mean([m.stochastic_grad(x, m.noise(r)) for r in [stream(k, "mb") for k in range(3000)]], axis=0)
    assert np.linalg.norm(draws - m.grad(x)) < 0.1 * np.linalg.norm(m.grad(x)) + 1e-3


def test_mlp_size_limits():
    with pytest.raises(ConfigurationError):
        make_mlp_regression(hidden=65, samples=10, seed=0)


def test_gaussian_noise_second_moment():
    q = make_quadratic(4, [1.0] * 4, noise_sigma=0.7)
    x = np.zeros(4)
    xi = q.noise(stream(0, "moment"), (200_000,))
    g = q.stochastic_grad(x, xi)
    assert np.mean(np.sum(g**2, axis=-1)) == pytest.approx(0.49, rel=0.02)
    assert np.all(np.abs(g.mean(axis=0)) < 0.01)


def test_noise_stream_batched_matches_single():
    q = make_quadratic(2, [1.0, 1.0], noise_sigma=1.0)
    seeds = [3, 5, 8]
    batched = NoiseStream(q, [stream(s, "n") for s in seeds], block=16)
    singles = [NoiseStream(q, stream(s, "n"), block=16) for s in seeds]
    for _ in range(40):
        b = batched()
        for i, s in enumerate(singles):
            np.testing.assert_array_equal(b[i], s())


def test_effective_C():
    q = make_quadratic(2, [1.0, 3.0], noise_sigma=0.5)
    assert q.effective_C(2.0) == pytest.approx(3.0 * 2.0 + 0.5 * np.sqrt(2))
    assert make_double_well(1).effective_C(1.0) == float("inf")
