import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lsam.dual_loop import ChainState, ScheduleSpec, anchor_gap_bound, run_chain, step
from lsam.errors import ChainDivergenceError, ConfigurationError
from lsam.landscapes import make_double_well, make_quadratic
from lsam.sam_map import SamParams

finite = st.floats(-5, 5, allow_nan=False)


def test_single_step_arithmetic():
    q = make_quadratic(2, [1.0, 1.0])
    sched = ScheduleSpec(0.5, eta_mode="constant")
    new, diag = step(q, sched, None, ChainState(np.array([1.0, 0.0]), np.array([1.0, 0.0])))
    np.testing.assert_allclose(new.x, [0.5, 0.0])
    np.testing.assert_allclose(new.y, [0.5, 0.0])
    assert new.t == 1
    assert diag.f_val == pytest.approx(0.5)
    assert diag.z_norm_sq == 0.0


def test_step_with_coupling():
    q = make_quadratic(1, [1.0])
    sched = ScheduleSpec(0.25, lambda_=1.0, alpha=0.5, eta_mode="constant")
    new, diag = step(q, sched, None, ChainState(np.array([2.0]), np.array([0.0])))
    # x' = 2 - 0.25 (2 + 2) = 1, y' = 0.5
    np.testing.assert_allclose(new.x, [1.0])
    np.testing.assert_allclose(new.y, [0.5])
    assert diag.G_norm_sq == pytest.approx(16.0)
    assert diag.phi == pytest.approx(4.0)


def test_schedules():
    s = ScheduleSpec(0.4, "decaying", 0.2)
    assert s.eta(3) == pytest.approx(0.2)
    assert s.rho(3) == pytest.approx(0.1)
    assert ScheduleSpec(0.4, "constant", 0.2).rho(100) == 0.2
    st_ = ScheduleSpec(0.4, eta_mode="step", decay_at=5, decay_factor=0.5)
    assert st_.eta(4) == 0.4 and st_.eta(5) == 0.2


@pytest.mark.parametrize("kw", [
    {"eta0": 0.0}, {"eta0": 0.1, "rho_mode": "big"}, {"eta0": 0.1, "rho_mode": "constant"},
    {"eta0": 0.1, "alpha": 0.0}, {"eta0": 0.1, "alpha": 1.5}, {"eta0": 0.1, "eta_mode": "step"},
    {"eta0": 0.1, "lambda_": -1.0},
])
def test_schedule_validation(kw):
    with pytest.raises(ConfigurationError):
        ScheduleSpec(**kw)


def test_alpha_one_keeps_anchor_on_iterate():
    q = make_quadratic(2, [1.0, 3.0], noise_sigma=0.5)
    run = run_chain(q, ScheduleSpec(0.05, "decaying", 0.1, lambda_=1.0, alpha=1.0), None,
                    np.array([1.0, -2.0]), np.array([1.0, -2.0]), 200, 3)
    assert np.all(run.z_norm_sq == 0.0)


def test_rerun_is_deterministic():
    q = make_quadratic(2, [1.0, 2.0], noise_sigma=0.3)
    sched = ScheduleSpec(0.08, "constant", 0.05, lambda_=1.0, alpha=0.5)
    a = run_chain(q, sched, None, np.ones(2), np.zeros(2), 300, 11)
    b = run_chain(q, sched, None, np.ones(2), np.zeros(2), 300, 11)
    np.testing.assert_array_equal(a.G_norm_sq, b.G_norm_sq)
    np.testing.assert_array_equal(a.final.x, b.final.x)


def test_batched_replicas_match_single_runs():
    q = make_quadratic(2, [1.0, 2.0], noise_sigma=0.3)
    sched = ScheduleSpec(0.08, "decaying", 0.05, lambda_=1.0, alpha=0.5)
    x0 = np.array([1.0, -1.0])
    batch = run_chain(q, sched, None, x0, x0, 200, [4, 5, 6])
    for i, s in enumerate([4, 5, 6]):
        single = run_chain(q, sched, None, x0, x0, 200, s)
        np.testing.assert_array_equal(batch.replica(i).f_val, single.f_val)
        np.testing.assert_array_equal(batch.final.x[i], single.final.x)


@pytest.mark.parametrize("alpha", [1.0, 0.5, 0.1])
def test_descent_inequality_without_noise(alpha):
    # phi(x', y') <= phi(x, y) - eta (1 - eta (L + lam) / 2) |G|^2
    q = make_quadratic(2, [1.0, 4.0])
    lam = 1.0
    sched = ScheduleSpec(1.0 / (4.0 + lam), lambda_=lam, alpha=alpha)
    run = run_chain(q, sched, None, np.array([3.0, -2.0]), np.array([-1.0, 1.0]), 10_000, 0)
    eta = np.array([sched.eta(t) for t in range(run.T - 1)])
    bound = run.phi[:-1] - eta * (1 - eta * (4.0 + lam) / 2) * run.G_norm_sq[:-1]
    assert np.all(run.phi[1:] <= bound + 1e-12 * (1 + np.abs(run.phi[:-1])))


def test_anchor_recursion_holds_to_rounding():
    q = make_quadratic(2, [1.0, 2.0], noise_sigma=0.5)
    sched = ScheduleSpec(0.05, "constant", 0.1, lambda_=1.0, alpha=0.3)
    worst = []

    def observe(t, x, y, x_new, y_new, g):
        z_new = x_new - y_new
        expect = (1 - sched.alpha) * (x_new - y)
        worst.append(np.max(np.abs(z_new - expect) / np.maximum(np.abs(x_new) + np.abs(y), 1e-300)))

    run_chain(q, sched, None, np.array([2.0, 1.0]), np.zeros(2), 2000, 1, on_step=observe)
    assert max(worst) <= 4 * np.finfo(float).eps


@given(x=arrays(float, 3, elements=finite), y=arrays(float, 3, elements=finite),
       alpha=st.floats(0.01, 1.0), lam=st.floats(0.0, 3.0))
def test_update_identity(x, y, alpha, lam):
    q = make_quadratic(3, [1.0, 2.0, 0.5])
    sched = ScheduleSpec(1.0 / (2.0 + lam), lambda_=lam, alpha=alpha, eta_mode="constant")
    new, _ = step(q, sched, None, ChainState(x, y), xi=np.zeros(3))
    eta = sched.eta0
    x_new = x - eta * (q.grad(x) + lam * (x - y))
    np.testing.assert_allclose(new.x, x_new, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(new.y, alpha * x_new + (1 - alpha) * y, rtol=1e-12, atol=1e-12)


def test_step_cap_messages():
    q = make_quadratic(1, [2.0])
    with pytest.raises(ConfigurationError, match=r"1/\(L\+λ\)"):
        run_chain(q, ScheduleSpec(0.5, lambda_=1.0), None, np.ones(1), np.ones(1), 5, 0)
    with pytest.raises(ConfigurationError, match=r"1/\(4\(L\+λ\)\)"):
        run_chain(q, ScheduleSpec(0.1, "constant", 0.1, lambda_=1.0), None, np.ones(1), np.ones(1), 5, 0)
    run_chain(q, ScheduleSpec(1 / 12, "constant", 0.1, lambda_=1.0), None, np.ones(1), np.ones(1), 5, 0)


def test_cap_skipped_without_smoothness_constant():
    dw = make_double_well(1)
    assert dw.smoothness_L is None
    run = run_chain(dw, ScheduleSpec(0.01, lambda_=1.0, alpha=0.5), None, np.ones(1), np.ones(1), 10, 0)
    assert run.T == 10


def test_divergence_carries_partial_run():
    dw = make_double_well(1)
    with pytest.raises(ChainDivergenceError) as err, np.errstate(over="ignore", invalid="ignore"):
        run_chain(dw, ScheduleSpec(5.0, eta_mode="constant"), None, np.array([3.0]), np.array([3.0]), 100, 0)
    partial = err.value.diagnostics["partial"]
    t = err.value.diagnostics["t"]
    assert 0 < t < 100 and partial.T == t
    assert np.all(np.isfinite(partial.f_val))


def test_shape_mismatch_rejected():
    q = make_quadratic(2, [1.0, 1.0])
    with pytest.raises(ConfigurationError):
        run_chain(q, ScheduleSpec(0.1), None, np.ones(2), np.ones(3), 5, 0)


def test_anchor_gap_bound():
    q = make_quadratic(2, [1.0, 2.0], noise_sigma=0.0)
    sched = ScheduleSpec(0.05, "constant", 0.1, lambda_=2.0)
    assert anchor_gap_bound(q, sched, 3.0) == pytest.approx((2.0 * 3.0 + 0.1 * 2.0) / 2.0)
    with pytest.raises(ConfigurationError):
        anchor_gap_bound(q, ScheduleSpec(0.05), 3.0)


def test_sam_perturbation_changes_trajectory():
    q = make_quadratic(2, [1.0, 2.0])
    x0 = np.array([1.0, 1.0])
    plain = run_chain(q, ScheduleSpec(0.1, lambda_=0.0), None, x0, x0, 50, 0)
    sam = run_chain(q, ScheduleSpec(0.1, "constant", 0.05), SamParams(), x0, x0, 50, 0)
    assert not np.allclose(plain.final.x, sam.final.x)
