import numpy as np
import pytest

from src.application.common.errors import ParameterKeyError
from src.application.services.numerics.optimizers import (
    AmsGradState,
    PlateauScheduler,
    amsgrad_step,
    scheduler_step,
)


def test_zero_gradient_leaves_parameters_unchanged():
    params = {"w": np.array([1.0, -2.0])}
    state = AmsGradState.create(params)
    for _ in range(5):
        params = amsgrad_step(state, params, {"w": np.zeros(2)}, lr=0.1)
    np.testing.assert_array_equal(params["w"], [1.0, -2.0])


def test_first_step_moves_against_gradient_sign_by_lr():
    params = {"w": np.array([0.0, 0.0])}
    state = AmsGradState.create(params)
    out = amsgrad_step(state, params, {"w": np.array([3.0, -0.5])}, lr=0.01)
    np.testing.assert_allclose(out["w"], [-0.01, 0.01], rtol=1e-6)
    assert state.step == 1


def test_missing_gradient_key_is_rejected():
    params = {"w": np.zeros(2), "b": np.zeros(1)}
    state = AmsGradState.create(params)
    with pytest.raises(ParameterKeyError):
        amsgrad_step(state, params, {"w": np.ones(2)}, lr=0.1)


def test_non_positive_learning_rate_is_rejected():
    params = {"w": np.zeros(1)}
    with pytest.raises(ValueError):
        amsgrad_step(AmsGradState.create(params), params, {"w": np.ones(1)}, lr=0.0)


def test_converges_on_quadratic():
    params = {"x": np.array([3.0])}
    state = AmsGradState.create(params)
    for _ in range(5000):
        params = amsgrad_step(state, params, {"x": 2.0 * (params["x"] - 1.0)}, lr=1e-2)
    assert abs(params["x"][0] - 1.0) < 1e-3


def test_max_second_moment_is_monotone():
    rng = np.random.default_rng(0)
    params = {"w": np.zeros(4)}
    state = AmsGradState.create(params)
    previous = state.max_second_moment["w"].copy()
    for _ in range(200):
        params = amsgrad_step(state, params, {"w": rng.normal(size=4) * rng.uniform(0, 3)}, lr=1e-3)
        current = state.max_second_moment["w"]
        assert np.all(current >= previous)
        previous = current.copy()


def test_improving_losses_keep_rate():
    sched = PlateauScheduler(lr=1e-3)
    for loss in np.linspace(10.0, 1.0, 50):
        lr, stop = scheduler_step(sched, float(loss))
    assert lr == 1e-3
    assert not stop


def test_eleven_identical_losses_reduce_once():
    sched = PlateauScheduler(lr=1e-3)
    for _ in range(11):
        lr, _ = scheduler_step(sched, 1.0)
    assert sched.reductions == 1
    assert lr == pytest.approx(5e-4)


def test_cooldown_delays_next_reduction():
    sched = PlateauScheduler(lr=1e-3)
    for _ in range(11 + 10 + 9):
        scheduler_step(sched, 1.0)
    assert sched.reductions == 1
    scheduler_step(sched, 1.0)
    assert sched.reductions == 2


def test_rate_driven_to_floor_signals_stop():
    sched = PlateauScheduler(lr=1e-3, patience=1, cooldown=0)
    stop = False
    lrs = []
    for _ in range(200):
        lr, stop = scheduler_step(sched, 1.0)
        lrs.append(lr)
        if stop:
            break
    assert stop
    assert lrs[-1] <= 1e-8
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))
