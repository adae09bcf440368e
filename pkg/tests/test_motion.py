import numpy as np
import pytest
from hypothesis import given, strategies as st

from tsmot.core import BoundingBox
from tsmot.motion import (KalmanConfig, KalmanState, estimate_velocity, kalman_init, kalman_predict,
                          kalman_update)


def test_init_mean_and_covariance():
    s = kalman_init(BoundingBox.from_center(5, 5, 2, 4))
    np.testing.assert_allclose(s.mean, [5, 5, 0.5, 4, 0, 0, 0, 0])
    assert np.array_equal(s.covariance, s.covariance.T)
    assert np.all(np.linalg.eigvalsh(s.covariance) >= 0)


def test_init_deterministic():
    box = BoundingBox(1, 2, 3, 4)
    a, b = kalman_init(box), kalman_init(box)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.covariance, b.covariance)


def test_predict_constant_velocity():
    s = kalman_init(BoundingBox.from_center(5, 5, 2, 4))
    assert np.array_equal(kalman_predict(s).mean[:4], s.mean[:4])
    moving = KalmanState(s.mean + np.array([0, 0, 0, 0, 1, 2, 0, 0]), s.covariance)
    np.testing.assert_allclose(kalman_predict(moving).mean[:2], [6, 7])


def test_update_with_predicted_measurement_keeps_mean():
    s = kalman_predict(kalman_init(BoundingBox.from_center(10, 20, 8, 16)))
    u = kalman_update(s, s.box())
    np.testing.assert_allclose(u.mean, s.mean, atol=1e-12)


def test_update_rejects_non_finite():
    s = kalman_init(BoundingBox(0, 0, 4, 8))
    bad = object.__new__(BoundingBox)
    for name, v in zip(("left", "top", "width", "height"), (np.nan, 0.0, 4.0, 8.0)):
        object.__setattr__(bad, name, v)
    with pytest.raises(ValueError):
        kalman_update(s, bad)


def test_noiseless_constant_velocity_prediction():
    cfg = KalmanConfig.noiseless()
    x0, y0, vx, vy, w, h = 100.0, 50.0, 3.0, -1.5, 10.0, 20.0
    state = kalman_init(BoundingBox.from_center(x0, y0, w, h), cfg)
    for n in range(1, 6):
        state = kalman_predict(state, cfg)
        state = kalman_update(state, BoundingBox.from_center(x0 + vx * n, y0 + vy * n, w, h), cfg)
        if n >= 3:
            nxt = kalman_predict(state, cfg).mean
            # Closed-form constant-velocity truth for the next frame.
            truth = np.array([x0 + vx * (n + 1), y0 + vy * (n + 1), w / h, h])
            assert np.max(np.abs(nxt[:4] - truth)) < 1e-6


def test_covariance_symmetry_many_steps():
    rng = np.random.default_rng(11)
    state = kalman_init(BoundingBox.from_center(200, 200, 20, 40))
    worst = 0.0
    for _ in range(10_000):
        if rng.random() < 0.5:
            state = kalman_predict(state)
        else:
            cx, cy = state.mean[:2] + rng.normal(0, 3, 2)
            state = kalman_update(state, BoundingBox.from_center(cx, cy, 20 + rng.normal(0, 1),
                                                                 40 + rng.normal(0, 1)))
        C = state.covariance
        worst = max(worst, float(np.max(np.abs(C - C.T))))
        assert np.all(np.diag(C) >= 0)
    assert worst < 1e-9


def test_velocity_exact_fit_and_degenerate():
    assert estimate_velocity([1, 2, 3], [(0, 0), (2, 1), (4, 2)], 3) == pytest.approx((2, 1))
    assert estimate_velocity([4], [(7, 7)], 3) == (0.0, 0.0)
    with pytest.raises(ValueError):
        estimate_velocity([], [], 3)


def test_velocity_noisy_within_three_sigma():
    rng = np.random.default_rng(5)
    v, sigma, n = np.array([1.5, -0.7]), 0.5, 5
    t = np.arange(n, dtype=float)
    # Slope standard error for least squares with unit-spaced abscissae.
    se = sigma / np.sqrt(np.sum((t - t.mean()) ** 2))
    pts = [tuple(v * ti + rng.normal(0, sigma, 2)) for ti in t]
    est = np.array(estimate_velocity(list(t), pts, window=5))
    assert np.all(np.abs(est - v) <= 3 * se)


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=6),
       st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_velocity_translation_equivariant(pts, dx, dy):
    frames = list(range(len(pts)))
    a = estimate_velocity(frames, pts, 3)
    b = estimate_velocity(frames, [(x + dx, y + dy) for x, y in pts], 3)
    assert a == pytest.approx(b, abs=1e-6)
