import numpy as np
import pytest

from driftlab.errors import NonfiniteGradientError, ShapeMismatchError
from driftlab.linalg import rng_from
from driftlab.optim import OptimizerConfig, adamw_step, init_state, lr_at


class TestSchedule:
    def cfg(self, **kw):
        base = dict(total_steps=100, base_lr=0.5, warmup_fraction=0.2)
        base.update(kw)
        return OptimizerConfig(**base)

    def test_starts_at_zero(self):
        assert lr_at(0, self.cfg()) == 0.0

    def test_warmup_end_hits_base_lr(self):
        cfg = self.cfg()
        assert lr_at(cfg.warmup_steps, cfg) == cfg.base_lr

    def test_total_is_zero(self):
        cfg = self.cfg()
        assert abs(lr_at(cfg.total_steps, cfg)) < 1e-12

    def test_continuous_at_boundary(self):
        cfg = self.cfg()
        w = cfg.warmup_steps
        ramp_side = cfg.base_lr * w / w
        cosine_side = lr_at(w, cfg)
        assert abs(ramp_side - cosine_side) < 1e-12

    def test_monotone_after_warmup(self):
        cfg = self.cfg()
        values = [lr_at(s, cfg) for s in range(cfg.warmup_steps, cfg.total_steps + 1)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_no_warmup_starts_at_base(self):
        cfg = self.cfg(warmup_fraction=0.0)
        assert lr_at(0, cfg) == cfg.base_lr


class TestAdamwStep:
    def test_hand_example(self):
        # beta1 = beta2 = 0, wd = 0, lr = 0.1, eps = 0: theta 1 -> 0.9.
        cfg = OptimizerConfig(
            total_steps=2, base_lr=0.1, beta1=0.0, beta2=0.0, epsilon=0.0,
            weight_decay=0.0, warmup_fraction=0.0,
        )
        theta = [np.array([1.0])]
        state = init_state(theta, cfg)
        adamw_step(theta, [np.array([1.0])], state)
        assert theta[0][0] == pytest.approx(0.9, abs=1e-15)
        assert state.step == 1

    def test_zero_grads_zero_decay_leave_params(self):
        cfg = OptimizerConfig(total_steps=5, base_lr=0.1, weight_decay=0.0, warmup_fraction=0.0)
        theta = [rng_from(0).standard_normal(4)]
        before = theta[0].copy()
        state = init_state(theta, cfg)
        adamw_step(theta, [np.zeros(4)], state)
        np.testing.assert_array_equal(theta[0], before)

    def test_weight_decay_shrinks_geometrically(self):
        cfg = OptimizerConfig(total_steps=10, base_lr=0.1, weight_decay=0.5, warmup_fraction=0.0)
        theta = [np.array([2.0])]
        state = init_state(theta, cfg)
        expected = 2.0
        for step in range(3):
            lr = cfg.base_lr * 0.5 * (1 + np.cos(np.pi * step / 10))
            adamw_step(theta, [np.zeros(1)], state)
            expected *= 1.0 - lr * cfg.weight_decay
            assert theta[0][0] == pytest.approx(expected, rel=1e-12)

    def test_deterministic_trajectories(self):
        def run():
            cfg = OptimizerConfig(total_steps=50, base_lr=0.01)
            theta = [rng_from(3).standard_normal((3, 3))]
            state = init_state(theta, cfg)
            rng = rng_from(4)
            for _ in range(50):
                adamw_step(theta, [rng.standard_normal((3, 3))], state)
            return theta[0]

        np.testing.assert_array_equal(run(), run())

    def test_convex_quadratic_descends_after_warmup(self):
        cfg = OptimizerConfig(
            total_steps=200, base_lr=1e-3, weight_decay=0.0, warmup_fraction=0.2
        )
        theta = [np.array([1.0])]
        state = init_state(theta, cfg)
        losses = []
        for _ in range(200):
            grad = [2.0 * theta[0]]
            adamw_step(theta, grad, state)
            losses.append(float(theta[0][0] ** 2))
        post = losses[cfg.warmup_steps :]
        assert all(a >= b for a, b in zip(post, post[1:]))

    def test_shape_mismatch_raises(self):
        cfg = OptimizerConfig(total_steps=2)
        theta = [np.zeros(3)]
        state = init_state(theta, cfg)
        with pytest.raises(ShapeMismatchError):
            adamw_step(theta, [np.zeros(4)], state)

    def test_nonfinite_gradient_raises(self):
        cfg = OptimizerConfig(total_steps=2)
        theta = [np.zeros(2)]
        state = init_state(theta, cfg)
        with pytest.raises(NonfiniteGradientError):
            adamw_step(theta, [np.array([1.0, np.nan])], state)
