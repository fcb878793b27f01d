import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regretlab.core import trace_to_jsonl
from regretlab.errors import ConfigError, DivergenceError, NonFiniteError
from regretlab.optimizers import (
    AdagradState,
    AdamState,
    MomentumState,
    NagState,
    OptimizerConfig,
    SgdState,
    adagrad_prox_step,
    adagrad_step,
    adam_step,
    momentum_oneline_step,
    momentum_step,
    nag_lookahead_step,
    nag_step,
    run,
    sgd_step,
)
from regretlab.problems import (
    QuadraticSpec,
    RegularizerSpec,
    make_quadratic,
    make_random_least_squares,
    make_random_quadratic,
)


def v(*xs):
    return np.array(xs, dtype=float)


class TestSgd:
    def test_spot_values(self):
        assert sgd_step(SgdState(v(1.0), 0.5), v(1.0)).theta.tolist() == [0.5]
        assert sgd_step(SgdState(v(1.0, 1.0), 0.5), v(1.0, 2.0)).theta.tolist() == [0.5, 0.0]
        s = sgd_step(SgdState(v(3.0), 0.5), v(0.0))
        assert s.theta.tolist() == [3.0] and s.t == 1

    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteError):
            sgd_step(SgdState(v(1.0), 0.5), v(math.nan))


class TestMomentum:
    def test_first_two_steps(self):
        s = momentum_step(MomentumState.initial(v(0.0), 0.9, 0.1), v(1.0))
        assert s.velocity[0] == pytest.approx(-0.1, abs=1e-16)
        s = momentum_step(s, v(1.0))
        assert s.velocity[0] == pytest.approx(-0.19, abs=1e-15)

    def test_gamma_zero_is_sgd(self):
        m = momentum_step(MomentumState.initial(v(2.0, -1.0), 0.0, 0.3), v(1.0, 4.0))
        s = sgd_step(SgdState(v(2.0, -1.0), 0.3), v(1.0, 4.0))
        assert m.theta.tolist() == s.theta.tolist()

    def test_oneline_degenerate_cases(self):
        th = v(1.0, 2.0)
        g = v(0.5, -1.0)
        gd = th - 0.2 * g
        np.testing.assert_allclose(momentum_oneline_step(th, th, g, 0.7, 0.2), gd, rtol=0, atol=1e-15)
        np.testing.assert_allclose(momentum_oneline_step(th, v(0.0, 0.0), g, 0.0, 0.2), gd, rtol=0, atol=1e-15)

    @given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0, 0.99))
    @settings(max_examples=30, deadline=None)
    def test_velocity_form_equals_two_term_recurrence(self, seed, gamma):
        rng = np.random.default_rng(seed)
        s = MomentumState.initial(rng.normal(size=3), gamma, 0.1)
        prev = cur = s.theta
        for _ in range(100):
            g = rng.normal(size=3)
            s = momentum_step(s, g)
            prev, cur = cur, momentum_oneline_step(cur, prev, g, gamma, 0.1)
            np.testing.assert_allclose(s.theta, cur, rtol=1e-12, atol=1e-12)


class TestNag:
    def test_scalar_example(self):
        # J = theta^2 / 2, theta_0 = 1, eta = gamma = 0.5
        s = nag_step(NagState.initial(v(1.0), 0.5, 0.5), lambda th: th)
        assert s.y.tolist() == [0.5] and s.theta.tolist() == [0.25]

    def test_gamma_zero_is_gd(self):
        s = nag_step(NagState.initial(v(1.0, 2.0), 0.0, 0.25), lambda th: 2 * th)
        assert s.y.tolist() == s.theta.tolist() == [0.5, 1.0]

    def test_lookahead_degenerate_cases(self):
        seen = []
        y, vel = nag_lookahead_step(v(1.0), v(0.0), 0.9, 0.1, lambda x: seen.append(x.copy()) or x)
        assert seen[0].tolist() == [1.0]
        y, vel = nag_lookahead_step(v(1.0), v(0.3), 0.0, 0.1, lambda x: x)
        assert y.tolist() == [0.9]

    @given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0, 0.95))
    @settings(max_examples=30, deadline=None)
    def test_forms_agree_on_random_quadratic(self, seed, gamma):
        obj = make_random_quadratic(4, seed)
        eta = 1.0 / obj.lipschitz
        th0 = np.random.default_rng(seed).normal(size=4)
        s = NagState.initial(th0, gamma, eta)
        y, vel = th0, np.zeros(4)
        for _ in range(100):
            s = nag_step(s, obj.gradient)
            y, vel = nag_lookahead_step(y, vel, gamma, eta, obj.gradient)
            np.testing.assert_allclose(s.y, y, rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(s.y - s.y_prev, vel, rtol=1e-10, atol=1e-10)


class TestAdagrad:
    def test_spot_step(self):
        s = adagrad_step(AdagradState.initial(v(1.0, 1.0), 1.0, 0.0), v(2.0, 0.0))
        assert s.accum.tolist() == [4.0, 0.0] and s.theta.tolist() == [0.0, 1.0]

    def test_constant_gradient_steps_shrink_like_inverse_sqrt(self):
        s = AdagradState.initial(v(0.0), 0.3, 0.0)
        for t in range(1, 101):
            prev = s.theta[0]
            s = adagrad_step(s, v(2.5))
            assert abs(s.theta[0] - prev) == pytest.approx(0.3 / math.sqrt(t), rel=1e-12)

    def test_zero_gradients_leave_theta(self):
        s = AdagradState.initial(v(1.0, -2.0), 0.5, 1.0)
        for _ in range(3):
            s = adagrad_step(s, v(0.0, 0.0))
        assert s.theta.tolist() == [1.0, -2.0]

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_accumulator_non_decreasing(self, seed):
        rng = np.random.default_rng(seed)
        s = AdagradState.initial(np.zeros(3), 0.1)
        for _ in range(20):
            old = s.accum
            s = adagrad_step(s, rng.normal(size=3) * (rng.uniform(size=3) < 0.5))
            assert np.all(s.accum >= old)


class TestAdagradProx:
    def test_plain_metric_equals_adagrad_without_epsilon(self):
        rng = np.random.default_rng(0)
        a = AdagradState.initial(rng.normal(size=4), 0.2, 0.0)
        b = a
        for _ in range(10):
            g = rng.normal(size=4)
            a = adagrad_step(a, g)
            b = adagrad_prox_step(b, g)
            np.testing.assert_allclose(a.theta, b.theta, rtol=1e-14, atol=1e-15)

    def test_large_l1_shrinks_to_zero(self):
        s = AdagradState(v(1.0), v(1.0), 1.0, 0.0)
        out = adagrad_prox_step(s, v(0.0), RegularizerSpec("l1", 100.0))
        assert out.theta.tolist() == [0.0]

    def test_untouched_coordinate(self):
        # the accumulator already holds g^2, so w = 0 forces g = 0
        s = AdagradState(v(1.0, 1.0), v(0.0, 0.0), 1.0, 0.0)
        assert adagrad_prox_step(s, v(1.0, 0.0)).theta[1] == 1.0
        l1 = adagrad_prox_step(s, v(1.0, 0.0), RegularizerSpec("l1", 0.1))
        assert l1.theta[1] == 0.0

    @given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0, 2), delta=st.floats(0, 1))
    @settings(max_examples=40, deadline=None)
    def test_matches_grid_argmin(self, seed, lam, delta):
        rng = np.random.default_rng(seed)
        theta = rng.normal(size=3)
        accum = rng.uniform(0.1, 2.0, size=3)
        g = rng.normal(size=3)
        eta = 0.7
        out = adagrad_prox_step(AdagradState(theta, accum, eta, 0.0), g, RegularizerSpec("l1", lam), delta)
        w = delta + np.sqrt(accum + g * g)
        grid = np.linspace(-8, 8, 160001)
        for i in range(3):
            obj = eta * g[i] * grid + eta * lam * np.abs(grid) + 0.5 * w[i] * (grid - theta[i]) ** 2
            assert abs(out.theta[i] - grid[np.argmin(obj)]) <= 2e-4


class TestAdam:
    def test_first_step_is_signed_eta(self):
        g = v(3.0, -0.01, 7.5)
        s = adam_step(AdamState.initial(v(0.0, 0.0, 0.0), 0.05, epsilon=0.0), g)
        np.testing.assert_allclose(s.theta, -0.05 * np.sign(g), rtol=1e-12, atol=0)

    def test_memoryless_limit(self):
        s = AdamState.initial(v(0.0, 0.0), 0.1, beta1=0.0, beta2=0.0, epsilon=1e-3)
        for g in (v(1.0, -2.0), v(0.5, 3.0)):
            before = s.theta
            s = adam_step(s, g)
            np.testing.assert_allclose(s.theta - before, -0.1 * g / (np.abs(g) + 1e-3), rtol=1e-12)

    def test_two_steps_against_hand_recurrence(self):
        b1, b2, eta, eps = 0.9, 0.999, 0.1, 1e-8
        s = AdamState.initial(v(0.0), eta, b1, b2, 1.0, eps)
        s = adam_step(adam_step(s, v(1.0)), v(2.0))
        m, vv, th = 0.0, 0.0, 0.0
        for t, g in ((1, 1.0), (2, 2.0)):
            m = b1 * m + (1 - b1) * g
            vv = b2 * vv + (1 - b2) * g * g
            th -= eta * (m / (1 - b1 ** t)) / (math.sqrt(vv / (1 - b2 ** t)) + eps)
        assert s.theta[0] == pytest.approx(th, rel=1e-12)

    def test_theorem_mode_decays(self):
        s = AdamState.initial(v(0.0), 1.0, 0.9, 0.999, 0.5, 0.0, sqrt_t_decay=True)
        s = adam_step(adam_step(s, v(1.0)), v(1.0))
        # step 2 mixes with beta1 * lam = 0.45 and eta / sqrt(2)
        m = 0.45 * 0.1 + 0.55
        vv = 0.999 * 0.001 + 0.001
        step2 = (m / (1 - 0.81)) / math.sqrt(vv / (1 - 0.999 ** 2)) / math.sqrt(2)
        assert s.theta[0] == pytest.approx(-1.0 - step2, rel=1e-12)

    def test_beta_one_rejected(self):
        with pytest.raises(ValueError):
            adam_step(AdamState.initial(v(0.0), 0.1, beta1=1.0), v(1.0))

    def test_gamma_property(self):
        assert AdamState.initial(v(0.0), 0.1, 0.9, 0.81).gamma == pytest.approx(0.9)


class TestConfig:
    def test_collects_all_errors(self):
        with pytest.raises(ConfigError) as info:
            OptimizerConfig("momentum", -1.0, gamma=1.0, batch="tiny")
        msgs = info.value.errors
        assert "gamma must be in [0,1)" in msgs and len(msgs) == 3

    def test_mapping_round_trip(self):
        cfg = OptimizerConfig.from_mapping({"algo": "adam", "eta": 0.1, "lambda": 0.99})
        assert cfg.lam == 0.99
        assert OptimizerConfig.from_mapping(cfg.to_mapping()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            OptimizerConfig.from_mapping({"algo": "sgd", "eta": 0.1, "moementum": 0.9})
        assert "moementum" in str(info.value)


class TestRun:
    def test_one_step_to_the_optimum(self):
        obj = make_quadratic(QuadraticSpec(np.eye(2), np.zeros(2)))
        tr = run(OptimizerConfig("sgd", 1.0), obj, v(1.0, 1.0), T=1)
        assert tr.T == 1 and tr.steps[0].t == 1
        assert tr.final_theta.tolist() == [0.0, 0.0]

    @pytest.mark.parametrize("algo", ["sgd", "momentum", "nag", "adagrad", "adagrad_prox", "adam"])
    def test_single_step_for_every_algorithm(self, algo):
        obj = make_random_quadratic(3, 0)
        tr = run(OptimizerConfig(algo, 0.1), obj, np.zeros(3), T=1)
        assert tr.T == 1 and tr.thetas[0].tolist() == [0.0, 0.0, 0.0]

    def test_gd_descends(self):
        obj = make_random_quadratic(8, 4)
        tr = run(OptimizerConfig("sgd", 1 / obj.lipschitz), obj, np.ones(8), T=100)
        assert np.all(np.diff(tr.losses) <= 1e-9 * np.maximum(1, np.abs(tr.losses[:-1])))

    def test_gamma_zero_collapse(self):
        obj = make_random_quadratic(5, 1)
        eta = 0.5 / obj.lipschitz
        base = run(OptimizerConfig("sgd", eta), obj, np.ones(5), T=50)
        for algo in ("momentum", "nag"):
            tr = run(OptimizerConfig(algo, eta, gamma=0.0), obj, np.ones(5), T=50)
            np.testing.assert_allclose(tr.thetas, base.thetas, rtol=1e-12, atol=1e-12)

    def test_minibatch_records_full_loss(self):
        obj = make_random_least_squares(12, 3, 0, batch_count=4)
        tr = run(OptimizerConfig("sgd", 0.01, batch="minibatch"), obj, np.zeros(3), T=8, seed=3)
        for th, j in zip(tr.thetas, tr.losses):
            assert j == obj.value(th)
        used = {tuple(np.round(g, 12)) for g in tr.grads[:4]}
        assert len(used) == 4  # one epoch visits every batch once

    def test_deterministic(self):
        obj = make_random_least_squares(12, 3, 0, batch_count=4)
        cfg = OptimizerConfig("adam", 0.05, batch="minibatch")
        a = run(cfg, obj, np.zeros(3), T=30, seed=9)
        b = run(cfg, obj, np.zeros(3), T=30, seed=9)
        assert trace_to_jsonl(a) == trace_to_jsonl(b)

    def test_divergence_carries_partial_trace(self):
        obj = make_random_quadratic(4, 0)
        with pytest.raises(DivergenceError) as info:
            run(OptimizerConfig("sgd", 5.0 / obj.lipschitz), obj, np.ones(4), T=5000)
        part = info.value.partial_trace
        assert 0 < part.T < 5000 and np.all(np.isfinite(part.losses))
        trace_to_jsonl(part)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            run(OptimizerConfig("sgd", 0.1), make_random_quadratic(3, 0), np.zeros(2), T=2)
