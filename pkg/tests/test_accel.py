import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from contact_split import accel
from contact_split.accel import AccelState

finite = st.floats(-1e3, 1e3, allow_nan=False)


def state(lam_hat_prev, lam_prev, lam_prev2, delta_prev, tau_prev=1.0, iteration=1):
    a = lambda v: np.atleast_1d(np.asarray(v, dtype=float))
    return AccelState(a(lam_hat_prev), a(lam_prev), a(lam_prev2), a(delta_prev), tau_prev, iteration)


class TestNames:
    @pytest.mark.parametrize("alias,name", [("FISTA+AR", "fista_ar"), ("Anderson-1", "anderson1"),
                                            ("crossed_secant", "cs"), ("none", "none")])
    def test_aliases(self, alias, name):
        assert accel.canonical_scheme(alias) == name

    def test_unknown(self):
        with pytest.raises(ValueError):
            accel.canonical_scheme("nesterov3")

    def test_recommended_placements(self):
        assert accel.default_placement("cs") == "after_only"
        for s in ("fista_ar", "anderson1", "anderson1_ar"):
            assert accel.default_placement(s) == "before_after"


class TestRestartTest:
    def test_descent_accelerates(self):
        assert accel.restart_test(np.array([-1.0]), np.array([1.0]), np.array([0.0]))

    def test_ascent_restarts(self):
        assert not accel.restart_test(np.array([1.0]), np.array([1.0]), np.array([0.0]))

    def test_zero_dot_accelerates(self):
        assert accel.restart_test(np.array([1.0]), np.array([2.0]), np.array([2.0]))

    def test_ascent_rule_is_flipped(self):
        assert accel.restart_test(np.array([1.0]), np.array([1.0]), np.array([0.0]), rule="ascent")
        assert not accel.restart_test(np.array([-1.0]), np.array([1.0]), np.array([0.0]), rule="ascent")

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            accel.restart_test(np.zeros(1), np.zeros(1), np.zeros(1), rule="sideways")


class TestFista:
    def test_momentum_sequence(self):
        # first accelerated step from tau = 1, then the next from tau = golden ratio
        tau1 = 0.5 * (1 + math.sqrt(5.0))
        lam, s = accel.fista_ar_step(state(1.0, 1.0, 0.0, 1.0, 1.0), np.array([2.0]), np.array([-1.0]))
        assert s.tau_prev == pytest.approx(tau1) and s.beta == 0.0
        np.testing.assert_array_equal(lam, [2.0])
        tau2 = 0.5 * (1 + math.sqrt(1 + 4 * tau1 ** 2))
        beta2 = (tau1 - 1) / tau2
        lam, s = accel.fista_ar_step(s, np.array([3.0]), np.array([-1.0]))
        assert s.tau_prev == pytest.approx(tau2, rel=1e-12)
        assert s.beta == pytest.approx(beta2, rel=1e-12)
        np.testing.assert_allclose(lam, [3.0 + beta2], rtol=1e-12)
        assert tau2 == pytest.approx(2.1935, abs=1e-4) and beta2 == pytest.approx(0.2818, abs=1e-4)

    def test_restart_resets_tau(self):
        lam, s = accel.fista_ar_step(state(1.0, 1.0, 0.0, 1.0, 5.0), np.array([2.0]), np.array([1.0]))
        assert s.tau_prev == 1.0 and not s.accelerated
        np.testing.assert_array_equal(lam, [2.0])


class TestAnderson:
    def test_example(self):
        # delta_prev = 2, lam_hat_prev = 2, lam_prev = 2 -> delta = 1 at lam_hat = 3
        lam, s = accel.anderson1_step(state(2.0, 2.0, 0.0, 2.0), np.array([3.0]))
        assert s.beta == pytest.approx(1.0)
        np.testing.assert_allclose(lam, [4.0])

    def test_degenerate_secant_is_plain(self):
        lam, s = accel.anderson1_step(state(1.0, 1.0, 0.0, 1.0), np.array([2.0]))
        np.testing.assert_array_equal(lam, [2.0])
        assert not s.accelerated

    def test_ar_restart_is_plain(self):
        lam, s = accel.anderson1_ar_step(state(2.0, 2.0, 0.0, 2.0), np.array([3.0]), np.array([1.0]))
        np.testing.assert_array_equal(lam, [3.0])
        np.testing.assert_array_equal(s.delta_prev, [1.0])


class TestCrossedSecant:
    def test_example(self):
        # delta_prev = 1, delta = 3, lam_hat - lam_hat_prev = 4, lam_hat = 5: beta = 2, lam = -1
        lam, s = accel.crossed_secant_step(state(1.0, 2.0, 0.0, 1.0), np.array([5.0]))
        assert s.beta == pytest.approx(2.0)
        np.testing.assert_allclose(lam, [-1.0])

    @settings(max_examples=200)
    @given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite),
           arrays(float, 3, elements=finite), arrays(float, 3, elements=finite))
    def test_relaxation_and_beta_forms_agree(self, lam_prev2, lam_prev, delta_prev, delta):
        lam_hat_prev = lam_prev2 + delta_prev
        lam_hat = lam_prev + delta
        diff = delta - delta_prev
        denom = diff @ diff
        if denom < 1e-6:
            return
        beta = (lam_hat - lam_hat_prev) @ diff / denom
        ref = lam_hat - beta * delta
        lam, s = accel.crossed_secant_step(state(lam_hat_prev, lam_prev, lam_prev2, delta_prev), lam_hat)
        scale = 1 + np.abs(lam_hat).max() + np.abs(lam_hat_prev).max()
        scale *= 1 + np.abs(delta).max() * math.sqrt(1 / denom)
        np.testing.assert_allclose(lam, ref, rtol=0, atol=1e-9 * scale)

    def test_collinear_with_step_history(self, rng):
        # lam - lam_prev is parallel to delta
        lam_prev2, lam_prev, delta_prev, delta = rng.standard_normal((4, 5))
        lam, _ = accel.crossed_secant_step(state(lam_prev2 + delta_prev, lam_prev, lam_prev2, delta_prev),
                                           lam_prev + delta)
        step = lam - lam_prev
        cross = np.linalg.norm(step) * np.linalg.norm(delta) - abs(step @ delta)
        assert abs(cross) <= 1e-12 * np.linalg.norm(step) * np.linalg.norm(delta)

    def test_degenerate_secant_is_plain(self):
        lam, s = accel.crossed_secant_step(state(1.0, 1.0, 0.0, 1.0), np.array([2.0]))
        np.testing.assert_array_equal(lam, [2.0])
        assert not s.accelerated

    def test_equals_barzilai_borwein(self, rng):
        # for the unprojected Uzawa map delta = rho * g
        rho = 0.7
        lam_prev2, lam_prev, g_prev, g = rng.standard_normal((4, 6))
        cs, _ = accel.crossed_secant_step(state(lam_prev2 + rho * g_prev, lam_prev, lam_prev2, rho * g_prev),
                                          lam_prev + rho * g)
        bb = accel.barzilai_borwein_step(lam_prev, lam_prev2, -g, -g_prev)
        np.testing.assert_allclose(cs, bb, rtol=1e-12, atol=1e-12)


class TestBarzilaiBorwein:
    def test_quadratic_two_steps(self):
        # f = x^2 / 2 * 4: one BB step from any secant pair lands on the minimum
        lam = accel.barzilai_borwein_step(np.array([1.0]), np.array([2.0]), np.array([4.0]), np.array([8.0]))
        np.testing.assert_allclose(lam, [0.0], atol=1e-15)

    def test_degenerate_fallback(self):
        lam = accel.barzilai_borwein_step(np.array([1.0]), np.array([1.0]), np.array([2.0]), np.array([2.0]), rho=0.5)
        np.testing.assert_allclose(lam, [2.0])


class TestDispatch:
    @pytest.mark.parametrize("scheme", accel.SCHEMES)
    def test_every_scheme_refreshes_delta(self, scheme):
        s0 = state(2.0, 2.0, 0.0, 2.0)
        _, s = accel.accelerate(scheme, s0, np.array([3.0]), np.array([1.0]))
        np.testing.assert_array_equal(s.delta_prev, [1.0])
        assert s.iteration == 2
        np.testing.assert_array_equal(s.lam_prev2, [2.0])
