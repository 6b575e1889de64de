import numpy as np
import pytest
from sklearn.base import clone

from contact_split.estimator import ContactSolver
from contact_split.oracle import solve_saddle_point_active_set
from contact_split.problems import gen_random, gen_spring_chain


class TestContactSolver:
    def test_spring_chain(self):
        est = ContactSolver(update="uzawa", param=0.5).fit(gen_spring_chain(1, 1.0, 2.0, 1.0))
        assert est.status_ == "Converged"
        assert est.lambda_[0] == pytest.approx(1.0, rel=1e-10)

    def test_params_roundtrip(self):
        est = ContactSolver(accel="cs", param=3.0)
        assert est.get_params()["accel"] == "cs"
        c = clone(est)
        assert c.param == 3.0 and not hasattr(c, "lambda_")

    def test_matches_oracle(self):
        p = gen_random(10, 5, 9)
        est = ContactSolver(param=0.5, accel="anderson1").fit(p)
        ref = solve_saddle_point_active_set(p)
        np.testing.assert_allclose(est.lambda_, ref.lam, atol=1e-9 * ref.lam.max())
        np.testing.assert_allclose(est.contact_forces(p), p.contact_forces(ref.lam), atol=1e-9 * ref.lam.max())

    def test_regularized_needs_kn(self):
        with pytest.raises(ValueError):
            ContactSolver(update="regularized_uzawa").fit(gen_random(6, 3, 0))

    def test_warm_start(self):
        p = gen_random(10, 5, 9)
        ref = solve_saddle_point_active_set(p)
        est = ContactSolver(param=0.5).fit(p, lambda0=ref.lam)
        assert est.n_iter_ <= 2
