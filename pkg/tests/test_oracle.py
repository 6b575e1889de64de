import numpy as np
import pytest
import scipy.sparse as sp

from contact_split.exceptions import NoKKTPoint
from contact_split.oracle import brute_force_kkt, delassus, solve_saddle_point_active_set
from contact_split.problem import ContactProblem, residual_kkt
from contact_split.problems import gen_random, gen_spring_chain


def one_dof(f):
    return ContactProblem(sp.identity(1, format="csr"), sp.csr_matrix(np.array([[1.0]])),
                          np.array([1.0]), np.array([f]))


class TestActiveSet:
    def test_pressed(self):
        sol = solve_saddle_point_active_set(one_dof(2.0))
        np.testing.assert_allclose(sol.U, [1.0])
        np.testing.assert_allclose(sol.lam, [1.0])
        assert sol.active == (0,)

    def test_free(self):
        sol = solve_saddle_point_active_set(one_dof(0.5))
        np.testing.assert_allclose(sol.U, [0.5])
        np.testing.assert_array_equal(sol.lam, [0.0])
        assert sol.active == ()

    def test_fully_pressed_interface(self):
        # every node pushed far past its obstacle
        K = sp.diags([2.0] * 4).tocsr()
        p = ContactProblem(K, sp.identity(4, format="csr"), np.full(4, 0.1), np.full(4, 10.0))
        sol = solve_saddle_point_active_set(p)
        assert sol.active == (0, 1, 2, 3)
        np.testing.assert_allclose(sol.lam, 10.0 - 0.2)

    def test_spring_chain_closed_form(self):
        for n in (1, 3, 7):
            p = gen_spring_chain(n, 1.5, 4.0, 1.0)
            sol = solve_saddle_point_active_set(p)
            assert sol.lam[0] == pytest.approx(p.meta["lambda_star"], rel=1e-12)

    def test_no_pairs(self):
        p = ContactProblem(sp.identity(2, format="csr"), sp.csr_matrix((0, 2)), np.zeros(0), np.ones(2))
        sol = solve_saddle_point_active_set(p)
        np.testing.assert_array_equal(sol.U, [1.0, 1.0])

    @pytest.mark.parametrize("seed", range(30))
    def test_agrees_with_brute_force(self, seed):
        p = gen_random(10, 6, seed)
        a = solve_saddle_point_active_set(p)
        b = brute_force_kkt(p)
        scale = max(np.abs(b.lam).max(), 1e-300)
        np.testing.assert_allclose(a.lam, b.lam, rtol=0, atol=1e-10 * scale)
        np.testing.assert_allclose(a.U, b.U, rtol=0, atol=1e-10 * np.abs(b.U).max())

    @pytest.mark.parametrize("seed", range(10))
    def test_certified(self, seed):
        p = gen_random(12, 6, seed + 100)
        sol = solve_saddle_point_active_set(p)
        res = residual_kkt(p, sol.U, sol.lam)
        assert res.equilibrium <= 1e-10 and res.negativity == 0
        assert res.penetration <= 1e-10 and res.complementarity <= 1e-9


class TestBruteForce:
    def test_degenerate_flagged(self):
        # force exactly closes the gap: zero multiplier on a closed gap
        sol = brute_force_kkt(one_dof(1.0))
        assert sol.ambiguous
        np.testing.assert_allclose(sol.lam, [0.0], atol=1e-14)

    def test_pair_limit(self):
        p = gen_random(30, 21, 0)
        with pytest.raises(ValueError):
            brute_force_kkt(p)

    def test_infeasible(self):
        # two contradictory constraints on one DOF: u <= -1 and -u <= -1
        p = ContactProblem(sp.identity(1, format="csr"), sp.csr_matrix(np.array([[1.0], [-1.0]])),
                           np.array([-1.0, -1.0]), np.array([0.0]))
        with pytest.raises(NoKKTPoint):
            brute_force_kkt(p)


class TestDelassus:
    def test_schur_complement(self, rng):
        p = gen_random(8, 4, 5)
        U0, Z, W, c = delassus(p)
        Kd = p.K.toarray()
        Bd = p.B.toarray()
        np.testing.assert_allclose(W, Bd @ np.linalg.solve(Kd, Bd.T), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(c, Bd @ np.linalg.solve(Kd, p.F_ext) - p.D, rtol=1e-10, atol=1e-12)
