"""scikit-learn style front end to the splitting solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .driver import SolverConfig, run_fixed_point
from .updates import make_update

__all__ = ["ContactSolver"]


class ContactSolver(BaseEstimator):
    """Accelerated displacement/force splitting solver.

    Parameters
    ----------
    update : {"uzawa", "penalty", "regularized_uzawa"}
        Dual update.
    param : float
        Augmentation parameter ``rho`` (Uzawa) or penalty stiffness ``k_N``.
    accel : str
        Acceleration scheme: ``"none"``, ``"fista_ar"``, ``"anderson1"``,
        ``"anderson1_ar"`` or ``"cs"``.
    placement : str or None
        Projection placement; None picks the recommended one for `accel`.
    tol : float
        Relative-change tolerance; 0 runs to `max_iter`.
    max_iter : int
    restart_rule : {"as_written", "ascent"}
        Sign of the restart test of the guarded schemes.
    k_n : float or None
        Penalty stiffness of the regularized Uzawa update.

    Attributes
    ----------
    U_ : ndarray
        Displacements.
    lambda_ : ndarray
        Contact multipliers.
    report_ : SolveReport
    n_iter_ : int
    status_ : str

    Examples
    --------
    >>> from contact_split.problems import gen_spring_chain
    >>> solver = ContactSolver(update="uzawa", param=0.5).fit(gen_spring_chain(1, 1.0, 2.0, 1.0))
    >>> round(float(solver.lambda_[0]), 8)
    1.0
    """

    def __init__(self, update="uzawa", param=1.0, accel="none", placement=None, tol=1e-12,
                 max_iter=500_000, restart_rule="as_written", k_n=None):
        self.update = update
        self.param = param
        self.accel = accel
        self.placement = placement
        self.tol = tol
        self.max_iter = max_iter
        self.restart_rule = restart_rule
        self.k_n = k_n

    def _config(self, lambda0=None):
        return SolverConfig(
            update=make_update(self.update, self.param, k_n=self.k_n),
            scheme=self.accel,
            placement=self.placement,
            tol=self.tol,
            max_iter=self.max_iter,
            lam0=lambda0,
            restart_rule=self.restart_rule,
        )

    def fit(self, problem, lambda0=None, factorization=None):
        """Solve `problem` (a :class:`ContactProblem`) and store the result."""
        report = run_fixed_point(problem, self._config(lambda0), factorization)
        self.report_ = report
        self.U_ = report.U
        self.lambda_ = report.lam
        self.n_iter_ = report.iterations
        self.status_ = report.status
        return self

    def contact_forces(self, problem):
        """Nodal contact forces ``-B^T lambda`` of the fitted solution."""
        return problem.contact_forces(np.asarray(self.lambda_))
