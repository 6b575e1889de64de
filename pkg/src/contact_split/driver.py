"""Unified (accelerated) displacement/force splitting loop.

Every iteration solves ``K U = F_ext - B^T lam`` with a factorization
computed once, evaluates the dual update, optionally projects and
accelerates, projects the result and checks the relative change of the
multipliers.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import accel, linalg
from .exceptions import SingularMatrix
from .updates import UpdateKind, project_nonneg

__all__ = [
    "SolverConfig",
    "SolveReport",
    "run_fixed_point",
    "check_convergence",
    "relative_change",
    "write_trace_csv",
    "read_trace_csv",
    "TRACE_COLUMNS",
]

CONVERGED = "Converged"
MAX_ITER = "MaxIter"
DIVERGED = "Diverged"
LINEAR_SOLVE_FAILURE = "LinearSolveFailure"

TRACE_COLUMNS = ("iter", "r", "effective_gap", "complementarity", "active_count", "beta", "elapsed_s")


@dataclass(frozen=True)
class SolverConfig:
    """Settings of one splitting solve.

    ``tol = 0`` disables the convergence test (the solve then runs to
    `max_iter`).  ``placement=None`` selects the recommended placement for the
    scheme.  ``project=False`` switches off every projection, which is only
    meaningful for studying the unconstrained iteration.  ``restart_rule``
    picks the sign of the restart test of the guarded schemes (see
    :func:`contact_split.accel.restart_test`).
    """

    update: UpdateKind
    scheme: str = "none"
    placement: str | None = None
    tol: float = 1e-12
    max_iter: int = 500_000
    minit_accel: int = accel.MINIT_ACCEL
    lam0: np.ndarray | None = None
    divergence_factor: float = 1e8
    project: bool = True
    record_iterates: bool = False
    restart_rule: str = "as_written"

    def __post_init__(self):
        object.__setattr__(self, "scheme", accel.canonical_scheme(self.scheme))
        placement = self.placement or accel.default_placement(self.scheme)
        if placement not in accel.PLACEMENTS:
            raise ValueError(f"unknown placement {placement!r}")
        object.__setattr__(self, "placement", placement)
        if not self.tol >= 0:
            raise ValueError("tol must be non-negative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.restart_rule not in accel.RESTART_RULES:
            raise ValueError(f"unknown restart rule {self.restart_rule!r}")
        if self.minit_accel < 2:
            raise ValueError("minit_accel must be at least 2")


@dataclass
class SolveReport:
    status: str
    U: np.ndarray
    lam: np.ndarray
    iterations: int
    trace: dict
    first_iteration_time: float
    mean_iteration_time: float
    n_factorizations: int
    cs_audit: np.ndarray = field(default=None, repr=False)
    iterates: list = field(default=None, repr=False)
    message: str = ""

    @property
    def converged(self):
        return self.status == CONVERGED

    def summary(self):
        """Flat key/value view used by the CLI."""
        r = self.trace["r"]
        return {
            "status": self.status,
            "iterations": self.iterations,
            "final_r": float(r[-1]) if len(r) else math.nan,
            "lambda_norm": float(np.linalg.norm(self.lam)),
            "active_count": int(np.count_nonzero(self.lam > 0)),
            "first_iteration_time_s": self.first_iteration_time,
            "mean_iteration_time_s": self.mean_iteration_time,
            "n_factorizations": self.n_factorizations,
            "message": self.message,
        }


def relative_change(lam, lam_prev):
    """``||lam - lam_prev|| / ||lam||``; falls back to ``||lam_prev||`` when
    ``lam`` is zero and returns 0 when both are zero."""
    num = _norm(lam - lam_prev)
    den = _norm(lam)
    if den == 0.0:
        den = _norm(lam_prev)
        if den == 0.0:
            return 0.0
    with np.errstate(invalid="ignore", over="ignore"):
        return float(num / den)


def _norm(x):
    # plain dot product is much cheaper than np.linalg.norm on short vectors
    s = float(np.dot(x, x))
    return math.sqrt(s) if math.isfinite(s) else float(np.linalg.norm(x))


def check_convergence(lam, lam_prev, eps):
    return relative_change(lam, lam_prev) <= eps


# CS audit columns: step norm, ||delta||, ||delta - delta_prev||, previous step
# norm, delta . delta_prev, ||delta_prev||^2
CS_AUDIT_COLUMNS = ("iter", "step", "delta", "ddelta", "step_prev", "dot", "delta_prev_sq")


def run_fixed_point(p, cfg, factorization=None):
    """Solve contact problem `p` with the splitting iteration set by `cfg`.

    Parameters
    ----------
    p : ContactProblem
    cfg : SolverConfig
    factorization : Factorization, optional
        A precomputed (read-only) factorization of ``p.K`` shared between
        solves; computed here otherwise.

    Returns
    -------
    SolveReport
    """
    t_start = time.perf_counter()
    B, D, F = p.B, p.D, p.F_ext
    BT = B.T.tocsr()
    m = p.n_pairs
    n_fact = 0
    lam = np.zeros(m) if cfg.lam0 is None else np.array(cfg.lam0, dtype=float)
    if cfg.project:
        lam = project_nonneg(lam)

    rows = {c: [] for c in TRACE_COLUMNS}
    rows["tau"] = []
    audit = []
    iterates = [lam.copy()] if cfg.record_iterates else None

    def finish(status, U, lam, message=""):
        times = rows["elapsed_s"]
        first = times[0] if times else time.perf_counter() - t_start
        mean = (times[-1] - times[0]) / (len(times) - 1) if len(times) > 1 else math.nan
        trace = {k: np.asarray(v, dtype=int if k in ("iter", "active_count") else float)
                 for k, v in rows.items()}
        return SolveReport(status, U, lam, len(times), trace, first, mean, n_fact,
                           np.asarray(audit, dtype=float).reshape(-1, len(CS_AUDIT_COLUMNS)),
                           iterates, message)

    if factorization is None:
        try:
            factorization = linalg.factorize(p.K)
        except SingularMatrix as exc:
            return finish(LINEAR_SOLVE_FAILURE, np.full(p.n_dof, np.nan), lam, str(exc))
        n_fact = 1

    scheme = cfg.scheme
    accelerating = scheme != "none"
    pre_project = accelerating and cfg.placement == "before_after" and cfg.project
    state = accel.AccelState.start(lam)
    update = cfg.update
    r_first = None
    U = None

    for i in range(1, cfg.max_iter + 1):
        lam_prev = lam
        U = factorization.solve(F - BT @ lam_prev)
        gap = B @ U - D
        lam_hat = update(lam_prev, gap)
        if pre_project:
            lam_hat = project_nonneg(lam_hat)

        if accelerating and i >= cfg.minit_accel:
            prev_state = state
            lam, state = accel.accelerate(scheme, state, lam_hat, gap, cfg.restart_rule)
        else:
            prev_state = None
            lam, state = accel.plain_step(state, lam_hat)
        if cfg.project:
            lam = np.maximum(lam, 0.0)
        state = state.commit(lam)

        r = relative_change(lam, lam_prev)
        rows["iter"].append(i)
        rows["r"].append(r)
        # inline forms of metrics.effective_gap / complementarity_measure
        was_active = lam_prev > 0.0
        rows["effective_gap"].append(float(np.abs(gap[was_active]).max()) if was_active.any() else 0.0)
        rows["complementarity"].append(float(np.abs(lam * gap).max()) if m else 0.0)
        rows["active_count"].append(int(np.count_nonzero(lam > 0)))
        rows["beta"].append(state.beta)
        rows["tau"].append(state.tau_prev)
        rows["elapsed_s"].append(time.perf_counter() - t_start)
        if iterates is not None:
            iterates.append(lam.copy())

        if scheme == "cs" and prev_state is not None and state.accelerated:
            ddelta = state.delta_prev - prev_state.delta_prev
            audit.append((
                i,
                np.linalg.norm(lam - lam_prev),
                np.linalg.norm(state.delta_prev),
                np.linalg.norm(ddelta),
                np.linalg.norm(prev_state.lam_prev - prev_state.lam_prev2),
                float(np.dot(state.delta_prev, prev_state.delta_prev)),
                float(np.dot(prev_state.delta_prev, prev_state.delta_prev)),
            ))

        if not (np.all(np.isfinite(lam)) and math.isfinite(r)):
            return finish(DIVERGED, U, lam, f"non-finite iterate at iteration {i}")
        if r_first is None:
            r_first = r
        elif r_first > 0 and r >= cfg.divergence_factor * r_first:
            return finish(DIVERGED, U, lam, f"relative change {r:.3e} exceeds {cfg.divergence_factor:g} x r1")
        if cfg.tol > 0 and r <= cfg.tol:
            return finish(CONVERGED, U, lam)

    return finish(MAX_ITER, U, lam, f"no convergence in {cfg.max_iter} iterations")


def write_trace_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        t = report.trace
        for k in range(report.iterations):
            w.writerow([int(t["iter"][k]), repr(float(t["r"][k])), repr(float(t["effective_gap"][k])),
                        repr(float(t["complementarity"][k])), int(t["active_count"][k]),
                        repr(float(t["beta"][k])), repr(float(t["elapsed_s"][k]))])


def read_trace_csv(path):
    """Read a trace CSV back into a dict of arrays keyed by column name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trace file") from None
        missing = [c for c in ("iter", "r") if c not in header]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = {h: [] for h in header}
        for row in reader:
            if not row:
                continue
            for h, v in zip(header, row):
                cols[h].append(float(v))
    if not cols["iter"]:
        raise ValueError(f"{path}: trace has no rows")
    return {h: np.asarray(v) for h, v in cols.items()}
