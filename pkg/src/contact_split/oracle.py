"""Reference solutions of the contact problem.

:func:`solve_saddle_point_active_set` is the Lagrange-multiplier baseline:
an active-set loop whose equality-constrained subproblems are solved through
the Schur complement ``W = B K^-1 B^T`` built from one stiffness
factorization.  :func:`brute_force_kkt` enumerates every active set of a tiny
problem and solves the full saddle-point system for each candidate; it shares
no code with the active-set path.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from . import linalg
from .exceptions import CycleDetected, MaxOuter, NoKKTPoint

__all__ = ["KKTSolution", "solve_saddle_point_active_set", "brute_force_kkt", "delassus"]

ACTIVE_SET_RTOL = 1e-12


class KKTSolution(NamedTuple):
    U: np.ndarray
    lam: np.ndarray
    active: tuple
    ambiguous: bool = False
    outer_iterations: int = 0


def delassus(p, f=None):
    """Return ``(U0, Z, W, c)``: the unconstrained displacement ``K^-1 F``,
    ``Z = K^-1 B^T``, ``W = B Z`` and the free gap ``c = B U0 - D``."""
    if f is None:
        f = linalg.factorize(p.K)
    U0 = f.solve(p.F_ext)
    if p.n_pairs == 0:
        return U0, np.zeros((p.n_dof, 0)), np.zeros((0, 0)), np.zeros(0)
    Z = f.solve(p.B.T.toarray())
    W = p.B @ Z
    W = 0.5 * (W + W.T)
    c = p.B @ U0 - p.D
    return U0, Z, W, c


def _solve_active(W, c, active):
    lam = np.zeros_like(c)
    if active:
        idx = list(active)
        try:
            lam[idx] = sla.solve(W[np.ix_(idx, idx)], c[idx], assume_a="pos")
        except (sla.LinAlgError, ValueError):
            lam[idx] = np.linalg.lstsq(W[np.ix_(idx, idx)], c[idx], rcond=None)[0]
    return lam


def _lawson_hanson(W, c, tol_g, max_iter):
    # primal active-set method for min 1/2 l.W.l - c.l, l >= 0; every step
    # keeps l feasible and decreases the objective, so it cannot cycle
    m = c.shape[0]
    lam = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    for _ in range(max_iter):
        w = c - W @ lam
        cand = np.where(~passive, w, -np.inf)
        j = int(np.argmax(cand)) if m else 0
        if m == 0 or cand[j] <= tol_g:
            return lam, tuple(np.flatnonzero(passive))
        passive[j] = True
        while True:
            idx = np.flatnonzero(passive)
            z = np.zeros(m)
            z[idx] = _solve_active(W, c, tuple(idx))[idx]
            if np.all(z[idx] > 0):
                lam = z
                break
            neg = idx[z[idx] <= 0]
            alpha = np.min(lam[neg] / (lam[neg] - z[neg]))
            lam = lam + alpha * (z - lam)
            passive &= lam > 0
            lam[~passive] = 0.0
    raise MaxOuter(f"Lawson-Hanson loop did not finish in {max_iter} steps")


def solve_saddle_point_active_set(p, max_outer=200, factorization=None):
    """Exact solution of the contact problem by a full-exchange active-set loop.

    Each outer iteration solves the equality-constrained problem on the
    current active set, then simultaneously drops every pair with a negative
    multiplier and adds every penetrating pair.  Revisiting an active set
    switches to a monotone (Lawson-Hanson) active-set loop on the same
    reduced system; :class:`CycleDetected` is raised only if that one fails
    too.
    """
    U0, Z, W, c = delassus(p, factorization)
    m = p.n_pairs
    if m == 0:
        return KKTSolution(U0, np.zeros(0), ())
    c_scale = max(np.abs(c).max(), np.abs(p.D).max(), np.abs(p.B @ U0).max(), 1e-300)
    tol_g = ACTIVE_SET_RTOL * c_scale

    active = tuple(int(j) for j in np.flatnonzero(c > tol_g))
    visited = set()
    outer = 0
    for outer in range(1, max_outer + 1):
        visited.add(active)
        lam = _solve_active(W, c, active)
        gap = c - W @ lam
        tol_l = ACTIVE_SET_RTOL * max(np.abs(lam).max(), 1e-300)
        keep = [j for j in active if lam[j] >= -tol_l]
        add = [int(j) for j in np.flatnonzero(gap > tol_g) if j not in active]
        new = tuple(sorted(keep + add))
        if new == active:
            break
        if new in visited:
            try:
                lam, active = _lawson_hanson(W, c, tol_g, 10 * (m + 1) * max_outer)
            except MaxOuter as exc:
                raise CycleDetected(f"active set {new} revisited and fallback failed") from exc
            break
        active = new
    else:
        raise MaxOuter(f"active set did not settle in {max_outer} outer iterations")

    lam = np.where(lam > 0, lam, 0.0)
    # degenerate pairs (zero multiplier on a closed gap) are reported inactive
    active = tuple(int(j) for j in active if lam[j] > 0)
    U = U0 - Z @ lam
    return KKTSolution(U, lam, active, outer_iterations=outer)


def brute_force_kkt(p, tol=1e-10, max_pairs=20):
    """Enumerate all ``2^N_lam`` active sets and return the KKT point.

    Candidates are tried by increasing size.  When several candidates satisfy
    the conditions (a degenerate pair with zero multiplier and zero gap) the
    smallest is returned with ``ambiguous=True``.
    """
    m, n = p.n_pairs, p.n_dof
    if m > max_pairs:
        raise ValueError(f"brute force limited to {max_pairs} pairs, got {m}")
    K = p.K.toarray()
    B = p.B.toarray()
    F = np.asarray(p.F_ext)
    D = np.asarray(p.D)
    found = []
    for size in range(m + 1):
        for active in itertools.combinations(range(m), size):
            idx = list(active)
            BA = B[idx]
            M = np.block([[K, BA.T], [BA, np.zeros((size, size))]])
            rhs = np.concatenate([F, D[idx]])
            try:
                sol = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                continue
            U = sol[:n]
            lam = np.zeros(m)
            lam[idx] = sol[n:]
            gap = B @ U - D
            lam_scale = max(np.abs(lam).max() if m else 0.0, np.abs(F).max(), 1e-300)
            gap_scale = max(np.abs(D).max() if m else 0.0, np.abs(B @ U).max() if m else 0.0, 1e-300)
            inactive = [j for j in range(m) if j not in active]
            if np.all(lam[idx] >= -tol * lam_scale) and np.all(gap[inactive] <= tol * gap_scale):
                found.append(KKTSolution(U, np.maximum(lam, 0.0), active))
    if not found:
        raise NoKKTPoint("no active set satisfies the contact conditions")
    best = found[0]
    return best._replace(ambiguous=len(found) > 1)
